"""Replicated simulation studies: strategy comparison, DE sweep and SIS k-sweep.

Each replicate draws a dataset, optionally screens it, runs one grid search
per strategy and scores the selected fit against the truth. Fits run on
fully standardized data by default and are scored in the original units.
"""
from __future__ import annotations

import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .metrics import evaluate
from .model import ContractError, MediationParams, STANDARDIZE_MODES
from .penalties import STRATEGIES, PenaltyConfig
from .screening import ScreenConfig, reduced_dim, sis_screen
from .selection import GridSpec, grid_search, method_label, stage_one
from .simgen import Scenario, de_sweep_scenarios, generate, replicate_seed
from .solver import SolverConfig

SELECTIONS = ("grid", "two-stage")
GROUPINGS = ("method", "pair")
KEY_FIELDS = ("method", "p", "gamma_true", "k", "d")
VALUE_FIELDS = ("de", "tie", "tpr", "tnr", "tdr", "f1", "youden", "mse_alpha", "mse_beta",
                "mse_ie", "rb_ie", "rb_de")


@dataclass(frozen=True)
class StudyConfig:
    scenario: Scenario = Scenario()
    strategies: tuple = ("TR", "MD", "SMD")
    penalty: PenaltyConfig = PenaltyConfig()
    grid: GridSpec = field(default_factory=GridSpec)
    solver: SolverConfig = SolverConfig()
    replicates: int = 3
    scaling: str = "full"
    selection: str = "grid"
    group_by: str = "method"
    k_values: tuple = ()
    de_sweep: bool = False

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "k_values", tuple(float(k) for k in self.k_values))
        if not self.strategies or any(s not in STRATEGIES for s in self.strategies):
            raise ContractError(f"strategies must be a non-empty subset of {STRATEGIES}")
        if int(self.replicates) < 1:
            raise ContractError("replicates must be >= 1")
        if self.scaling not in STANDARDIZE_MODES:
            raise ContractError(f"scaling must be one of {STANDARDIZE_MODES}")
        if self.selection not in SELECTIONS:
            raise ContractError(f"selection must be one of {SELECTIONS}")
        if self.group_by not in GROUPINGS:
            raise ContractError(f"group_by must be one of {GROUPINGS}")
        if any(not k > 0 for k in self.k_values):
            raise ContractError("k values must be positive")

    def to_dict(self) -> dict:
        return {"scenario": self.scenario.to_dict(), "strategies": list(self.strategies),
                "penalty": self.penalty.to_dict(), "grid": self.grid.to_dict(),
                "solver": self.solver.to_dict(), "replicates": self.replicates,
                "scaling": self.scaling, "selection": self.selection,
                "group_by": self.group_by, "k_values": list(self.k_values),
                "de_sweep": self.de_sweep}

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise ContractError(f"unknown study keys: {sorted(extra)}")
        d = dict(d)
        for key, typ in (("scenario", Scenario), ("penalty", PenaltyConfig),
                         ("grid", GridSpec), ("solver", SolverConfig)):
            if key in d:
                d[key] = typ.from_dict(d[key])
        return cls(**d)

    def scenarios(self):
        return de_sweep_scenarios(self.scenario) if self.de_sweep else [self.scenario]


def pair_label(config: PenaltyConfig) -> str:
    return f"{method_label(config)}[{config.lambda_alpha:g},{config.lambda_beta:g}]"


def _embed(params: MediationParams, columns, p: int) -> MediationParams:
    a = np.zeros(p)
    b = np.zeros(p)
    a[columns] = params.alpha
    b[columns] = params.beta
    return MediationParams(a, b, params.gamma)


def _record(base: dict, method: str, config: PenaltyConfig, fit, truth, columns, tol):
    est = _embed(fit.params, columns, truth.params.p)
    rep = evaluate(est, truth.params, tol)
    row = {**base, "method": method,
           "lambda_alpha": config.lambda_alpha, "lambda_beta": config.lambda_beta,
           "lambda_gamma": config.lambda_gamma, "bic": fit.bic, "q": fit.q,
           "converged": fit.converged, "de": est.gamma,
           "tie": float(np.sum(est.alpha * est.beta))}
    row.update({k: v for k, v in rep.to_dict().items() if k != "confusion"})
    return row


def run_replicate(study: StudyConfig, scenario_index: int, index: int) -> list:
    """Records for one replicate of one scenario, in canonical order."""
    sc = study.scenarios()[scenario_index]
    sc = replace(sc, seed=replicate_seed(sc.seed, index))
    data, truth = generate(sc)
    tol = study.solver.nonzero_tol
    screens = [(None, None, np.arange(sc.p), data)]
    for k in study.k_values:
        d = reduced_dim(sc.n, k)
        if d > sc.p:
            continue
        res = sis_screen(data, ScreenConfig(k=k))
        screens.append((k, d, res.columns, res.screened))
    if study.k_values:
        screens = screens[1:]
    out = []
    for k, d, columns, work in screens:
        base = {"scenario_index": scenario_index, "replicate": index, "seed": sc.seed, "p": sc.p,
                "gamma_true": sc.gamma_true, "k": k, "d": d}
        cache = {}
        for strategy in study.strategies:
            grid = replace(study.grid, strategy=strategy)
            res = grid_search(work, grid, study.penalty, study.solver,
                              scaling=study.scaling, cache=cache)
            if study.selection == "grid":
                best = res.best_entry
                if best is None:
                    continue
                name = f"{strategy}_{'P' if study.penalty.pair_kappa > 0 else 'L'}"
                out.append(_record(base, name, best.config, best.fit, truth, columns, tol))
            else:
                label = method_label if study.group_by == "method" else pair_label
                rows = [(e.config, e.fit, None) for e in res.table]
                picks = stage_one([rows], label)[0]
                for name in sorted(picks):
                    config, fit, _ = picks[name]
                    out.append(_record(base, name, config, fit, truth, columns, tol))
    return out


def _task(args):
    study, s, i = args
    try:
        return s, i, run_replicate(study, s, i), None
    except Exception:  # recorded per replicate; the study carries on
        return s, i, [], traceback.format_exc(limit=3)


def resolve_jobs(jobs: int | None) -> int:
    if jobs is None:
        jobs = int(os.environ.get("MEDPATH_JOBS", "1"))
    if jobs < 1:
        raise ContractError("jobs must be >= 1")
    return jobs


@dataclass
class StudyResult:
    records: list
    failures: list   # (scenario_index, replicate, traceback)

    def aggregate(self) -> list:
        return aggregate(self.records)

    def long_format(self) -> list:
        rows = []
        for r in self.records:
            for m in VALUE_FIELDS:
                rows.append({"scenario_index": r["scenario_index"], "replicate": r["replicate"], **{k: r[k] for k in KEY_FIELDS},
                             "metric": m, "value": r[m]})
        return rows


def run_study(study: StudyConfig, jobs: int | None = None) -> StudyResult:
    jobs = resolve_jobs(jobs)
    tasks = [(study, s, i) for s in range(len(study.scenarios()))
             for i in range(int(study.replicates))]
    if jobs == 1:
        results = [_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_task, tasks))
    records, failures = [], []
    for s, i, recs, err in sorted(results, key=lambda r: (r[0], r[1])):
        records.extend(recs)
        if err is not None:
            failures.append((s, i, err))
    return StudyResult(records, failures)


def _key_sort(key):
    method, p, gamma_true, k, d = key
    # unscreened rows (k and d None) sort first
    return (method, p, gamma_true, -1.0 if k is None else k, -1 if d is None else d)


def aggregate(records) -> list:
    """Mean of every value field per (method, p, gamma_true, k, d).

    A mean is ``None`` when any contributing value is undefined.
    """
    groups = {}
    for r in records:
        groups.setdefault(tuple(r[k] for k in KEY_FIELDS), []).append(r)
    out = []
    for key in sorted(groups, key=_key_sort):
        rows = groups[key]
        agg = dict(zip(KEY_FIELDS, key))
        agg["n"] = len(rows)
        for f in VALUE_FIELDS:
            vals = [r[f] for r in rows]
            agg[f] = None if any(v is None for v in vals) else float(np.mean(vals))
        out.append(agg)
    return out


def summary(records, method: str, **where) -> dict:
    """The single aggregate row for ``method`` matching ``where``."""
    rows = [a for a in aggregate(records) if a["method"] == method
            and all(a[k] == v for k, v in where.items())]
    if len(rows) != 1:
        raise ContractError(f"expected one aggregate row for {method} {where}, got {len(rows)}")
    return rows[0]
