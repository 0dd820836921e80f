"""Tuning grids, BIC-driven grid search and two-stage aggregation.

Fits run on the working scale chosen by ``scaling`` (see
:class:`medpath.model.Scaling`); every fit in a search result is restated in
the original units on the centred data, and BIC is computed there.

For the plain LASSO the alpha block is independent of (beta, gamma), so a
search solves one (beta, gamma) path per ``lambda_beta`` and pairs it with the
closed-form alpha for every ``lambda_alpha``.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .metrics import MetricsReport, mean_report
from .model import ContractError, Dataset, MediationParams, Scaling, bic
from .penalties import STRATEGIES, PenaltyConfig, effective_lambda_gamma
from .solver import (FitFailure, FitResult, Prepared, SolverConfig, fit, lasso_alpha, quiet,
                     restate)

__all__ = ["DEFAULT_LAMBDAS", "default_gamma_grid", "GridSpec", "GridEntry",
           "GridSearchResult", "bic", "grid_search", "method_label", "stage_one",
           "two_stage_select"]

DEFAULT_LAMBDAS = (0.001, 0.01, 0.1, 1.0, 2.0, 5.0, 10.0)
TIE_RTOL = 1e-10


def default_gamma_grid() -> tuple:
    """72 values: 0, 21 log-spaced in [1e-3, 0.1], 50 log-spaced in (0.1, 100]."""
    g = np.concatenate([[0.0], np.geomspace(1e-3, 0.1, 21), np.geomspace(0.1, 100.0, 51)[1:]])
    return tuple(float(v) for v in g)


def _check_values(name, vals):
    vals = tuple(float(v) for v in vals)
    if not vals:
        raise ContractError(f"{name} is empty")
    if any(not np.isfinite(v) or v < 0 for v in vals):
        raise ContractError(f"{name} must be finite and nonnegative")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ContractError(f"{name} must be strictly ascending")
    return vals


@dataclass(frozen=True)
class GridSpec:
    lambda_alpha_values: tuple = DEFAULT_LAMBDAS
    lambda_beta_values: tuple = DEFAULT_LAMBDAS
    lambda_gamma_values: tuple = field(default_factory=default_gamma_grid)
    strategy: str = "SMD"
    gamma_floor: float = 0.3

    def __post_init__(self):
        for f in ("lambda_alpha_values", "lambda_beta_values", "lambda_gamma_values"):
            object.__setattr__(self, f, _check_values(f, getattr(self, f)))
        if self.strategy not in STRATEGIES:
            raise ContractError(f"strategy must be one of {STRATEGIES}")
        if not (np.isfinite(self.gamma_floor) and self.gamma_floor >= 0):
            raise ContractError("gamma_floor must be finite and nonnegative")
        object.__setattr__(self, "gamma_floor", float(self.gamma_floor))

    def triples(self):
        """Requested (lambda_alpha, lambda_beta, lambda_gamma) in canonical order."""
        return [(a, b, g) for a in self.lambda_alpha_values
                for b in self.lambda_beta_values for g in self.lambda_gamma_values]

    def __len__(self):
        return (len(self.lambda_alpha_values) * len(self.lambda_beta_values)
                * len(self.lambda_gamma_values))

    def to_dict(self) -> dict:
        return {"lambda_alpha_values": list(self.lambda_alpha_values),
                "lambda_beta_values": list(self.lambda_beta_values),
                "lambda_gamma_values": list(self.lambda_gamma_values),
                "strategy": self.strategy, "gamma_floor": self.gamma_floor}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise ContractError(f"unknown grid keys: {sorted(extra)}")
        return cls(**d)


@dataclass(frozen=True)
class GridEntry:
    """One grid point. ``config`` is ``None`` when the point is not admissible."""

    requested: tuple
    config: PenaltyConfig | None
    fit: FitResult | FitFailure

    @property
    def ok(self) -> bool:
        return self.fit.ok


@dataclass(frozen=True)
class GridSearchResult:
    table: list
    best: int | None
    ties: list
    scaling: str = "none"

    @property
    def best_entry(self) -> GridEntry | None:
        return None if self.best is None else self.table[self.best]

    def to_dict(self) -> dict:
        best = self.best_entry
        return {
            "scaling": self.scaling,
            "best": self.best,
            "ties": list(self.ties),
            "best_config": None if best is None else best.config.to_dict(),
            "best_fit": None if best is None else best.fit.to_dict(),
            "n_points": len(self.table),
            "n_failed": sum(not e.ok for e in self.table),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda_alpha", "lambda_beta", "lambda_gamma", "lambda_gamma_effective",
                    "bic", "q", "objective", "converged", "ok", "message"])
        for e in self.table:
            la, lb, lg = e.requested
            if e.ok:
                f = e.fit
                w.writerow([la, lb, lg, e.config.lambda_gamma, repr(f.bic), f.q,
                            repr(f.objective), int(f.converged), 1, ""])
            else:
                w.writerow([la, lb, lg, "", "", "", "", "", 0, e.fit.message])
        return buf.getvalue()


def _config_for(pen_base: PenaltyConfig, grid: GridSpec, la, lb, lg):
    """Penalty config for a requested point, or the reason it is inadmissible."""
    try:
        # the grid carries the strategy and floor the rule needs
        eff = effective_lambda_gamma(grid, lg)
        pen = PenaltyConfig.from_dict({
            **pen_base.to_dict(), "strategy": grid.strategy,
            "gamma_floor": grid.gamma_floor, "lambda_alpha": la, "lambda_beta": lb,
            "lambda_gamma": eff})
    except ContractError as exc:
        return None, str(exc)
    return pen, None


def _path(work: Dataset, pens, cfg: SolverConfig, warm_cache: dict, key_of):
    """Warm-started fits along ``pens``; reuses and fills ``warm_cache``."""
    prep = None
    warm = None
    out = []
    for pen in pens:
        key = key_of(pen)
        res = warm_cache.get(key)
        if res is None:
            if prep is None:
                prep = Prepared(work)
            try:
                res = fit(work, pen, cfg, warm, prepared=prep)
            except (ContractError, ArithmeticError) as exc:
                res = FitFailure(str(exc))
            warm_cache[key] = res
        if res.ok:
            warm = res.params
        out.append((key, res))
    return out


def _path_task(args):
    work, pens, cfg, kind, known = args
    return _path(work, pens, cfg, known, _KEYS[kind])


_KEYS = {
    "lasso": lambda p: (p.lambda_beta, p.lambda_gamma),
    "pathway": lambda p: (p.lambda_alpha, p.lambda_beta, p.lambda_gamma),
}


def _run_paths(work, paths, cfg, kind, cache, jobs):
    key_of = _KEYS[kind]
    if jobs <= 1 or len(paths) <= 1:
        for pens in paths:
            _path(work, pens, cfg, cache, key_of)
        return
    # each worker sees the cached part of its path, so warm starts and
    # therefore results match the sequential run exactly
    tasks = []
    for pens in paths:
        keys = [key_of(p) for p in pens]
        if any(k not in cache for k in keys):
            tasks.append((work, pens, cfg, kind, {k: cache[k] for k in keys if k in cache}))
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        for done in ex.map(_path_task, tasks):
            for key, res in done:
                cache.setdefault(key, res)


def grid_search(data: Dataset, grid: GridSpec = GridSpec(),
                pen_base: PenaltyConfig = PenaltyConfig(), cfg: SolverConfig = SolverConfig(),
                *, scaling: str = "none", jobs: int = 1, cache: dict | None = None
                ) -> GridSearchResult:
    """Fit every grid point and pick the BIC minimizer.

    Ties (relative BIC difference below ``TIE_RTOL``) go to the larger total
    penalty, then to canonical grid order. Points that are not admissible
    under ``grid.strategy`` (MD with ``lambda_gamma = 0``) and fits that raise
    are kept in the table as failures and never selected.

    ``cache`` may be shared between searches on the same data, scaling and
    solver settings; fits with equal effective penalties are then reused.
    """
    sc = Scaling.of(data, scaling)
    work = sc.apply(data)
    raw = sc.centered(data)
    cfg = quiet(cfg)
    kind = "pathway" if pen_base.pair_kappa > 0 else "lasso"
    cache = {} if cache is None else cache
    cache = cache.setdefault((kind, scaling), {})
    key_of = _KEYS[kind]

    points = []
    for la, lb, lg in grid.triples():
        pen, why = _config_for(pen_base, grid, la, lb, lg)
        points.append(((la, lb, lg), pen, why))

    # one warm-started path per lambda_beta (lasso) or per pair (pathway),
    # over distinct effective lambda_gamma in ascending order
    groups = {}
    for _, pen, _ in points:
        if pen is None:
            continue
        if kind == "lasso":
            gk = pen.lambda_beta
            solve_pen = PenaltyConfig.from_dict({**pen.to_dict(), "lambda_alpha": 0.0})
        else:
            gk = (pen.lambda_alpha, pen.lambda_beta)
            solve_pen = pen
        groups.setdefault(gk, {})[key_of(solve_pen)] = solve_pen
    paths = [[g[k] for k in sorted(g, key=lambda k: k[-1])] for _, g in sorted(groups.items())]
    _run_paths(work, paths, cfg, kind, cache, int(jobs))

    alphas = {}
    table = []
    for req, pen, why in points:
        if pen is None:
            table.append(GridEntry(req, None, FitFailure(why)))
            continue
        key = (pen.lambda_beta, pen.lambda_gamma) if kind == "lasso" else key_of(pen)
        res = cache[key]
        if not res.ok:
            table.append(GridEntry(req, pen, res))
            continue
        params = res.params
        if kind == "lasso":
            if pen.lambda_alpha not in alphas:
                alphas[pen.lambda_alpha] = lasso_alpha(work, pen.lambda_alpha)
            params = MediationParams(alphas[pen.lambda_alpha], params.beta, params.gamma)
        table.append(GridEntry(req, pen, restate(res, sc.to_raw(params), pen, cfg, raw)))
    best, ties = _select(table)
    return GridSearchResult(table, best, ties, scaling)


def _select(table):
    valid = [i for i, e in enumerate(table) if e.ok]
    if not valid:
        return None, []
    bmin = min(table[i].fit.bic for i in valid)
    tol = TIE_RTOL * max(1.0, abs(bmin))
    ties = [i for i in valid if table[i].fit.bic - bmin <= tol]
    best = min(ties, key=lambda i: (-table[i].config.total_penalty, i))
    return best, ties


# -- two-stage protocol ------------------------------------------------------

def method_label(config: PenaltyConfig) -> str:
    """``<strategy>.<E|S|R>_<L|P>``: equal, larger-alpha or larger-beta L1 weights."""
    la, lb = config.lambda_alpha, config.lambda_beta
    shape = "E" if la == lb else ("S" if la > lb else "R")
    fam = "P" if config.variant == "pathway" else "L"
    return f"{config.strategy}.{shape}_{fam}"


def _rows(sample):
    return [(c, f, m) for c, f, m in sample if c is not None and f.ok]


def stage_one(per_sample, method_of=method_label):
    """Per sample and method, the BIC-optimal row ``(config, fit, metrics)``.

    Returns a list over samples of ``{method: row}``.
    """
    per_sample = list(per_sample)
    if not per_sample:
        raise ContractError("two-stage selection needs at least one sample")
    grids = []
    picks = []
    for s, sample in enumerate(per_sample):
        sample = list(sample)
        if not sample:
            raise ContractError(f"sample {s} has an empty table")
        grids.append(sorted(tuple(sorted(c.to_dict().items())) for c, _, _ in sample
                            if c is not None))
        best = {}
        for row in _rows(sample):
            cfg, f, _ = row
            key = (f.bic, -cfg.total_penalty)
            label = method_of(cfg)
            if label not in best or key < best[label][0]:
                best[label] = (key, row)
        picks.append({k: v[1] for k, v in best.items()})
    if any(g != grids[0] for g in grids[1:]):
        raise ContractError("samples do not share the same configuration grid")
    return picks


def two_stage_select(per_sample, method_of=method_label) -> dict:
    """Stage 1 picks the BIC-optimal configuration per sample and method;
    stage 2 averages the picked metrics across samples, per method."""
    picks = stage_one(per_sample, method_of)
    methods = sorted({m for p in picks for m in p})
    out = {}
    for m in methods:
        rows = [p[m] for p in picks if m in p]
        out[m] = mean_report(r[2] for r in rows)
    return out
