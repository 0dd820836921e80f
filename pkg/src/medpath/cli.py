"""Command-line entry point: ``medpath <command> ...``.

Exit codes: 0 success, 2 usage or configuration error, 3 I/O error,
4 internal invariant violation (or every replicate of a study failed).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import jsonschema

from . import __version__
from .artifacts import atomic_write_text, read_json, write_json
from .metrics import evaluate
from .model import ContractError, MediationParams, Scaling, dataset_to_csv, read_dataset
from .penalties import STRATEGIES, PenaltyConfig, effective_lambda_gamma
from .screening import ScreenConfig, sis_screen
from .selection import GridSpec, grid_search
from .simgen import Scenario, generate, replicate_seed
from .solver import SolverConfig, fit, restate
from .study import StudyConfig, aggregate, resolve_jobs, run_study

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INTERNAL = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _csv_text(rows, fields=None) -> str:
    rows = list(rows)
    fields = fields or (list(rows[0]) if rows else [])
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: "" if r.get(k) is None else r[k] for k in fields})
    return buf.getvalue()


class Run:
    """Collects outputs of one command and writes its manifest last."""

    def __init__(self, command: str, out: Path, config: dict, seed, inputs=()):
        self.command = command
        self.out = Path(out)
        self.config = config
        self.seed = seed
        self.inputs = [str(p) for p in inputs]
        self.outputs = []
        self.t0 = time.perf_counter()

    def text(self, name: str, text: str):
        atomic_write_text(self.out / name, text)
        self.outputs.append(name)

    def json(self, name: str, obj, schema=None):
        write_json(self.out / name, obj, schema)
        self.outputs.append(name)

    def finish(self):
        manifest = {"command": self.command, "config": self.config, "seed": self.seed,
                    "version": __version__, "inputs": self.inputs,
                    "outputs": sorted(self.outputs),
                    "wall_time": time.perf_counter() - self.t0}
        write_json(self.out / "manifest.json", manifest, "manifest")


def _load_config(path, schema):
    if path is None:
        return {}
    return read_json(path, schema)


def _penalty(cfg: dict, args) -> PenaltyConfig:
    pen = PenaltyConfig.from_dict(cfg.get("penalty", {}))
    if args.strategy is None and args.gamma_floor is None:
        return pen
    floor = pen.gamma_floor if args.gamma_floor is None else args.gamma_floor
    strategy = args.strategy or pen.strategy
    probe = argparse.Namespace(strategy=strategy, gamma_floor=floor)
    return replace(pen, strategy=strategy, gamma_floor=floor,
                   lambda_gamma=effective_lambda_gamma(probe, pen.lambda_gamma))


# -- commands ----------------------------------------------------------------

def cmd_simulate(args):
    cfg = _load_config(args.config, "scenario")
    sc = Scenario.from_dict(cfg)
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    reps = args.replicates or 1
    run = Run("simulate", args.out, {"scenario": sc.to_dict(), "replicates": reps}, sc.seed,
              [args.config] if args.config else [])
    for i in range(reps):
        data, truth = generate(replace(sc, seed=replicate_seed(sc.seed, i)))
        run.text(f"dataset_{i:03d}.csv", dataset_to_csv(data))
        run.json(f"truth_{i:03d}.json", truth.to_dict(), "truth")
    run.finish()
    return EXIT_OK


def cmd_screen(args):
    if (args.k is None) == (args.d is None):
        raise UsageError("give exactly one of --k or --d")
    data = read_dataset(args.dataset)
    scfg = ScreenConfig(k=args.k if args.k is not None else 1.0, d_override=args.d)
    res = sis_screen(data, scfg)
    run = Run("screen", args.out, {"screen": scfg.to_dict()}, None, [args.dataset])
    run.text("screened.csv", dataset_to_csv(res.screened))
    run.json("screen.json", {**res.to_dict(), "d": len(res.kept_indices), "k": args.k},
             "screen_result")
    run.finish()
    return EXIT_OK


def cmd_fit(args):
    cfg = _load_config(args.config, "fit_config")
    pen = _penalty(cfg, args)
    solver = SolverConfig.from_dict(cfg.get("solver", {}))
    if args.seed is not None:
        solver = replace(solver, seed=args.seed)
    scaling = cfg.get("scaling", "none")
    data = read_dataset(args.dataset)
    sc = Scaling.of(data, scaling)
    res = fit(sc.apply(data), pen, solver)
    if scaling != "none":
        res = restate(res, sc.to_raw(res.params), pen, solver, sc.centered(data))
    if not res.converged:
        print(f"warning: no convergence within {solver.max_iter} iterations", file=sys.stderr)
    run = Run("fit", args.out, {"penalty": pen.to_dict(), "solver": solver.to_dict(),
                                "scaling": scaling}, solver.seed, [args.dataset])
    run.json("fit.json", {"config": pen.to_dict(), "scaling": scaling, "fit": res.to_dict()},
             "fit_output")
    if res.history is not None:
        run.text("history.csv", _csv_text(
            [{"iteration": i + 1, "objective": repr(float(v))} for i, v in enumerate(res.history)],
            ["iteration", "objective"]))
    run.finish()
    return EXIT_OK


def cmd_grid_search(args):
    cfg = _load_config(args.config, "grid_config")
    grid = GridSpec.from_dict(cfg.get("grid", {}))
    if args.strategy is not None:
        grid = replace(grid, strategy=args.strategy)
    if args.gamma_floor is not None:
        grid = replace(grid, gamma_floor=args.gamma_floor)
    pen = PenaltyConfig.from_dict(cfg.get("penalty", {}))
    solver = SolverConfig.from_dict(cfg.get("solver", {}))
    scaling = cfg.get("scaling", "none")
    data = read_dataset(args.dataset)
    res = grid_search(data, grid, pen, solver, scaling=scaling, jobs=resolve_jobs(args.jobs))
    run = Run("grid-search", args.out, {"grid": grid.to_dict(), "penalty": pen.to_dict(),
                                        "solver": solver.to_dict(), "scaling": scaling},
              solver.seed, [args.dataset])
    run.text("grid.csv", res.to_csv())
    run.json("result.json", res.to_dict(), "grid_result")
    run.finish()
    if res.best is None:
        print("error: every grid point failed", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def cmd_replicate(args):
    cfg = _load_config(args.config, "study")
    study = StudyConfig.from_dict(cfg)
    if args.replicates is not None:
        study = replace(study, replicates=args.replicates)
    if args.seed is not None:
        study = replace(study, scenario=replace(study.scenario, seed=args.seed))
    if args.strategy is not None:
        study = replace(study, strategies=(args.strategy,))
    if args.gamma_floor is not None:
        study = replace(study, grid=replace(study.grid, gamma_floor=args.gamma_floor))
    if args.k is not None:
        study = replace(study, k_values=(args.k,))
    res = run_study(study, resolve_jobs(args.jobs))
    run = Run("replicate", args.out, study.to_dict(), study.scenario.seed,
              [args.config] if args.config else [])
    failed = {(s, i): err for s, i, err in res.failures}
    for s in range(len(study.scenarios())):
        for i in range(study.replicates):
            recs = [r for r in res.records if (r["scenario_index"], r["replicate"]) == (s, i)]
            run.json(f"replicates/rep_{s:02d}_{i:03d}.json",
                     {"scenario_index": s, "replicate": i, "error": failed.get((s, i)),
                      "records": recs}, "replicate_records")
    if res.records:
        run.text("records.csv", _csv_text(res.records))
        run.text("aggregate.csv", _csv_text(aggregate(res.records)))
        run.text("long.csv", _csv_text(res.long_format()))
    run.finish()
    for s, i, err in res.failures:
        print(f"replicate {s}/{i} failed:\n{err}", file=sys.stderr)
    if not res.records:
        return EXIT_INTERNAL
    return EXIT_OK


def cmd_evaluate(args):
    fitted = read_json(args.fit)
    if "fit" in fitted:
        fitted = fitted["fit"]
    truth = read_json(args.truth, "truth")
    est = MediationParams.from_dict(fitted["params"])
    rep = evaluate(est, MediationParams.from_dict(truth["params"]))
    run = Run("evaluate", args.out, {}, None, [args.fit, args.truth])
    run.json("metrics.json", rep.to_dict(), "metrics")
    run.finish()
    return EXIT_OK


def cmd_report(args):
    path = Path(args.run_dir) / "aggregate.csv"
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols = ["method", "p", "gamma_true", "k", "d", "n", "de", "tie", "tpr", "tnr", "f1",
            "mse_ie", "rb_ie"]

    def cell(v):
        for conv in (int, lambda s: f"{float(s):.3f}"):
            try:
                return str(conv(v))
            except ValueError:
                pass
        return v

    lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    lines += ["| " + " | ".join(cell(r.get(c, "")) for c in cols) + " |" for r in rows]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out is not None:
        run = Run("report", args.out, {}, None, [str(path)])
        run.text("report.md", text)
        run.finish()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="medpath", description="Penalized high-dimensional mediation analysis.")
    parser.add_argument("--version", action="version", version=f"medpath {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--seed", type=int)
        return p

    def strategy_flags(p):
        p.add_argument("--strategy", choices=STRATEGIES)
        p.add_argument("--gamma-floor", type=float, dest="gamma_floor")

    p = common(sub.add_parser("simulate", help="draw simulated datasets"))
    p.add_argument("--replicates", type=int)
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("screen", help="sure independence screening"))
    p.add_argument("dataset")
    p.add_argument("--k", type=float)
    p.add_argument("--d", type=int)
    p.set_defaults(func=cmd_screen)

    p = common(sub.add_parser("fit", help="fit one penalty configuration"))
    p.add_argument("dataset")
    strategy_flags(p)
    p.set_defaults(func=cmd_fit)

    p = common(sub.add_parser("grid-search", help="BIC selection over a tuning grid"))
    p.add_argument("dataset")
    p.add_argument("--jobs", type=int)
    strategy_flags(p)
    p.set_defaults(func=cmd_grid_search)

    p = common(sub.add_parser("replicate", help="run a replicated simulation study"))
    p.add_argument("--jobs", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--k", type=float, help="screen every replicate with this k")
    strategy_flags(p)
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("evaluate", help="score a fit against a simulation truth")
    p.add_argument("fit")
    p.add_argument("truth")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="print the aggregate table of a replicate run")
    p.add_argument("run_dir")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ContractError, jsonschema.ValidationError, json.JSONDecodeError,
            KeyError, TypeError) as exc:
        msg = exc.message if isinstance(exc, jsonschema.ValidationError) else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # anything else is a bug or a broken invariant
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
