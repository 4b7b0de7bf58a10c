"""Command-line front end: ``pwnn {run,sweep,compare,ud,field,losscurve}``.

Configs are JSON objects whose keys are the :class:`ExperimentSpec` fields
plus the options in :data:`GLOBAL_KEYS`; unknown keys are rejected. Every
command writes into ``--out``: result tables as CSV with a header row, the
resolved config (all defaults filled in) and a seed manifest that is enough
to rerun any row.

Exit codes: 0 success, 1 some run failed, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import experiments as ex
from .evaluation import EvalGrid, field_grids
from .network import Activation, NetParams, NetSpec, forward
from .problems import (
    STREAM_DIRECTIONS,
    STREAM_INIT,
    STREAM_INTERIOR,
    HelmholtzProblem,
    kd_problem,
    ud_problem,
)

log = logging.getLogger("pwnn")

EXIT_OK, EXIT_RUN_FAILED, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    spec: ex.ExperimentSpec
    workers: int = 1
    out: str = "results"
    verbosity: str = "warning"
    scale: str = "desk"
    layers_list: list[int] = field(default_factory=list)
    units_list: list[int] = field(default_factory=list)
    n_f_list: list[int] = field(default_factory=list)
    n_per_edge_list: list[int] = field(default_factory=list)
    repetitions: int | None = None
    solvers: list[str] = field(default_factory=lambda: list(ex.NETWORK_SOLVERS))
    model: str | None = None

    def __post_init__(self):
        if self.scale not in ex.SCALES:
            raise ConfigError(f"scale: expected one of {sorted(ex.SCALES)}, got {self.scale!r}")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")
        if self.verbosity.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR"):
            raise ConfigError(f"verbosity: unknown level {self.verbosity!r}")
        bad = [s for s in self.solvers if s not in ex.NETWORK_SOLVERS]
        if bad:
            raise ConfigError(f"solvers: not a network solver: {bad[0]!r}")

    @property
    def reps(self) -> int:
        return self.repetitions if self.repetitions is not None else ex.SCALES[self.scale]

    def to_dict(self) -> dict:
        d = asdict(self.spec.resolved())
        d.update({f.name: getattr(self, f.name) for f in fields(self) if f.name != "spec"})
        d["repetitions"] = self.reps
        return d


SPEC_KEYS = {f.name for f in fields(ex.ExperimentSpec)}
GLOBAL_KEYS = {f.name for f in fields(RunConfig)} - {"spec"}


def load_config(raw: dict, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from a parsed JSON object; ``overrides`` come from flags."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for key in raw:
        if key not in SPEC_KEYS and key not in GLOBAL_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
    merged = {**raw, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    spec_kw = {k: v for k, v in merged.items() if k in SPEC_KEYS}
    glob_kw = {k: v for k, v in merged.items() if k in GLOBAL_KEYS}
    try:
        spec = ex.ExperimentSpec(**spec_kw)
        return RunConfig(spec=spec, **glob_kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def read_config(path: str | None, overrides: dict) -> RunConfig:
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return load_config(raw, overrides)


# ---------------------------------------------------------------- writers


def fmt(value) -> str:
    """Round-trip text for a cell: ``repr`` for floats, ``str`` otherwise."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return "" if value is None else str(value)


def write_table(path: Path, columns, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for rec in records:
            get = rec.get if isinstance(rec, dict) else (lambda c, r=rec: getattr(r, c))
            w.writerow([fmt(get(c)) for c in columns])


def write_rows(path: Path, rows) -> None:
    write_table(path, ex.ResultRow.columns(), rows)


def write_matrix(path: Path, matrix: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"col{j}" for j in range(matrix.shape[1])])
        for line in matrix:
            w.writerow([repr(float(v)) for v in line])


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def problem_record(problem: HelmholtzProblem) -> dict:
    rec = {"kind": problem.kind, "k": repr(float(problem.k))}
    if problem.kind == "KD":
        rec["order"] = problem.order
    else:
        rec["wavevectors"] = [[repr(float(v)) for v in row] for row in problem.wavevectors]
    return rec


def problem_from_record(rec: dict) -> HelmholtzProblem:
    k = float(rec["k"])
    if rec["kind"] == "KD":
        return kd_problem(k, int(rec["order"]))
    return ud_problem(k, np.array([[float(v) for v in row] for row in rec["wavevectors"]]))


def model_record(net: NetSpec, params: NetParams, seed: int, problem: HelmholtzProblem,
                 lam) -> dict:
    return {
        "spec": {"hidden_layers": net.hidden_layers, "units": net.units,
                 "activation": net.activation.value},
        "theta": [repr(float(v)) for v in params.flatten()],
        "seed": seed,
        "lam": fmt(lam),
        "problem": problem_record(problem),
    }


def load_model(path) -> tuple[NetSpec, NetParams, HelmholtzProblem]:
    rec = json.loads(Path(path).read_text())
    s = rec["spec"]
    net = NetSpec(int(s["hidden_layers"]), int(s["units"]), Activation(s["activation"]))
    theta = np.array([float(v) for v in rec["theta"]])
    return net, NetParams.unflatten(net, theta), problem_from_record(rec["problem"])


def seed_manifest(cfg: RunConfig, rows) -> dict:
    spec = asdict(cfg.spec.resolved())
    spec.pop("seeds")
    return {
        "generator": "numpy MT19937 seeded by SeedSequence([seed, stream])",
        "streams": {"interior": STREAM_INTERIOR, "directions": STREAM_DIRECTIONS,
                    "init": STREAM_INIT},
        "base_spec": spec,
        "runs": [{"name": r.name, "solver": r.solver, "seed": r.seed, "k": r.k,
                  "layers": r.layers, "units": r.units, "n_f": r.n_f, "n_g": r.n_g,
                  "problem": r.problem, "directions": r.directions} for r in rows],
    }


def _finish(cfg: RunConfig, out: Path, rows) -> int:
    write_rows(out / "results.csv", rows)
    write_json(out / "config.json", cfg.to_dict())
    write_json(out / "seeds.json", seed_manifest(cfg, rows))
    failed = [r for r in rows if r.status != "ok"]
    for r in failed:
        log.error("%s %s seed %d: %s", r.name, r.solver, r.seed, r.status)
    return EXIT_RUN_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------- commands


def cmd_run(cfg: RunConfig, out: Path) -> int:
    records = ex.run_spec(cfg.spec, cfg.workers, with_params=True)
    rows = [r for r, _ in records]
    spec = cfg.spec.resolved()
    models = out / "models"
    for row, params in records:
        if params is None:
            continue
        models.mkdir(exist_ok=True)
        net = ex.solver_net(spec, row.solver)
        rec = model_record(net, params, row.seed, spec.make_problem(row.seed), row.lam)
        write_json(models / f"{row.name}_{row.solver}_seed{row.seed}.json", rec)
    return _finish(cfg, out, rows)


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    spec = cfg.spec
    if cfg.n_f_list or cfg.n_per_edge_list:
        rows = ex.run_data_sweep(
            spec.k, spec.layers, spec.units, spec.solver,
            cfg.n_f_list or [spec.resolved().n_f], cfg.n_per_edge_list or [spec.resolved().n_per_edge],
            cfg.reps, spec, cfg.workers, first_seed=spec.seeds[0])
    else:
        rows = ex.run_kd_sweep(spec.k, cfg.layers_list or [spec.layers],
                               cfg.units_list or [spec.units], spec.solver, spec.seeds,
                               spec, cfg.workers)
    write_table(out / "summary.csv", ex.CellSummary.columns(), ex.summarize(rows))
    return _finish(cfg, out, rows)


def cmd_compare(cfg: RunConfig, out: Path) -> int:
    spec = cfg.spec.resolved()
    rows = ex.run_pwpum_compare(spec.k, cfg.units_list or [spec.units], spec.seeds,
                                spec.n_f, spec.n_per_edge, cfg.spec, cfg.workers)
    table = ex.compare_table(rows)
    write_table(out / "compare.csv", ["units", "PWPUM", "PWPUM-WT", "PWNN", "PWPUM-OD"], table)
    write_table(out / "summary.csv", ex.CellSummary.columns(), ex.summarize(rows))
    return _finish(cfg, out, rows)


def cmd_ud(cfg: RunConfig, out: Path) -> int:
    spec = cfg.spec.resolved()
    rows = ex.run_ud_bench(spec.k, spec.directions, spec.units, cfg.reps, spec.n_f,
                           spec.n_per_edge, cfg.spec, cfg.workers, first_seed=spec.seeds[0])
    write_table(out / "ud_table.csv", ["statistic", "seed", "PWPUM", "PWPUM-WT", "PWNN", "PWPUM-OD"],
                ex.ud_table(rows))
    write_table(out / "summary.csv", ex.CellSummary.columns(), ex.summarize(rows))
    return _finish(cfg, out, rows)


def cmd_field(cfg: RunConfig, out: Path) -> int:
    """Real and imaginary parts of a trained net on the evaluation grid."""
    if cfg.model is not None:
        try:
            net, params, problem = load_model(cfg.model)
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"model: cannot load {cfg.model}: {exc}") from exc
        rows = []
    else:
        spec = cfg.spec.resolved()
        if spec.solver not in ex.NETWORK_SOLVERS:
            raise ConfigError("solver: field export needs a network solver or a model dump")
        seed = spec.seeds[0]
        problem = spec.make_problem(seed)
        art = ex.run_one(spec, seed)
        rows = [art.row]
        if art.params is None:
            return _finish(cfg, out, rows)
        net, params = art.net_spec, art.params
        write_json(out / "model.json", model_record(net, params, seed, problem, art.row.lam))
    grid = EvalGrid.on(problem.domain, cfg.spec.eval_rows, cfg.spec.eval_cols)
    re, im = field_grids(lambda x: forward(params, net, x), grid)
    write_matrix(out / "field_real.csv", re)
    write_matrix(out / "field_imag.csv", im)
    return _finish(cfg, out, rows)


def cmd_losscurve(cfg: RunConfig, out: Path) -> int:
    curves = ex.loss_curves(cfg.spec, cfg.solvers)
    write_table(out / "losscurve.csv",
                ["solver", "seed", "iteration", "loss", "normalized_loss", "grad_inf"], curves)
    write_json(out / "config.json", cfg.to_dict())
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "ud": cmd_ud,
    "field": cmd_field,
    "losscurve": cmd_losscurve,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pwnn", description="Helmholtz solver experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or "").strip().splitlines()[0] if fn.__doc__ else None)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, help="parallel worker processes")
        p.add_argument("--seed", type=int, help="run only this seed (first seed for repeated runs)")
        p.add_argument("--scale", choices=sorted(ex.SCALES), help="desk (10 repeats) or paper (50)")
        if name == "field":
            p.add_argument("--model", help="trained model dump to evaluate")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"out": args.out, "workers": args.workers, "scale": args.scale,
                 "model": getattr(args, "model", None),
                 "seeds": [args.seed] if args.seed is not None else None}
    try:
        cfg = read_config(args.config, overrides)
    except ConfigError as exc:
        print(f"pwnn: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=cfg.verbosity.upper(), format="%(levelname)s %(name)s: %(message)s")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"pwnn: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
