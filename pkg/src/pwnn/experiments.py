"""Declarative experiment descriptions and their execution.

One :class:`ExperimentSpec` plus one seed determines a run completely: the
seed drives interior sampling, network initialization and (for UD problems)
the random exact-solution directions. Every run yields one
:class:`ResultRow`; sweeps are lists of runs executed in a fixed order
(optionally in worker processes) and returned sorted by their key.
"""

from __future__ import annotations

import logging
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import pwpum
from .evaluation import EvalGrid, direction_report, evaluate_solution
from .lbfgs import LbfgsConfig, OptTrace, minimize
from .network import (
    ACTIVATION_OF,
    NetParams,
    NetSpec,
    Objective,
    auto_lambda,
    forward,
    init_params,
)
from .problems import (
    KD_DOMAIN,
    UD_DOMAIN,
    HelmholtzProblem,
    kd_problem,
    random_directions,
    sample,
    ud_problem,
)

log = logging.getLogger(__name__)

NETWORK_SOLVERS = ("TANN", "SIREN", "PWNN")
PW_SOLVERS = ("PWPUM", "PWPUM-WT", "PWPUM-OD")
SOLVERS = NETWORK_SOLVERS + PW_SOLVERS

SCALES = {"desk": 10, "paper": 50}


@dataclass
class ExperimentSpec:
    name: str = "run"
    problem: str = "KD"
    k: float = 5.0
    order: int = 1
    directions: int = 10
    solver: str = "PWNN"
    layers: int = 1
    units: int = 20
    n_f: int | None = None
    n_per_edge: int | None = None
    lam: float | str = "auto"
    optimizer: dict = field(default_factory=dict)
    seeds: list[int] = field(default_factory=lambda: [0])
    quad_density: float = pwpum.DEFAULT_DENSITY
    alpha_grid: int = 32
    eval_rows: int = 100
    eval_cols: int = 100

    def __post_init__(self):
        self.problem = self.problem.upper()
        if self.problem not in ("KD", "UD"):
            raise ValueError(f"problem must be KD or UD, got {self.problem!r}")
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}; expected one of {SOLVERS}")
        if not self.k > 0:
            raise ValueError("k must be positive")
        if isinstance(self.lam, str) and self.lam != "auto":
            raise ValueError("lam must be a positive number or 'auto'")
        if not isinstance(self.lam, str) and not self.lam > 0:
            raise ValueError("lam must be positive")
        LbfgsConfig(**self.optimizer)  # fail fast on bad optimizer keys
        self.seeds = [int(s) for s in self.seeds]

    def resolved(self) -> "ExperimentSpec":
        """Copy with sampling defaults filled in: N_f = 5k^2, 5k points per edge (KD).

        UD problems default to N_f = 500 and 50 points per edge.
        """
        n_f, npe = self.n_f, self.n_per_edge
        if self.problem == "KD":
            n_f = 5 * int(round(self.k)) ** 2 if n_f is None else n_f
            npe = 5 * int(round(self.k)) if npe is None else npe
        else:
            n_f = 500 if n_f is None else n_f
            npe = 50 if npe is None else npe
        return replace(self, n_f=int(n_f), n_per_edge=int(npe),
                       optimizer=asdict(LbfgsConfig(**self.optimizer)))

    def make_problem(self, seed: int) -> HelmholtzProblem:
        if self.problem == "KD":
            return kd_problem(self.k, self.order, KD_DOMAIN)
        return ud_problem(self.k, random_directions(self.directions, self.k, seed), UD_DOMAIN)

    def net_spec(self) -> NetSpec:
        return solver_net(self, self.solver)


@dataclass
class ResultRow:
    name: str
    problem: str
    k: float
    order: int | str
    directions: int | str
    solver: str
    layers: int | str
    units: int
    n_f: int
    n_g: int
    seed: int
    lam: float | str
    epsilon: float
    accuracy: float
    complex_error: float
    iterations: int | str
    termination: str
    final_loss: float | str
    condition: float | str
    alpha: float | str
    dir_mean_deg: float | str
    dir_max_deg: float | str
    status: str
    wall_time: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @property
    def key(self):
        return (self.name, self.problem, self.k, self.solver, str(self.layers), self.units,
                self.n_f, self.n_g, self.seed)


TIMING_COLUMNS = ("wall_time",)


@dataclass
class RunArtifacts:
    row: ResultRow
    params: NetParams | None = None
    net_spec: NetSpec | None = None
    trace: OptTrace | None = None
    solution: object = None
    problem: HelmholtzProblem | None = None


def train_network(spec: ExperimentSpec, seed: int, problem: HelmholtzProblem,
                  net: NetSpec | None = None):
    """Sample, initialize and run L-BFGS on one network; returns (params, trace, lam)."""
    net = net or spec.net_spec()
    samples = sample(problem, spec.n_f, spec.n_per_edge, seed)
    p0 = init_params(net, seed, problem.k)
    lam = auto_lambda(p0, net, samples, problem) if spec.lam == "auto" else float(spec.lam)
    objective = Objective(net, samples, problem, lam)
    theta, trace = minimize(objective, p0.flatten(), LbfgsConfig(**spec.optimizer))
    return NetParams.unflatten(net, theta), trace, lam


def solver_net(spec: ExperimentSpec, solver: str) -> NetSpec:
    """Network trained by ``solver``; PWPUM-OD rebases a plane-wave net."""
    return NetSpec(spec.layers, spec.units, ACTIVATION_OF["PWNN" if solver == "PWPUM-OD" else solver])


def _blank_row(spec: ExperimentSpec, seed: int, solver: str) -> dict:
    pw = solver in PW_SOLVERS
    return dict(
        name=spec.name, problem=spec.problem, k=float(spec.k),
        order=spec.order if spec.problem == "KD" else "",
        directions=spec.directions if spec.problem == "UD" else "",
        solver=solver, layers="" if solver in ("PWPUM", "PWPUM-WT") else spec.layers,
        units=spec.units, n_f=spec.n_f if not pw or solver == "PWPUM-OD" else 0,
        n_g=4 * spec.n_per_edge if not pw or solver == "PWPUM-OD" else 0,
        seed=int(seed), lam="", epsilon=math.nan, accuracy=math.nan, complex_error=math.nan,
        iterations="", termination="", final_loss="", condition="", alpha="",
        dir_mean_deg="", dir_max_deg="", status="ok", wall_time=0.0,
    )


def _score(values: dict, u_h, problem, grid, with_fields=False):
    report = evaluate_solution(u_h, problem, grid, with_fields)
    values.update(epsilon=report.epsilon, accuracy=report.accuracy,
                  complex_error=report.complex_error)
    return report


def _directions(values: dict, wavevectors, problem: HelmholtzProblem):
    if problem.kind != "UD":
        return None
    rep = direction_report(wavevectors, problem.wavevectors, problem.k)
    values.update(dir_mean_deg=rep.mean_deg, dir_max_deg=rep.max_deg)
    return rep


def run_one(spec: ExperimentSpec, seed: int, solver: str | None = None,
            network: tuple | None = None) -> RunArtifacts:
    """Execute one (spec, seed) run.

    ``network`` may carry an already trained ``(params, trace, lam)`` so a
    PWPUM-OD row can reuse a PWNN run instead of retraining.
    """
    spec = spec.resolved()
    solver = solver or spec.solver
    values = _blank_row(spec, seed, solver)
    problem = spec.make_problem(seed)
    grid = EvalGrid.on(problem.domain, spec.eval_rows, spec.eval_cols)
    art = RunArtifacts(row=None, problem=problem)
    t0 = time.perf_counter()
    try:
        if solver in NETWORK_SOLVERS or solver == "PWPUM-OD":
            net = solver_net(spec, solver)
            params, trace, lam = network or train_network(spec, seed, problem, net)
            art.params, art.net_spec, art.trace = params, net, trace
            values.update(lam=lam, iterations=trace.iterations,
                          termination=trace.termination.value, final_loss=trace.losses[-1])
            if solver == "PWPUM-OD":
                basis = pwpum.rebase_from_network(params, problem.k)
                sol, system, _ = pwpum.solve_pwpum(problem, basis, spec.quad_density)
                values.update(condition=system.condition_estimate)
                art.solution = sol
                _directions(values, basis.wavevectors, problem)
            else:
                art.solution = lambda x, p=params, n=net: forward(p, n, x)
                if net.hidden_layers == 1 and solver == "PWNN":
                    _directions(values, params.weights[0], problem)
        elif solver == "PWPUM":
            sol, system, _ = pwpum.solve_pwpum(problem, pwpum.uniform_basis(spec.units, problem.k),
                                               spec.quad_density)
            values.update(condition=system.condition_estimate, alpha=0.0)
            art.solution = sol
        else:
            sol = pwpum.solve_wt(problem, spec.units, spec.quad_density, spec.alpha_grid)
            system = pwpum.assemble(sol.basis, problem, spec.quad_density, sol.alpha)
            values.update(condition=system.condition_estimate, alpha=sol.alpha)
            art.solution = sol
        _score(values, art.solution, problem, grid)
    except Exception as exc:  # a failed run is recorded, the sweep goes on
        log.exception("run %s/%s seed %d failed", spec.name, solver, seed)
        values.update(status=f"error: {type(exc).__name__}: {exc}")
    values["wall_time"] = time.perf_counter() - t0
    art.row = ResultRow(**values)
    return art


# ---------------------------------------------------------------- execution


def _task(args):
    spec_dict, seed, solver = args
    art = run_one(ExperimentSpec(**spec_dict), seed, solver)
    return art.row, art.params


def _compare_task(args):
    spec_dict, seed = args
    spec = ExperimentSpec(**spec_dict)
    net = run_one(spec, seed, "PWNN")
    out = [(net.row, net.params)]
    if net.params is not None:
        od = run_one(spec, seed, "PWPUM-OD", network=(net.params, net.trace, net.row.lam))
        out.append((od.row, net.params))
    return out


def execute(tasks, fn=_task, workers: int = 1) -> list:
    """Map ``fn`` over ``tasks`` serially or in a process pool; output order follows input."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _sort_key(row: ResultRow):
    return tuple(str(x) for x in row.key)


def _sorted(records, with_params: bool = False):
    """Sort (row, params) records by row key; keep params only when asked."""
    records = sorted(records, key=lambda rec: _sort_key(rec[0]))
    return records if with_params else [rec[0] for rec in records]


def run_spec(spec: ExperimentSpec, workers: int = 1, with_params: bool = False):
    """All seeds of one spec; PWPUM-OD rows train their PWNN on the way.

    With ``with_params`` the result is a list of ``(row, params)`` pairs,
    ``params`` being ``None`` for rows without a network.
    """
    d = asdict(spec)
    return _sorted(execute([(d, s, spec.solver) for s in spec.seeds], _task, workers), with_params)


def run_kd_sweep(k: float, layers_list, units_list, solver: str, seeds,
                 base: ExperimentSpec | None = None, workers: int = 1) -> list[ResultRow]:
    """Architecture sweep on the KD problem with N_g = 5k x 4, N_f = 5k^2 by default."""
    base = base or ExperimentSpec()
    tasks = []
    for layers in layers_list:
        for units in units_list:
            spec = replace(base, name=base.name, problem="KD", k=k, solver=solver,
                           layers=int(layers), units=int(units), seeds=list(seeds))
            d = asdict(spec)
            tasks += [(d, s, solver) for s in seeds]
    return _sorted(execute(tasks, _task, workers))


def run_data_sweep(k: float, layers: int, units: int, solver: str, n_f_list, n_per_edge_list,
                   repetitions: int = SCALES["desk"], base: ExperimentSpec | None = None,
                   workers: int = 1, first_seed: int = 0) -> list[ResultRow]:
    """Sample-count sweep; every cell is repeated over ``repetitions`` seeds."""
    base = base or ExperimentSpec()
    seeds = list(range(first_seed, first_seed + repetitions))
    tasks = []
    for npe in n_per_edge_list:
        for n_f in n_f_list:
            spec = replace(base, problem="KD", k=k, solver=solver, layers=layers, units=units,
                           n_f=int(n_f), n_per_edge=int(npe), seeds=seeds)
            d = asdict(spec)
            tasks += [(d, s, solver) for s in seeds]
    return _sorted(execute(tasks, _task, workers))


def run_pwpum_compare(k: float, units_list, seeds, n_f: int = 500, n_per_edge: int | None = None,
                      base: ExperimentSpec | None = None, workers: int = 1) -> list[ResultRow]:
    """PWPUM, PWPUM-WT, PWNN and PWPUM-OD on the KD problem for each basis size.

    Defaults follow the comparison setting: 50 points per edge for k=10 and
    500 for k=100 (scaled as 5k per edge otherwise), with N_f = 500.
    """
    base = base or ExperimentSpec()
    npe = n_per_edge if n_per_edge is not None else 5 * int(round(k))
    deterministic, stochastic = [], []
    for units in units_list:
        spec = replace(base, problem="KD", k=k, layers=1, units=int(units), n_f=n_f,
                       n_per_edge=npe, seeds=list(seeds))
        d = asdict(spec)
        deterministic += [(d, 0, "PWPUM"), (d, 0, "PWPUM-WT")]
        stochastic += [(d, s) for s in seeds]
    records = execute(deterministic, _task, workers)
    for group in execute(stochastic, _compare_task, workers):
        records += group
    return _sorted(records)


def run_ud_bench(k: float, d: int, units: int, trials: int = SCALES["desk"],
                 n_f: int = 500, n_per_edge: int = 50, base: ExperimentSpec | None = None,
                 workers: int = 1, first_seed: int = 0) -> list[ResultRow]:
    """Random-direction benchmark: one exact solution per trial seed, all four methods."""
    base = base or ExperimentSpec()
    seeds = list(range(first_seed, first_seed + trials))
    spec = replace(base, problem="UD", k=k, directions=d, layers=1, units=units, n_f=n_f,
                   n_per_edge=n_per_edge, seeds=seeds)
    dd = asdict(spec)
    records = execute([(dd, s, m) for s in seeds for m in ("PWPUM", "PWPUM-WT")], _task, workers)
    for group in execute([(dd, s) for s in seeds], _compare_task, workers):
        records += group
    return _sorted(records)


# ---------------------------------------------------------------- summaries


def cell_key(row: ResultRow):
    return (row.name, row.problem, row.k, row.directions, row.solver, str(row.layers),
            row.units, row.n_f, row.n_g)


@dataclass
class CellSummary:
    name: str
    problem: str
    k: float
    directions: int | str
    solver: str
    layers: int | str
    units: int
    n_f: int
    n_g: int
    runs: int
    failed: int
    median: float
    mean: float
    std: float
    best: float
    worst: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def summarize(rows: list[ResultRow]) -> list[CellSummary]:
    """Median, mean, population std, best and worst epsilon per configuration."""
    cells: dict = {}
    for r in rows:
        cells.setdefault(cell_key(r), []).append(r)
    out = []
    for key in sorted(cells, key=lambda t: tuple(str(x) for x in t)):
        group = cells[key]
        eps = [r.epsilon for r in group if r.status == "ok" and math.isfinite(r.epsilon)]
        r0 = group[0]
        stats = (statistics.median(eps), statistics.fmean(eps), statistics.pstdev(eps),
                 min(eps), max(eps)) if eps else (math.nan,) * 5
        out.append(CellSummary(r0.name, r0.problem, r0.k, r0.directions, r0.solver, r0.layers,
                               r0.units, r0.n_f, r0.n_g, len(group), len(group) - len(eps), *stats))
    return out


def compare_table(rows: list[ResultRow], stat: str = "median") -> list[dict]:
    """Pivot to one line per Units with a column per method (median over seeds)."""
    methods = ("PWPUM", "PWPUM-WT", "PWNN", "PWPUM-OD")
    table: dict = {}
    for s in summarize(rows):
        table.setdefault(s.units, {})[s.solver] = getattr(s, stat)
    return [{"units": u, **{m: table[u].get(m, math.nan) for m in methods}} for u in sorted(table)]


def ud_table(rows: list[ResultRow]) -> list[dict]:
    """Average over trials, plus the trials where PWNN did worst and best."""
    methods = ("PWPUM", "PWPUM-WT", "PWNN", "PWPUM-OD")
    by_seed: dict = {}
    for r in rows:
        by_seed.setdefault(r.seed, {})[r.solver] = r.epsilon
    seeds = sorted(s for s in by_seed if math.isfinite(by_seed[s].get("PWNN", math.nan)))
    out = [{"statistic": "average",
            **{m: float(np.mean([by_seed[s].get(m, math.nan) for s in by_seed])) for m in methods}}]
    if seeds:
        worst = max(seeds, key=lambda s: by_seed[s]["PWNN"])
        best = min(seeds, key=lambda s: by_seed[s]["PWNN"])
        for label, s in (("max_pwnn", worst), ("min_pwnn", best)):
            out.append({"statistic": label, "seed": s,
                        **{m: by_seed[s].get(m, math.nan) for m in methods}})
    return out


def loss_curves(spec: ExperimentSpec, solvers=NETWORK_SOLVERS, seed: int | None = None):
    """Training loss histories; ``normalized`` rescales every curve to start at 1."""
    spec = spec.resolved()
    seed = spec.seeds[0] if seed is None else seed
    curves = []
    for solver in solvers:
        problem = spec.make_problem(seed)
        _, trace, _ = train_network(spec, seed, problem, solver_net(spec, solver))
        l0 = trace.losses[0]
        for i, (loss, gn) in enumerate(zip(trace.losses, trace.grad_norms)):
            curves.append({"solver": solver, "seed": seed, "iteration": i, "loss": loss,
                           "normalized_loss": loss / l0, "grad_inf": gn})
    return curves
