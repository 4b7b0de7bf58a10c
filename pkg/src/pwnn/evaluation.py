"""Error metrics, direction recovery and field extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .problems import HelmholtzProblem, RectDomain, exact_value


@dataclass(frozen=True)
class EvalGrid:
    """Cell-centre grid, row-major: row ``i`` runs along x at the i-th y level."""

    rows: int
    cols: int
    points: np.ndarray

    @classmethod
    def on(cls, domain: RectDomain, rows: int = 100, cols: int = 100) -> "EvalGrid":
        xs = domain.x_min + (np.arange(cols) + 0.5) * (domain.x_max - domain.x_min) / cols
        ys = domain.y_min + (np.arange(rows) + 0.5) * (domain.y_max - domain.y_min) / rows
        X, Y = np.meshgrid(xs, ys)
        return cls(rows, cols, np.column_stack([X.ravel(), Y.ravel()]))


@dataclass
class EvalReport:
    epsilon: float
    accuracy: float
    exact_modulus: np.ndarray
    approx_modulus: np.ndarray
    complex_error: float  # not the headline metric, see complex_relative_l2
    fields: tuple[np.ndarray, np.ndarray] | None = None
    directions: "DirectionReport | None" = None


def relative_modulus_l2(u_h, problem: HelmholtzProblem, grid: EvalGrid) -> float:
    """``|| |u*| - |u_h| ||_2 / || |u*| ||_2`` over the grid.

    Only moduli are compared, so the metric cannot see a global phase.
    """
    ue = np.abs(exact_value(problem, grid.points))
    denom = np.linalg.norm(ue)
    if denom == 0:
        raise ValueError("exact solution vanishes on the grid")
    uh = np.abs(np.asarray(u_h(grid.points)))
    return float(np.linalg.norm(ue - uh) / denom)


def complex_relative_l2(u_h, problem: HelmholtzProblem, grid: EvalGrid) -> float:
    """Diagnostic ``||u* - u_h||_2 / ||u*||_2``; phase-sensitive, unlike the headline metric."""
    ue = exact_value(problem, grid.points)
    uh = np.asarray(u_h(grid.points))
    return float(np.linalg.norm(ue - uh) / np.linalg.norm(ue))


def accuracy(eps: float) -> float:
    """``-log10(eps)``; ``inf`` for a zero error."""
    if eps < 0:
        raise ValueError("error must be nonnegative")
    if eps == 0:
        return math.inf
    return -math.log10(eps)


def evaluate_solution(u_h, problem: HelmholtzProblem, grid: EvalGrid,
                      with_fields: bool = False) -> EvalReport:
    ue = exact_value(problem, grid.points)
    uh = np.asarray(u_h(grid.points))
    eps = float(np.linalg.norm(np.abs(ue) - np.abs(uh)) / np.linalg.norm(np.abs(ue)))
    fields = None
    if with_fields:
        fields = (uh.real.reshape(grid.rows, grid.cols), uh.imag.reshape(grid.rows, grid.cols))
    return EvalReport(
        epsilon=eps,
        accuracy=accuracy(eps),
        exact_modulus=np.abs(ue),
        approx_modulus=np.abs(uh),
        complex_error=float(np.linalg.norm(ue - uh) / np.linalg.norm(ue)),
        fields=fields,
    )


def field_grids(u, grid: EvalGrid) -> tuple[np.ndarray, np.ndarray]:
    vals = np.asarray(u(grid.points), dtype=complex).reshape(grid.rows, grid.cols)
    return vals.real.copy(), vals.imag.copy()


@dataclass
class DirectionReport:
    pairs: list[tuple[int, int]]  # (true index, learned index)
    errors_deg: np.ndarray
    mean_deg: float
    max_deg: float
    unmatched_learned: list[int] = field(default_factory=list)
    unmatched_true: list[int] = field(default_factory=list)
    amplitudes: np.ndarray = field(default_factory=lambda: np.empty(0))  # |w_i| / k


def _angle_gap(a, b):
    d = np.abs(np.angle(np.exp(1j * (a - b))))
    return np.degrees(d)


def direction_report(learned, true_wavevectors, k: float | None = None) -> DirectionReport:
    """Match learned plane-wave directions against the true ones.

    ``learned`` is an ``(n, 2)`` array of wavevectors or anything with a
    ``wavevectors`` attribute. Matching is greedy: the closest unmatched
    (true, learned) pair by angle is fixed first, repeatedly.
    """
    vecs = np.atleast_2d(np.asarray(getattr(learned, "wavevectors", learned), dtype=float))
    true = np.atleast_2d(np.asarray(true_wavevectors, dtype=float))
    if len(vecs) == 0 or len(true) == 0:
        raise ValueError("direction lists must be nonempty")
    if k is None:
        k = float(np.linalg.norm(true[0]))
    th_l = np.arctan2(vecs[:, 1], vecs[:, 0])
    th_t = np.arctan2(true[:, 1], true[:, 0])
    gap = _angle_gap(th_t[:, None], th_l[None, :])

    pairs = []
    free_t, free_l = set(range(len(true))), set(range(len(vecs)))
    order = np.dstack(np.unravel_index(np.argsort(gap, axis=None, kind="stable"), gap.shape))[0]
    for i, j in order:
        if i in free_t and j in free_l:
            pairs.append((int(i), int(j)))
            free_t.discard(i)
            free_l.discard(j)
            if not free_t or not free_l:
                break
    pairs.sort()
    errs = np.array([gap[i, j] for i, j in pairs])
    return DirectionReport(
        pairs=pairs,
        errors_deg=errs,
        mean_deg=float(errs.mean()),
        max_deg=float(errs.max()),
        unmatched_learned=sorted(free_l),
        unmatched_true=sorted(free_t),
        amplitudes=np.linalg.norm(vecs, axis=1) / k,
    )
