"""Limited-memory BFGS with a strong Wolfe line search.

Defaults follow the training protocol used throughout the experiments:
memory 50, at most 50000 iterations, stop when the gradient infinity norm
drops below 2e-16. That tolerance is rarely reachable in double precision,
so in practice runs end on the iteration cap or when the line search can
no longer make progress.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)


class Termination(str, Enum):
    GRAD_TOL = "GradTol"
    MAX_ITER = "MaxIter"
    LINE_SEARCH_FAIL = "LineSearchFail"


@dataclass
class LbfgsConfig:
    memory: int = 50
    max_iter: int = 50000
    grad_tol_inf: float = 2e-16
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_line_search_steps: int = 40

    def __post_init__(self):
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if self.max_iter < 0 or self.max_line_search_steps < 1:
            raise ValueError("iteration limits must be positive")


@dataclass
class OptTrace:
    losses: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    steps: list[float] = field(default_factory=list)
    termination: Termination | None = None
    n_evals: int = 0
    skipped_updates: int = 0

    @property
    def iterations(self) -> int:
        return len(self.steps)


def two_loop_direction(grad, s_hist, y_hist) -> np.ndarray:
    """Search direction ``-H grad`` from stored pairs (oldest first).

    The initial inverse Hessian is ``gamma I`` with
    ``gamma = s.y / y.y`` from the newest pair.
    """
    q = np.array(grad, dtype=float)
    if not s_hist:
        return -q
    rhos = [1.0 / float(np.dot(y, s)) for s, y in zip(s_hist, y_hist)]
    alphas = []
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rhos)):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    s, y = s_hist[-1], y_hist[-1]
    r = (np.dot(s, y) / np.dot(y, y)) * q
    for s, y, rho, a in zip(s_hist, y_hist, rhos, reversed(alphas)):
        b = rho * np.dot(y, r)
        r += (a - b) * s
    return -r


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic interpolating value and slope at a and b, or None."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = np.copysign(np.sqrt(disc), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return None
    x = b - (b - a) * (db + d2 - d1) / denom
    return x if np.isfinite(x) else None


class _LineSearch:
    """Bracket-and-zoom strong Wolfe search along ``p`` from ``x``."""

    def __init__(self, fun, x, f0, g0, p, cfg: LbfgsConfig):
        self.fun, self.x, self.p, self.cfg = fun, x, p, cfg
        self.f0 = f0
        self.d0 = float(np.dot(g0, p))
        self.evals = 0
        self.best = None  # (alpha, f, g) satisfying Armijo with the lowest f

    def _phi(self, alpha):
        self.evals += 1
        f, g = self.fun(self.x + alpha * self.p)
        f = float(f)
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            return np.inf, None, np.nan
        d = float(np.dot(g, self.p))
        if self._armijo(alpha, f) and (self.best is None or f < self.best[1]):
            self.best = (alpha, f, g)
        return f, g, d

    def _armijo(self, alpha, f):
        return f <= self.f0 + self.cfg.wolfe_c1 * alpha * self.d0

    def _curvature(self, d):
        return abs(d) <= -self.cfg.wolfe_c2 * self.d0

    def run(self, alpha):
        cfg = self.cfg
        a_prev, f_prev, d_prev = 0.0, self.f0, self.d0
        first = True
        while self.evals < cfg.max_line_search_steps:
            f, g, d = self._phi(alpha)
            if not np.isfinite(f):
                return self._zoom(a_prev, f_prev, d_prev, alpha, f, d)
            if not self._armijo(alpha, f) or (not first and f >= f_prev):
                return self._zoom(a_prev, f_prev, d_prev, alpha, f, d)
            if self._curvature(d):
                return alpha, f, g
            if d >= 0:
                return self._zoom(alpha, f, d, a_prev, f_prev, d_prev)
            a_prev, f_prev, d_prev = alpha, f, d
            alpha = 2.0 * alpha
            first = False
        return self._fallback()

    def _zoom(self, lo, f_lo, d_lo, hi, f_hi, d_hi):
        cfg = self.cfg
        while self.evals < cfg.max_line_search_steps:
            width = hi - lo
            trial = None
            if np.isfinite(f_hi) and np.isfinite(d_hi):
                trial = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
            lo_b, hi_b = sorted((lo + 0.1 * width, hi - 0.1 * width))
            if trial is None or not lo_b <= trial <= hi_b:
                trial = lo + 0.5 * width
            if trial == lo or trial == hi:
                break
            f, g, d = self._phi(trial)
            if not np.isfinite(f) or not self._armijo(trial, f) or f >= f_lo:
                hi, f_hi, d_hi = trial, f, d
            else:
                if self._curvature(d):
                    return trial, f, g
                if d * (hi - lo) >= 0:
                    hi, f_hi, d_hi = lo, f_lo, d_lo
                lo, f_lo, d_lo = trial, f, d
        return self._fallback()

    def _fallback(self):
        # accept the best Armijo point seen even if curvature never held
        if self.best is not None and self.best[1] < self.f0:
            return self.best
        return None


def minimize(objective: Callable[[np.ndarray], tuple[float, np.ndarray]], theta0,
             config: LbfgsConfig | None = None,
             callback: Callable[[int, np.ndarray, float], None] | None = None):
    """Minimize ``objective`` (returning loss and gradient) from ``theta0``.

    Returns the final point and an :class:`OptTrace`.
    """
    cfg = config or LbfgsConfig()
    x = np.array(theta0, dtype=float)
    f, g = objective(x)
    f = float(f)
    g = np.asarray(g, dtype=float)
    trace = OptTrace(n_evals=1)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise FloatingPointError(f"objective not finite at the starting point (loss={f})")
    trace.losses.append(f)
    trace.grad_norms.append(float(np.max(np.abs(g))) if g.size else 0.0)

    s_hist: deque = deque(maxlen=cfg.memory)
    y_hist: deque = deque(maxlen=cfg.memory)
    while True:
        gnorm = trace.grad_norms[-1]
        if gnorm < cfg.grad_tol_inf:
            trace.termination = Termination.GRAD_TOL
            break
        if trace.iterations >= cfg.max_iter:
            trace.termination = Termination.MAX_ITER
            break

        p = two_loop_direction(g, list(s_hist), list(y_hist))
        if not np.dot(p, g) < 0:
            s_hist.clear()
            y_hist.clear()
            p = -g
        alpha0 = 1.0 if s_hist else 1.0 / (1.0 + np.linalg.norm(g))

        ls = _LineSearch(objective, x, f, g, p, cfg)
        found = ls.run(alpha0)
        trace.n_evals += ls.evals
        if found is None:
            if s_hist:
                # stale curvature pairs can produce a poor direction; retry once from scratch
                s_hist.clear()
                y_hist.clear()
                continue
            trace.termination = Termination.LINE_SEARCH_FAIL
            break
        alpha, f_new, g_new = found
        s = alpha * p
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
        else:
            trace.skipped_updates += 1
        x = x + s
        f, g = float(f_new), np.asarray(g_new, dtype=float)
        trace.losses.append(f)
        trace.grad_norms.append(float(np.max(np.abs(g))))
        trace.steps.append(float(alpha))
        if callback is not None:
            callback(trace.iterations, x, f)
    log.debug("lbfgs stopped: %s after %d iterations, loss %.3e",
              trace.termination, trace.iterations, f)
    return x, trace
