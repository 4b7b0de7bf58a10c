"""Plane-wave discretization on a single rectangular element.

The discrete space is spanned by ``e^{i k_i . x}`` with ``|k_i| = k``, so
every member solves the Helmholtz equation exactly and only the impedance
condition has to be matched. Coefficients come from the Galerkin system

    sum_j beta_j  int_dOmega (d/dn + ik) e_j  conj(e_i) dS = int_dOmega g conj(e_i) dS

assembled with composite Gauss-Legendre quadrature on each edge. The
wave-tracking variant rotates the whole equiangular set by a common angle
and picks the angle with the smallest boundary misfit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .problems import HelmholtzProblem, RectDomain, boundary_g

log = logging.getLogger(__name__)

GL_ORDER = 20
DEFAULT_DENSITY = 10.0
ILL_CONDITIONED = 1e14


@dataclass(frozen=True)
class PWBasis:
    wavevectors: np.ndarray
    k: float
    strict: bool = True

    def __post_init__(self):
        kv = np.atleast_2d(np.asarray(self.wavevectors, dtype=float))
        if kv.shape[1] != 2:
            raise ValueError("wavevectors must be (n, 2)")
        if self.strict:
            norms = np.linalg.norm(kv, axis=1)
            if np.any(np.abs(norms - self.k) > 1e-12 * max(1.0, self.k)):
                raise ValueError("plane-wave basis vectors must have norm k")
        object.__setattr__(self, "wavevectors", kv)

    def __len__(self):
        return len(self.wavevectors)

    def rotated(self, alpha: float) -> np.ndarray:
        c, s = math.cos(alpha), math.sin(alpha)
        R = np.array([[c, s], [-s, c]])
        return self.wavevectors @ R.T


def uniform_basis(d1: int, k: float) -> PWBasis:
    """Equiangular directions ``k (cos 2 pi i/d1, sin 2 pi i/d1)``, i = 1..d1."""
    if d1 < 1:
        raise ValueError("basis size must be >= 1")
    ang = 2.0 * np.pi * np.arange(1, d1 + 1) / d1
    return PWBasis(k * np.column_stack([np.cos(ang), np.sin(ang)]), float(k))


@dataclass
class PWSolution:
    basis: PWBasis
    coefficients: np.ndarray
    alpha: float = 0.0

    @property
    def wavevectors(self) -> np.ndarray:
        return self.basis.rotated(self.alpha)

    def __call__(self, x):
        return evaluate(self, x)


def evaluate(solution: PWSolution, x):
    pts = np.asarray(x, dtype=float)
    vals = np.exp(1j * np.atleast_2d(pts) @ solution.wavevectors.T) @ solution.coefficients
    return complex(vals[0]) if pts.ndim == 1 else vals


@dataclass(frozen=True)
class BoundaryQuadrature:
    points: np.ndarray
    weights: np.ndarray
    normals: np.ndarray

    @classmethod
    def on(cls, domain: RectDomain, k: float, density: float = DEFAULT_DENSITY,
           order: int = GL_ORDER) -> "BoundaryQuadrature":
        if density < 1:
            raise ValueError("quadrature density must be at least 1 point per wavelength")
        wavelength = 2.0 * np.pi / k
        xg, wg = np.polynomial.legendre.leggauss(order)
        pts, wts, nrm = [], [], []
        for start, end, normal in domain.edges():
            length = float(np.linalg.norm(end - start))
            panels = max(1, math.ceil(density * length / wavelength / order))
            cuts = np.linspace(0.0, 1.0, panels + 1)
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                t = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
                pts.append(start + t[:, None] * (end - start))
                wts.append(0.5 * (hi - lo) * length * wg)
                nrm.append(np.broadcast_to(normal, (order, 2)))
        return cls(np.concatenate(pts), np.concatenate(wts), np.concatenate(nrm))


@dataclass
class AssembledSystem:
    M: np.ndarray
    G: np.ndarray
    condition_estimate: float


def _trial_traces(wavevectors, k, quad: BoundaryQuadrature):
    """Values ``e_j`` and impedance traces ``(d/dn + ik) e_j`` at the quadrature nodes."""
    E = np.exp(1j * quad.points @ wavevectors.T)
    B = (1j * (quad.normals @ wavevectors.T) + 1j * k) * E
    return E, B


def _assemble(wavevectors, k, quad: BoundaryQuadrature, g_nodes) -> AssembledSystem:
    E, B = _trial_traces(wavevectors, k, quad)
    Ew = np.conj(E) * quad.weights[:, None]
    M = Ew.T @ B
    G = Ew.T @ g_nodes
    with np.errstate(all="ignore"):
        cond = float(np.abs(np.linalg.cond(M, 1)))
    return AssembledSystem(M, G, cond if np.isfinite(cond) else math.inf)


def assemble(basis: PWBasis, problem: HelmholtzProblem,
             quad_points_per_wavelength: float = DEFAULT_DENSITY,
             alpha: float = 0.0) -> AssembledSystem:
    """Row ``i`` tests against ``e_i``; column ``j`` is the trial function ``e_j``."""
    quad = BoundaryQuadrature.on(problem.domain, problem.k, quad_points_per_wavelength)
    g_nodes = boundary_g(problem, quad.points, quad.normals)
    return _assemble(basis.rotated(alpha), problem.k, quad, g_nodes)


@dataclass
class LinearSolve:
    beta: np.ndarray
    residual_norm: float
    ill_conditioned: bool


def solve(system: AssembledSystem, regularization: float | None = None) -> LinearSolve:
    """Minimize ``||M beta - G||^2 + reg ||beta||^2`` through the SVD of ``M``.

    ``reg`` defaults to ``(1e-12 ||M||_2)^2``, i.e. singular values below
    ``1e-12 ||M||`` are damped. Ill-conditioning is logged, not raised.
    """
    M, G = system.M, system.G
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("system matrix must be square")
    U, sv, Vh = np.linalg.svd(M)
    if regularization is None:
        regularization = (1e-12 * sv[0]) ** 2
    filt = sv / (sv * sv + regularization)
    beta = Vh.conj().T @ (filt * (U.conj().T @ G))
    bad = not system.condition_estimate <= ILL_CONDITIONED
    if bad:
        log.warning("plane-wave system is ill-conditioned (cond ~ %.2e)", system.condition_estimate)
    return LinearSolve(beta, float(np.linalg.norm(M @ beta - G)), bad)


def solve_pwpum(problem: HelmholtzProblem, basis: PWBasis,
                density: float = DEFAULT_DENSITY, regularization: float | None = None):
    system = assemble(basis, problem, density)
    lin = solve(system, regularization)
    return PWSolution(basis, lin.beta), system, lin


class _Misfit:
    """Boundary misfit of the Galerkin solution as a function of the rotation angle."""

    def __init__(self, problem, basis, density, regularization):
        self.basis, self.k, self.reg = basis, problem.k, regularization
        self.quad = BoundaryQuadrature.on(problem.domain, problem.k, density)
        self.g = boundary_g(problem, self.quad.points, self.quad.normals)

    def solve(self, alpha):
        kv = self.basis.rotated(alpha)
        system = _assemble(kv, self.k, self.quad, self.g)
        lin = solve(system, self.reg)
        _, B = _trial_traces(kv, self.k, self.quad)
        r = B @ lin.beta - self.g
        return float(np.sum(self.quad.weights * np.abs(r) ** 2)), system, lin

    def __call__(self, alpha):
        return self.solve(alpha)[0]


def golden_section(f, lo, hi, tol):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def solve_wt(problem: HelmholtzProblem, d1: int, density: float = DEFAULT_DENSITY,
             alpha_grid: int = 32, refine_tol: float = 1e-8,
             regularization: float | None = None) -> PWSolution:
    """Wave tracking: common rotation of the equiangular basis chosen by boundary misfit.

    The equiangular set repeats with period ``2 pi / d1``, so only that
    window is scanned (``alpha_grid`` samples) before golden-section
    refinement around the best sample.
    """
    if alpha_grid < 8:
        raise ValueError("alpha_grid must be >= 8")
    basis = uniform_basis(d1, problem.k)
    misfit = _Misfit(problem, basis, density, regularization)
    period = 2.0 * np.pi / d1
    alphas = np.arange(alpha_grid) * period / alpha_grid
    vals = np.array([misfit(a) for a in alphas])
    best = int(np.argmin(vals))
    h = period / alpha_grid
    a_ref, f_ref = golden_section(misfit, alphas[best] - h, alphas[best] + h, refine_tol)
    alpha = a_ref if f_ref < vals[best] else float(alphas[best])
    alpha = float(np.mod(alpha, period))
    if period - alpha < refine_tol:  # wrapped from just below 0: same basis, exact copy
        alpha = 0.0
    _, _, lin = misfit.solve(alpha)
    return PWSolution(basis, lin.beta, alpha)


def boundary_misfit(solution: PWSolution, problem: HelmholtzProblem,
                    density: float = DEFAULT_DENSITY) -> float:
    """``int_dOmega |du/dn + iku - g|^2 dS`` for a plane-wave solution."""
    quad = BoundaryQuadrature.on(problem.domain, problem.k, density)
    g = boundary_g(problem, quad.points, quad.normals)
    _, B = _trial_traces(solution.wavevectors, problem.k, quad)
    r = B @ solution.coefficients - g
    return float(np.sum(quad.weights * np.abs(r) ** 2))


def rebase_from_network(params, k: float) -> PWBasis:
    """Learned first-layer directions of a one-hidden-layer plane-wave net, rescaled to norm k."""
    if len(params.weights) != 1:
        raise ValueError("rebasing needs a one-hidden-layer network")
    W = np.asarray(params.weights[0], dtype=float)
    norms = np.linalg.norm(W, axis=1)
    if np.any(norms < 1e-10):
        raise ValueError("cannot rebase a direction with (near) zero norm")
    return PWBasis(k * W / norms[:, None], float(k))


def network_as_plane_waves(params) -> PWSolution:
    """Exact plane-wave form of a one-hidden-layer ``e^{iz}`` net.

    Biases fold into the coefficients (``s_i e^{i b_i}``); the output bias is
    a zero-wavevector term. The wavevectors keep their learned norms.
    """
    if len(params.weights) != 1:
        raise ValueError("only one-hidden-layer networks have a plane-wave form")
    W, b = params.weights[0], params.biases[0]
    kv = np.vstack([W, [0.0, 0.0]])
    coef = np.concatenate([params.out_weight * np.exp(1j * b), [params.out_bias]])
    k = float(np.max(np.linalg.norm(W, axis=1)))
    return PWSolution(PWBasis(kv, k, strict=False), coef)
