"""Helmholtz boundary value problems on rectangles with known exact solutions.

Two families are provided:

* ``KD``: a circular wave ``J_n(k r) e^{i n theta}`` centred at the origin,
  which superposes plane waves from every direction.
* ``UD``: a finite sum of unit-amplitude plane waves ``sum_i e^{i k_i . x}``
  with ``|k_i| = k``.

Boundary data is the impedance trace ``g = du/dn + i k u`` of the exact
solution. All point arguments are ``(..., 2)`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .specfun import bessel_j_scaled

OUTSIDE_TOL = 1e-9

# stream ids keep sampling, directions and initialization independent
STREAM_INTERIOR = 1
STREAM_DIRECTIONS = 2
STREAM_INIT = 3


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Seeded Mersenne Twister generator (MT19937) for one named stream."""
    return np.random.Generator(np.random.MT19937(np.random.SeedSequence([int(seed), int(stream)])))


@dataclass(frozen=True)
class RectDomain:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.x_max - self.x_min, self.y_max - self.y_min))

    def edges(self):
        """(start, end, outward normal) per edge, counter-clockwise from the bottom."""
        a, b, c, d = self.x_min, self.x_max, self.y_min, self.y_max
        return [
            (np.array([a, c]), np.array([b, c]), np.array([0.0, -1.0])),
            (np.array([b, c]), np.array([b, d]), np.array([1.0, 0.0])),
            (np.array([b, d]), np.array([a, d]), np.array([0.0, 1.0])),
            (np.array([a, d]), np.array([a, c]), np.array([-1.0, 0.0])),
        ]

    def contains(self, pts, tol: float = OUTSIDE_TOL) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        return (
            (x >= self.x_min - tol) & (x <= self.x_max + tol)
            & (y >= self.y_min - tol) & (y <= self.y_max + tol)
        )


KD_DOMAIN = RectDomain(0.0, 1.0, -0.5, 0.5)
UD_DOMAIN = RectDomain(-1.0, 1.0, -1.0, 1.0)


@dataclass(frozen=True)
class HelmholtzProblem:
    domain: RectDomain
    k: float
    order: int | None = None
    wavevectors: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"wavenumber must be positive, got {self.k}")
        if (self.order is None) == (self.wavevectors is None):
            raise ValueError("give exactly one of order (KD) or wavevectors (UD)")
        if self.wavevectors is not None:
            kv = np.atleast_2d(np.asarray(self.wavevectors, dtype=float))
            norms = np.linalg.norm(kv, axis=1)
            if np.any(np.abs(norms - self.k) > 1e-12 * max(1.0, self.k)):
                raise ValueError("every UD wavevector must have norm k")
            object.__setattr__(self, "wavevectors", kv)

    @property
    def kind(self) -> str:
        return "KD" if self.order is not None else "UD"


def kd_problem(k: float, order: int = 1, domain: RectDomain = KD_DOMAIN) -> HelmholtzProblem:
    return HelmholtzProblem(domain, float(k), order=int(order))


def ud_problem(k: float, wavevectors, domain: RectDomain = UD_DOMAIN) -> HelmholtzProblem:
    return HelmholtzProblem(domain, float(k), wavevectors=np.asarray(wavevectors, dtype=float))


def random_directions(d: int, k: float, seed: int) -> np.ndarray:
    """``d`` wavevectors of norm ``k`` with i.i.d. uniform angles in [0, 2pi)."""
    if d < 1:
        raise ValueError("need at least one direction")
    phi = make_rng(seed, STREAM_DIRECTIONS).uniform(0.0, 2.0 * np.pi, size=d)
    return k * np.stack([np.cos(phi), np.sin(phi)], axis=1)


def _points(problem: HelmholtzProblem, x) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.shape[-1] != 2:
        raise ValueError("points must have a trailing dimension of 2")
    if not np.all(problem.domain.contains(pts)):
        raise ValueError("point(s) outside the problem domain")
    return pts


def exact_value(problem: HelmholtzProblem, x):
    pts = _points(problem, x)
    k = problem.k
    if problem.kind == "UD":
        return np.exp(1j * pts @ problem.wavevectors.T).sum(axis=-1)
    n = problem.order
    z = (pts[..., 0] + 1j * pts[..., 1])
    r = np.abs(z)
    # J_n(kr) e^{in theta} = k^n [J_n(kr)/(kr)^n] (x + iy)^n
    return k**n * bessel_j_scaled(n, k * r) * z**n


def exact_gradient(problem: HelmholtzProblem, x):
    """Cartesian gradient ``(du/dx, du/dy)`` stacked on the last axis."""
    pts = _points(problem, x)
    k = problem.k
    if problem.kind == "UD":
        phase = np.exp(1j * pts @ problem.wavevectors.T)
        return 1j * phase @ problem.wavevectors.astype(complex)
    n = problem.order
    z = pts[..., 0] + 1j * pts[..., 1]
    kr = k * np.abs(z)
    # d/dr [J_n(kr)/(kr)^n] = -k J_{n+1}(kr)/(kr)^n, folded so nothing divides by r
    radial = -(k ** (n + 2)) * bessel_j_scaled(n + 1, kr) * z**n
    grad = radial[..., None] * pts.astype(complex)
    if n > 0:
        angular = n * k**n * bessel_j_scaled(n, kr) * z ** (n - 1)
        grad = grad + angular[..., None] * np.array([1.0, 1j])
    return grad


def boundary_g(problem: HelmholtzProblem, x, normal):
    """Impedance data ``du*/dn + i k u*`` at boundary points."""
    normal = np.asarray(normal, dtype=float)
    grad = exact_gradient(problem, x)
    return (grad * normal).sum(axis=-1) + 1j * problem.k * exact_value(problem, x)


@dataclass(frozen=True)
class SampleSet:
    interior: np.ndarray
    boundary: np.ndarray
    normals: np.ndarray
    seed: int

    @property
    def n_f(self) -> int:
        return len(self.interior)

    @property
    def n_g(self) -> int:
        return len(self.boundary)


def boundary_points(domain: RectDomain, n_per_edge: int):
    """Equispaced points with a half-cell offset on each edge, plus normals."""
    if n_per_edge < 1:
        raise ValueError("n_per_edge must be >= 1")
    t = (np.arange(n_per_edge) + 0.5) / n_per_edge
    pts, nrm = [], []
    for start, end, normal in domain.edges():
        pts.append(start + t[:, None] * (end - start))
        nrm.append(np.broadcast_to(normal, (n_per_edge, 2)))
    return np.concatenate(pts), np.concatenate(nrm).copy()


def sample(problem: HelmholtzProblem, n_f: int, n_per_edge: int, seed: int) -> SampleSet:
    if n_f < 0:
        raise ValueError("n_f must be >= 0")
    dom = problem.domain
    rng = make_rng(seed, STREAM_INTERIOR)
    pts = np.empty((0, 2))
    while len(pts) < n_f:
        cand = np.column_stack([
            rng.uniform(dom.x_min, dom.x_max, size=n_f - len(pts)),
            rng.uniform(dom.y_min, dom.y_max, size=n_f - len(pts)),
        ])
        inside = (
            (cand[:, 0] > dom.x_min) & (cand[:, 0] < dom.x_max)
            & (cand[:, 1] > dom.y_min) & (cand[:, 1] < dom.y_max)
        )
        pts = np.concatenate([pts, cand[inside]])
    bnd, nrm = boundary_points(dom, n_per_edge)
    return SampleSet(pts, bnd, nrm, int(seed))
