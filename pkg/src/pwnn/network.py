"""Fully connected PINNs with a complex output layer.

Hidden transforms are real; the last transform is complex, so
``h(x; theta)`` maps R^2 to C. Three activations are supported: ``tanh``
(TANN), ``sin`` (SIREN) and ``e^{iz}`` (PWNN). With the plane-wave
activation and one hidden layer the network is ``sum_i s_i e^{i(w_i.x + b_i)}``.

Derivatives with respect to x come from two second-order jet passes (one
per coordinate); parameter gradients of the collocation loss come from a
hand-written reverse sweep through those jet passes.

Flattened parameter layout: for each hidden layer ``W_l`` (row-major) then
``b_l``; then ``Re(s)``, ``Im(s)``, ``Re(c)``, ``Im(c)`` for the complex
output weights ``s`` and bias ``c``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import jets
from .jets import Jet2
from .problems import STREAM_INIT, HelmholtzProblem, SampleSet, boundary_g, make_rng


class Activation(str, Enum):
    TANH = "tanh"
    SIN = "sin"
    EXPI = "expi"


_DERIVS = {
    Activation.TANH: jets.tanh_derivs,
    Activation.SIN: jets.sin_derivs,
    Activation.EXPI: jets.exp_i_derivs,
}

# solver names used across experiments
NEGLIGIBLE_INTERIOR = 1e-12

ACTIVATION_OF = {"TANN": Activation.TANH, "SIREN": Activation.SIN, "PWNN": Activation.EXPI}


@dataclass(frozen=True)
class NetSpec:
    hidden_layers: int
    units: int
    activation: Activation
    input_dim: int = 2
    output_dim: int = 1

    def __post_init__(self):
        if self.hidden_layers < 1 or self.units < 1:
            raise ValueError("need at least one hidden layer and one unit")
        if self.input_dim != 2 or self.output_dim != 1:
            raise ValueError("only 2D input and scalar output are supported")
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def widths(self) -> list[int]:
        return [self.input_dim] + [self.units] * self.hidden_layers

    @property
    def n_params(self) -> int:
        w = self.widths
        hidden = sum(w[l + 1] * (w[l] + 1) for l in range(self.hidden_layers))
        return hidden + 2 * (self.units + 1)


@dataclass
class NetParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    out_weight: np.ndarray  # complex, shape (units,)
    out_bias: complex

    def flatten(self) -> np.ndarray:
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts += [W.ravel(), b]
        s = self.out_weight
        parts += [s.real, s.imag, [self.out_bias.real, self.out_bias.imag]]
        return np.concatenate(parts).astype(float)

    @classmethod
    def unflatten(cls, spec: NetSpec, theta) -> "NetParams":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (spec.n_params,):
            raise ValueError(f"expected {spec.n_params} parameters, got {theta.shape}")
        w = spec.widths
        pos = 0
        weights, biases = [], []
        for l in range(spec.hidden_layers):
            n = w[l + 1] * w[l]
            weights.append(theta[pos:pos + n].reshape(w[l + 1], w[l]).copy())
            pos += n
            biases.append(theta[pos:pos + w[l + 1]].copy())
            pos += w[l + 1]
        u = spec.units
        s = theta[pos:pos + u] + 1j * theta[pos + u:pos + 2 * u]
        pos += 2 * u
        c = complex(theta[pos], theta[pos + 1])
        return cls(weights, biases, s, c)


def init_params(spec: NetSpec, seed: int, k: float) -> NetParams:
    """Deterministic initialization.

    Plane-wave nets start with first-layer rows ``k (cos phi_i, sin phi_i)``
    where the ``phi_i`` are equiangular, ``phi_i = phi_0 + 2 pi i / units``,
    under one uniform random rotation ``phi_0``; biases are zero and the
    remaining weights small (+-0.1). I.i.d. uniform angles leave gaps that
    the optimizer is very slow to close. Tanh and
    sin nets use Glorot-uniform weights and zero biases; the sin net's first
    layer is additionally scaled by ``k``.
    """
    rng = make_rng(seed, STREAM_INIT)
    w = spec.widths
    u = spec.units
    weights, biases = [], []
    if spec.activation is Activation.EXPI:
        phi = rng.uniform(0.0, 2.0 * np.pi / u) + 2.0 * np.pi * np.arange(u) / u
        weights.append(k * np.stack([np.cos(phi), np.sin(phi)], axis=1))
        for l in range(1, spec.hidden_layers):
            weights.append(rng.uniform(-0.1, 0.1, size=(w[l + 1], w[l])))
        biases = [np.zeros(w[l + 1]) for l in range(spec.hidden_layers)]
        s = rng.uniform(-0.1, 0.1, size=u) + 1j * rng.uniform(-0.1, 0.1, size=u)
    else:
        for l in range(spec.hidden_layers):
            lim = np.sqrt(6.0 / (w[l] + w[l + 1]))
            W = rng.uniform(-lim, lim, size=(w[l + 1], w[l]))
            if l == 0 and spec.activation is Activation.SIN:
                W *= k
            weights.append(W)
            biases.append(np.zeros(w[l + 1]))
        lim = np.sqrt(6.0 / (u + 1))
        s = rng.uniform(-lim, lim, size=u) + 1j * rng.uniform(-lim, lim, size=u)
    return NetParams(weights, biases, s, 0j)


def _affine(a: Jet2, W, b) -> Jet2:
    return Jet2(a.v @ W.T + b, a.d @ W.T, a.dd @ W.T)


def _forward(params: NetParams, spec: NetSpec, pts: np.ndarray):
    """Jet pass for both coordinate directions at once.

    ``d`` and ``dd`` carry a leading direction axis of length 2. The first
    layer's directional derivatives do not depend on the point, so they stay
    in broadcast shape ``(2, 1, units)``.
    """
    derivs = _DERIVS[spec.activation]
    W0, b0 = params.weights[0], params.biases[0]
    z = Jet2(pts @ W0.T + b0, W0.T[:, None, :], 0.0)
    table = derivs(z.v)
    cache = [(None, z, table)]
    a = z.compose(*table[:3])
    for W, b in zip(params.weights[1:], params.biases[1:]):
        z = _affine(a, W, b)
        table = derivs(z.v)
        cache.append((a, z, table))
        a = z.compose(*table[:3])
    s, c = params.out_weight, params.out_bias
    h = Jet2(a.v @ s + c, a.d @ s, a.dd @ s)
    return h, a, cache


def _as_points(x) -> tuple[np.ndarray, bool]:
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    return np.atleast_2d(pts), single


def evaluate(params: NetParams, spec: NetSpec, x):
    """Return ``(h, grad h, laplacian h)`` at points ``x`` of shape (N, 2)."""
    pts, _ = _as_points(x)
    h, _, _ = _forward(params, spec, pts)
    return h.v, h.d.T, h.dd.sum(axis=0)


def forward(params: NetParams, spec: NetSpec, x):
    pts, single = _as_points(x)
    derivs = _DERIVS[spec.activation]
    a = pts
    for W, b in zip(params.weights, params.biases):
        a = derivs(a @ W.T + b)[0]
    h = a @ params.out_weight + params.out_bias
    return complex(h[0]) if single else h


def helmholtz_residual(params: NetParams, spec: NetSpec, x, k: float):
    """``laplacian h + k^2 h``."""
    pts, single = _as_points(x)
    h, _, lap = evaluate(params, spec, pts)
    r = lap + k * k * h
    return complex(r[0]) if single else r


def boundary_residual(params: NetParams, spec: NetSpec, x, normal, k: float, g_value):
    """``grad h . n + i k h - g``."""
    pts, single = _as_points(x)
    h, grad, _ = evaluate(params, spec, pts)
    r = (grad * np.atleast_2d(normal)).sum(axis=1) + 1j * k * h - g_value
    return complex(r[0]) if single else r


@dataclass
class ResidualBatch:
    interior: np.ndarray
    boundary: np.ndarray


class Objective:
    """Collocation loss ``M_int + lam * M_bnd`` as a function of the flat parameters.

    Boundary data is computed once at construction. Calling the object
    returns ``(loss, grad)``. One-hidden-layer nets take a closed-form path;
    deeper nets go through the general jet sweep (``fast=False`` forces it).
    """

    def __init__(self, spec: NetSpec, samples: SampleSet, problem: HelmholtzProblem,
                 lam: float = 1.0, fast: bool = True):
        if samples.n_f == 0 or samples.n_g == 0:
            raise ValueError("loss needs nonempty interior and boundary samples")
        if not lam > 0:
            raise ValueError("lambda must be positive")
        self.spec = spec
        self.k = float(problem.k)
        self.lam = float(lam)
        self.n_f = samples.n_f
        self.n_g = samples.n_g
        self.points = np.concatenate([samples.interior, samples.boundary])
        self.normals = samples.normals
        self.g = boundary_g(problem, samples.boundary, samples.normals)
        self.fast = fast and spec.hidden_layers == 1
        self.n_evals = 0

    def residuals(self, params: NetParams) -> ResidualBatch:
        h, _, _ = _forward(params, self.spec, self.points)
        return self._residuals(h)

    def _residuals(self, h: Jet2) -> ResidualBatch:
        nf, k = self.n_f, self.k
        r_f = h.dd[:, :nf].sum(axis=0) + k * k * h.v[:nf]
        grad_b = h.d[:, nf:]
        r_g = grad_b[0] * self.normals[:, 0] + grad_b[1] * self.normals[:, 1]
        r_g = r_g + 1j * k * h.v[nf:] - self.g
        return ResidualBatch(r_f, r_g)

    def parts(self, params: NetParams) -> tuple[float, float]:
        """Unweighted mean squared interior and boundary residuals."""
        r = self.residuals(params)
        return float(np.mean(np.abs(r.interior) ** 2)), float(np.mean(np.abs(r.boundary) ** 2))

    def __call__(self, theta) -> tuple[float, np.ndarray]:
        self.n_evals += 1
        params = NetParams.unflatten(self.spec, theta)
        return self.loss_and_grad(params)

    def loss_and_grad(self, params: NetParams) -> tuple[float, np.ndarray]:
        if self.fast:
            return self._one_layer(params)
        return self._general(params)

    def _one_layer(self, params: NetParams):
        # h = F0 s + c, dh/dx_j = F1 (W_j s), laplacian = F2 (|w|^2 s), F_m = sigma^(m)(z)
        nf, k, lam = self.n_f, self.k, self.lam
        W, b = params.weights[0], params.biases[0]
        s, c = params.out_weight, params.out_bias
        x = self.points
        F0, F1, F2, F3 = _DERIVS[self.spec.activation](x @ W.T + b)
        w0, w1 = W[:, 0], W[:, 1]
        q = w0 * w0 + w1 * w1
        n0, n1 = self.normals[:, 0], self.normals[:, 1]
        Fi, Fb = slice(0, nf), slice(nf, None)

        r_f = F2[Fi] @ (q * s) + k * k * (F0[Fi] @ s + c)
        gx, gy = F1[Fb] @ (w0 * s), F1[Fb] @ (w1 * s)
        r_g = n0 * gx + n1 * gy + 1j * k * (F0[Fb] @ s + c) - self.g
        loss = np.mean(np.abs(r_f) ** 2) + lam * np.mean(np.abs(r_g) ** 2)

        rho_f = 2.0 * np.conj(r_f) / nf
        rho_g = 2.0 * lam * np.conj(r_g) / self.n_g
        t_f2 = rho_f @ F2[Fi]
        t_g0, t_g1 = (rho_g * n0) @ F1[Fb], (rho_g * n1) @ F1[Fb]
        s_bar = q * t_f2 + k * k * (rho_f @ F0[Fi]) + w0 * t_g0 + w1 * t_g1 \
            + 1j * k * (rho_g @ F0[Fb])
        c_bar = k * k * rho_f.sum() + 1j * k * rho_g.sum()

        z_bar = np.empty(F0.shape, dtype=complex)
        z_bar[Fi] = rho_f[:, None] * (F3[Fi] * (q * s) + k * k * F1[Fi] * s)
        z_bar[Fb] = F2[Fb] * (np.outer(rho_g * n0, w0 * s) + np.outer(rho_g * n1, w1 * s)) \
            + 1j * k * np.outer(rho_g, s) * F1[Fb]
        W_bar = (z_bar.T @ x).real
        W_bar[:, 0] += (2.0 * w0 * s * t_f2 + s * t_g0).real
        W_bar[:, 1] += (2.0 * w1 * s * t_f2 + s * t_g1).real
        b_bar = z_bar.sum(axis=0).real
        grad = np.concatenate([W_bar.ravel(), b_bar, s_bar.real, -s_bar.imag,
                               [c_bar.real, -c_bar.imag]])
        return float(loss), grad

    def _general(self, params: NetParams):
        spec, k, nf = self.spec, self.k, self.n_f
        h, a_last, cache = _forward(params, spec, self.points)
        r = self._residuals(h)
        loss = np.mean(np.abs(r.interior) ** 2) + self.lam * np.mean(np.abs(r.boundary) ** 2)

        # adjoints, convention dM = Re(sum adj * dq)
        rf_bar = 2.0 * np.conj(r.interior) / nf
        rg_bar = 2.0 * self.lam * np.conj(r.boundary) / self.n_g
        hv_bar = np.concatenate([k * k * rf_bar, 1j * k * rg_bar])
        hd_bar = np.zeros((2, len(self.points)), dtype=complex)
        hd_bar[:, nf:] = rg_bar * self.normals.T
        hdd_bar = np.zeros((2, len(self.points)), dtype=complex)
        hdd_bar[:, :nf] = rf_bar

        s = params.out_weight
        s_bar = hv_bar @ a_last.v + np.einsum("jn,jnu->u", hd_bar, a_last.d) \
            + np.einsum("jn,jnu->u", hdd_bar, a_last.dd)
        c_bar = hv_bar.sum()
        av_bar = np.outer(hv_bar, s)
        ad_bar = hd_bar[..., None] * s
        add_bar = hdd_bar[..., None] * s

        grads = []
        for (a, z, (_, f1, f2, f3)), W in zip(reversed(cache), reversed(params.weights)):
            zdd_bar = add_bar * f1
            zd_bar = ad_bar * f1 + 2.0 * add_bar * f2 * z.d
            zv_bar = av_bar * f1 + (ad_bar * f2 * z.d
                                    + add_bar * (f3 * z.d * z.d + f2 * z.dd)).sum(axis=0)
            if a is None:
                # first layer: input jets are the unit seeds with zero curvature
                W_bar = zv_bar.T @ self.points + zd_bar.sum(axis=1).T
                grads.append((W_bar.real, zv_bar.sum(axis=0).real))
                break
            W_bar = zv_bar.T @ a.v + np.einsum("jnu,jnv->uv", zd_bar, a.d) \
                + np.einsum("jnu,jnv->uv", zdd_bar, a.dd)
            grads.append((W_bar.real, zv_bar.sum(axis=0).real))
            av_bar = zv_bar @ W
            ad_bar = zd_bar @ W
            add_bar = zdd_bar @ W

        parts = []
        for W_bar, b_bar in reversed(grads):
            parts += [W_bar.ravel(), b_bar]
        parts += [s_bar.real, -s_bar.imag, [c_bar.real, -c_bar.imag]]
        return float(loss), np.concatenate(parts)


def loss_and_grad(params: NetParams, spec: NetSpec, samples: SampleSet,
                  problem: HelmholtzProblem, lam: float) -> tuple[float, np.ndarray]:
    return Objective(spec, samples, problem, lam).loss_and_grad(params)


def auto_lambda(params: NetParams, spec: NetSpec, samples: SampleSet,
                problem: HelmholtzProblem) -> float:
    """Weight that puts the initial interior and boundary losses on the same scale.

    A plane-wave net started with ``|w_i| = k`` solves the interior equation
    exactly, so there is nothing to balance; ``1`` is returned when the
    interior loss is negligible next to the boundary loss.
    """
    m_int, m_bnd = Objective(spec, samples, problem).parts(params)
    if m_int <= NEGLIGIBLE_INTERIOR * m_bnd:
        return 1.0
    return m_int / max(m_bnd, np.finfo(float).eps)
