import cmath
import math

import numpy as np
import pytest

from pwnn.network import (
    Activation,
    NetParams,
    NetSpec,
    Objective,
    auto_lambda,
    boundary_residual,
    evaluate,
    forward,
    helmholtz_residual,
    init_params,
    loss_and_grad,
)
from pwnn.problems import SampleSet, boundary_g, kd_problem, sample, ud_problem
from pwnn.pwpum import network_as_plane_waves

ACTS = [Activation.TANH, Activation.SIN, Activation.EXPI]


def one_unit(w, s=1.0, b=0.0, c=0.0):
    spec = NetSpec(1, 1, "expi")
    return spec, NetParams([np.array([w], dtype=float)], [np.array([b])], np.array([s], complex), complex(c))


def random_params(spec, rng, scale=1.0):
    theta = rng.normal(scale=scale, size=spec.n_params)
    return NetParams.unflatten(spec, theta)


def fd_laplacian(f, x, h=1e-4):
    x = np.asarray(x, dtype=float)
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    return (f(x + ex) + f(x - ex) + f(x + ey) + f(x - ey) - 4 * f(x)) / h ** 2


class TestSpecAndParams:
    def test_parameter_count(self):
        spec = NetSpec(2, 8, "tanh")
        # 8*(2+1) + 8*(8+1) hidden, complex last layer 8 weights + bias doubled
        assert spec.n_params == 24 + 72 + 18

    @pytest.mark.parametrize("act", ACTS)
    @pytest.mark.parametrize("layers", [1, 3])
    def test_flatten_roundtrip(self, act, layers):
        spec = NetSpec(layers, 5, act)
        theta = np.random.default_rng(3).normal(size=spec.n_params)
        back = NetParams.unflatten(spec, theta).flatten()
        assert np.array_equal(back, theta)

    def test_unflatten_rejects_wrong_length(self):
        with pytest.raises(ValueError):
            NetParams.unflatten(NetSpec(1, 3, "sin"), np.zeros(5))

    @pytest.mark.parametrize("bad", [(0, 3), (2, 0)])
    def test_spec_validation(self, bad):
        with pytest.raises(ValueError):
            NetSpec(bad[0], bad[1], "tanh")


class TestInit:
    @pytest.mark.parametrize("act", ACTS)
    def test_deterministic(self, act):
        spec = NetSpec(2, 6, act)
        a, b = init_params(spec, 7, 5.0), init_params(spec, 7, 5.0)
        assert np.array_equal(a.flatten(), b.flatten())
        assert not np.array_equal(a.flatten(), init_params(spec, 8, 5.0).flatten())

    def test_plane_wave_rows_have_norm_k(self):
        p = init_params(NetSpec(1, 8, "expi"), 0, 10.0)
        np.testing.assert_allclose(np.linalg.norm(p.weights[0], axis=1), 10.0, rtol=1e-15)
        assert np.all(p.biases[0] == 0)
        assert np.all(np.abs(p.out_weight.real) <= 0.1) and np.all(np.abs(p.out_weight.imag) <= 0.1)

    def test_plane_wave_directions_equiangular(self):
        W = init_params(NetSpec(1, 12, "expi"), 4, 3.0).weights[0]
        ang = np.sort(np.mod(np.arctan2(W[:, 1], W[:, 0]), 2 * np.pi))
        gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
        np.testing.assert_allclose(gaps, 2 * np.pi / 12, atol=1e-12)

    def test_tanh_params_are_real(self):
        p = init_params(NetSpec(2, 6, "tanh"), 0, 5.0)
        for W, b in zip(p.weights, p.biases):
            assert W.dtype == np.float64 and b.dtype == np.float64
        lim = math.sqrt(6.0 / (2 + 6))
        assert np.all(np.abs(p.weights[0]) <= lim)

    def test_sin_first_layer_scaled_by_k(self):
        lim = math.sqrt(6.0 / (2 + 6))
        W = init_params(NetSpec(1, 6, "sin"), 0, 20.0).weights[0]
        assert np.all(np.abs(W) <= 20.0 * lim) and np.max(np.abs(W)) > lim


class TestForward:
    def test_single_unit_at_origin(self):
        spec, p = one_unit((3.0, 0.0))
        assert forward(p, spec, (0.0, 0.0)) == 1.0

    def test_single_unit_half_turn(self):
        k = 3.0
        spec, p = one_unit((k, 0.0))
        assert abs(forward(p, spec, (math.pi / k, 0.0)) + 1.0) < 1e-15

    def test_tanh_matches_plain_loop(self):
        rng = np.random.default_rng(11)
        spec = NetSpec(2, 5, "tanh")
        p = random_params(spec, rng)
        for x in rng.uniform(-1, 1, size=(10, 2)):
            a = list(x)
            for W, b in zip(p.weights, p.biases):
                a = [math.tanh(sum(W[i, j] * a[j] for j in range(len(a))) + b[i]) for i in range(len(b))]
            ref = sum(s * v for s, v in zip(p.out_weight, a)) + p.out_bias
            assert abs(forward(p, spec, x) - ref) <= 1e-14

    def test_one_layer_plane_wave_form(self):
        rng = np.random.default_rng(2)
        spec = NetSpec(1, 6, "expi")
        p = random_params(spec, rng, scale=3.0)
        x = rng.uniform(-1, 1, size=2)
        ref = sum(s * cmath.exp(1j * (w @ x + b))
                  for s, w, b in zip(p.out_weight, p.weights[0], p.biases[0])) + p.out_bias
        assert abs(forward(p, spec, x) - ref) < 1e-13

    def test_batch_matches_pointwise(self):
        rng = np.random.default_rng(5)
        spec = NetSpec(2, 4, "sin")
        p = random_params(spec, rng)
        pts = rng.uniform(-1, 1, size=(7, 2))
        vals = forward(p, spec, pts)
        for x, v in zip(pts, vals):
            assert abs(forward(p, spec, x) - v) <= 1e-14

    def test_evaluate_value_agrees_with_forward(self):
        rng = np.random.default_rng(6)
        for act in ACTS:
            spec = NetSpec(2, 4, act)
            p = random_params(spec, rng)
            pts = rng.uniform(-1, 1, size=(5, 2))
            np.testing.assert_allclose(evaluate(p, spec, pts)[0], forward(p, spec, pts), atol=1e-14)


class TestResiduals:
    def test_plane_wave_annihilated(self):
        rng = np.random.default_rng(0)
        for k in (1.0, 10.0, 100.0):
            phi = rng.uniform(0, 2 * np.pi)
            spec, p = one_unit((k * math.cos(phi), k * math.sin(phi)), s=0.7 - 0.2j, b=0.3)
            r = helmholtz_residual(p, spec, rng.uniform(-1, 1, size=(50, 2)), k)
            assert np.max(np.abs(r)) <= 1e-10 * k * k

    def test_wrong_wavenumber(self):
        k = 4.0
        spec, p = one_unit((2 * k, 0.0))
        assert abs(helmholtz_residual(p, spec, (0.0, 0.0), k) - (-3 * k * k)) < 1e-12

    @pytest.mark.parametrize("act", ACTS)
    @pytest.mark.parametrize("layers", [1, 2])
    def test_laplacian_against_finite_differences(self, act, layers):
        rng = np.random.default_rng(42)
        spec = NetSpec(layers, 6, act)
        p = random_params(spec, rng, scale=0.8)
        k = 2.0
        for x in rng.uniform(-1, 1, size=(10, 2)):
            fd = fd_laplacian(lambda z: forward(p, spec, z), x) + k * k * forward(p, spec, x)
            jet = helmholtz_residual(p, spec, x, k)
            assert abs(jet - fd) <= 1e-5 * max(1.0, abs(fd))

    def test_exact_plane_wave_boundary(self):
        k = 6.0
        prob = ud_problem(k, [[0.6 * k, 0.8 * k]])
        spec, p = one_unit((0.6 * k, 0.8 * k))
        for x, n in [((1.0, 0.2), (1.0, 0.0)), ((-0.3, 1.0), (0.0, 1.0)), ((-1.0, -0.5), (-1.0, 0.0))]:
            g = boundary_g(prob, np.array([x]), np.array([n]))[0]
            assert abs(boundary_residual(p, spec, x, n, k, g)) <= 1e-12

    def test_constant_net(self):
        c, k = 0.4 - 1.1j, 3.0
        spec = NetSpec(1, 2, "tanh")
        p = NetParams([np.zeros((2, 2))], [np.zeros(2)], np.zeros(2, complex), c)
        assert abs(boundary_residual(p, spec, (0.2, 0.3), (0.0, 1.0), k, 0.0) - 1j * k * c) < 1e-15

    @pytest.mark.parametrize("act", ACTS)
    def test_normal_derivative_against_finite_differences(self, act):
        rng = np.random.default_rng(9)
        spec = NetSpec(2, 5, act)
        p = random_params(spec, rng, scale=0.8)
        k, h = 2.5, 1e-6
        for x in rng.uniform(-1, 1, size=(8, 2)):
            phi = rng.uniform(0, 2 * np.pi)
            n = np.array([math.cos(phi), math.sin(phi)])
            fd = (forward(p, spec, x + h * n) - forward(p, spec, x - h * n)) / (2 * h)
            jet = boundary_residual(p, spec, x, n, k, 0.0) - 1j * k * forward(p, spec, x)
            assert abs(jet - fd) <= 1e-6 * max(1.0, abs(fd))


def small_problem_and_samples(seed=0):
    prob = kd_problem(3.0)
    return prob, sample(prob, 30, 5, seed)


class TestLoss:
    def test_hand_computed_two_points(self):
        # one unit e^{i w.x} with |w| = 2, k = 1: interior residual (k^2 - |w|^2) h;
        # boundary residual (i w.n + i k) h - g at a single point with g = 0
        k = 1.0
        w = np.array([2.0, 0.0])
        prob = ud_problem(k, [[1.0, 0.0]])
        xi, xb, nb = np.array([0.25, 0.5]), np.array([1.0, 0.0]), np.array([1.0, 0.0])
        samples = SampleSet(xi[None], xb[None], nb[None], 0)
        spec, p = one_unit(w)
        obj = Objective(spec, samples, prob, lam=0.5)
        g = cmath.exp(1j * 1.0) * (1j + 1j)  # exact data 2ik e^{ik x} at x=(1,0)
        h_i, h_b = cmath.exp(1j * 0.5), cmath.exp(1j * 2.0)
        r_f = (1.0 - 4.0) * h_i
        r_g = (2j + 1j) * h_b - g
        expected = abs(r_f) ** 2 + 0.5 * abs(r_g) ** 2
        loss, _ = obj(p.flatten())
        assert abs(loss - expected) <= 1e-12

    def test_exact_solution_is_a_minimum(self):
        k = 5.0
        kv = np.array([[k, 0.0], [0.0, -k], [0.6 * k, 0.8 * k]])
        prob = ud_problem(k, kv)
        samples = sample(prob, 100, 10, 0)
        spec = NetSpec(1, 3, "expi")
        p = NetParams([kv.copy()], [np.zeros(3)], np.ones(3, complex), 0j)
        loss, grad = loss_and_grad(p, spec, samples, prob, 1.0)
        assert loss <= 1e-18
        assert np.max(np.abs(grad)) <= 1e-9

    @pytest.mark.parametrize("act", ACTS)
    @pytest.mark.parametrize("layers", [1, 2])
    @pytest.mark.parametrize("units", [4, 8])
    def test_gradient_central_differences(self, act, layers, units):
        prob, samples = small_problem_and_samples()
        spec = NetSpec(layers, units, act)
        worst = 0.0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            theta = init_params(spec, seed, prob.k).flatten() + 0.1 * rng.normal(size=spec.n_params)
            obj = Objective(spec, samples, prob, lam=rng.uniform(0.5, 2.0))
            _, grad = obj(theta)
            v = rng.normal(size=spec.n_params)
            eps = 1e-6
            fd = (obj(theta + eps * v)[0] - obj(theta - eps * v)[0]) / (2 * eps)
            worst = max(worst, abs(fd - grad @ v) / max(abs(fd), 1e-12))
        assert worst <= 1e-5

    @pytest.mark.parametrize("act", ACTS)
    def test_closed_form_path_matches_general_sweep(self, act):
        prob, samples = small_problem_and_samples(1)
        spec = NetSpec(1, 7, act)
        theta = init_params(spec, 3, prob.k).flatten() + 0.05
        fast = Objective(spec, samples, prob, 1.3)(theta)
        slow = Objective(spec, samples, prob, 1.3, fast=False)(theta)
        assert abs(fast[0] - slow[0]) <= 1e-13 * abs(slow[0])
        np.testing.assert_allclose(fast[1], slow[1], rtol=1e-10, atol=1e-12 * np.max(np.abs(slow[1])))

    def test_parts_combine_to_loss(self):
        prob, samples = small_problem_and_samples()
        spec = NetSpec(1, 4, "sin")
        p = init_params(spec, 0, prob.k)
        obj = Objective(spec, samples, prob, 2.5)
        m_int, m_bnd = obj.parts(p)
        assert obj(p.flatten())[0] == pytest.approx(m_int + 2.5 * m_bnd, rel=1e-14)
        res = obj.residuals(p)
        assert len(res.interior) == samples.n_f and len(res.boundary) == samples.n_g

    def test_rejects_empty_samples_and_bad_lambda(self):
        prob, samples = small_problem_and_samples()
        spec = NetSpec(1, 2, "tanh")
        empty = SampleSet(np.empty((0, 2)), samples.boundary, samples.normals, 0)
        with pytest.raises(ValueError):
            Objective(spec, empty, prob)
        with pytest.raises(ValueError):
            Objective(spec, samples, prob, lam=0.0)


class TestProperties:
    def test_one_layer_net_is_a_plane_wave_sum(self):
        rng = np.random.default_rng(0)
        spec = NetSpec(1, 9, "expi")
        p = random_params(spec, rng, scale=4.0)
        pw = network_as_plane_waves(p)
        pts = rng.uniform(-1, 1, size=(100, 2))
        np.testing.assert_allclose(pw(pts), forward(p, spec, pts), rtol=0, atol=1e-12)

    @pytest.mark.parametrize("act", ACTS)
    def test_unit_phase_rotation(self, act):
        rng = np.random.default_rng(1)
        spec = NetSpec(2, 4, act)
        p = random_params(spec, rng)
        q = NetParams(p.weights, p.biases, p.out_weight * cmath.exp(0.7j), p.out_bias * cmath.exp(0.7j))
        pts = rng.uniform(-1, 1, size=(20, 2))
        np.testing.assert_allclose(forward(q, spec, pts), cmath.exp(0.7j) * forward(p, spec, pts), atol=1e-13)
        np.testing.assert_allclose(np.abs(helmholtz_residual(q, spec, pts, 3.0)),
                                   np.abs(helmholtz_residual(p, spec, pts, 3.0)), rtol=1e-12, atol=1e-13)

    def test_auto_lambda(self):
        prob, samples = small_problem_and_samples()
        pw = NetSpec(1, 6, "expi")
        assert auto_lambda(init_params(pw, 0, prob.k), pw, samples, prob) == 1.0
        tn = NetSpec(1, 6, "tanh")
        p = init_params(tn, 0, prob.k)
        m_int, m_bnd = Objective(tn, samples, prob).parts(p)
        assert auto_lambda(p, tn, samples, prob) == pytest.approx(m_int / m_bnd, rel=1e-14)
