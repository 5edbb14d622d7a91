import numpy as np
import pytest
from scipy import linalg

from splitls.core import ConfigError, UnboundedSubproblem, StronglyConvex
from splitls.problems import (ConsensusSpcaSpec, MpcSpec, SparseLsqSpec, SpcaSpec,
                              build_consensus_spca, build_mpc, build_pseudo_huber_qp,
                              build_sparse_lsq, build_spca, double_integrator,
                              generate_synthetic, project_sparse_sphere, prox_box,
                              prox_l_half, prox_pseudo_huber, prox_soft_corridor)
from splitls.testkit import bruteforce_scalar_prox, exhaustive_sparse_sphere


def sqrt_abs(w):
    return np.sqrt(np.abs(w))


class TestLHalf:
    def test_zero(self):
        assert prox_l_half(np.array([0.0]), 1.0)[0] == 0.0

    def test_below_threshold(self):
        assert prox_l_half(np.array([1.0]), 1.0)[0] == 0.0

    def test_threshold_tie_returns_zero(self):
        g = 0.3
        x = 1.5 * g ** (2.0 / 3.0)
        assert prox_l_half(np.array([x, -x]), g).tolist() == [0.0, 0.0]

    def test_large_input_against_bruteforce(self):
        w = prox_l_half(np.array([10.0]), 1.0)[0]
        ref = bruteforce_scalar_prox(sqrt_abs, 10.0, 1.0)
        assert abs(w - ref) <= 1e-8
        # frozen root of w - 10 + 1/(2 sqrt(w)) = 0
        assert w == pytest.approx(9.84061076829815, abs=1e-12)

    def test_odd(self, rng):
        x = rng.uniform(-5, 5, 50)
        np.testing.assert_array_equal(prox_l_half(-x, 0.4), -prox_l_half(x, 0.4))

    @pytest.mark.parametrize("gamma", [0.05, 0.7, 3.0])
    def test_random_against_bruteforce(self, gamma, rng):
        x = rng.uniform(-6, 6, 300)
        ref = np.array([bruteforce_scalar_prox(sqrt_abs, xi, gamma) for xi in x])
        assert np.max(np.abs(prox_l_half(x, gamma) - ref)) <= 1e-8


class TestSoftCorridor:
    @pytest.mark.parametrize("sign", [1.0, -1.0])
    def test_midpoint_of_pull_region(self, sign):
        rho, kappa, gamma = 0.6, 4.0, 0.25
        x = sign * (rho + gamma * kappa / 2)
        w = prox_soft_corridor(np.array([x]), gamma, rho, kappa)[0]
        assert w == sign * rho
        h = lambda t: kappa * np.maximum(0.0, np.abs(t) - rho)
        ref = bruteforce_scalar_prox(h, x, gamma, kinks=(rho, -rho))
        assert abs(w - ref) <= 1e-10

    def test_regions(self):
        x = np.array([0.3, 1.5, 4.0, -4.0])
        np.testing.assert_allclose(prox_soft_corridor(x, 1.0, 1.0, 1.0),
                                   [0.3, 1.0, 3.0, -3.0])

    def test_random_against_bruteforce(self, rng):
        rho, kappa, gamma = 0.5, 3.0, 0.7
        h = lambda t: kappa * np.maximum(0.0, np.abs(t) - rho)
        x = rng.uniform(-5, 5, 300)
        ref = np.array([bruteforce_scalar_prox(h, xi, gamma, kinks=(-rho, rho))
                        for xi in x])
        assert np.max(np.abs(prox_soft_corridor(x, gamma, rho, kappa) - ref)) <= 1e-8


class TestBox:
    def test_random_against_bruteforce(self, rng):
        lo, hi = -1.0, 2.0
        h = lambda t: np.where((t >= lo) & (t <= hi), 0.0, np.inf)
        x = rng.uniform(-5, 5, 300)
        ref = np.array([bruteforce_scalar_prox(h, xi, 0.7, kinks=(lo, hi)) for xi in x])
        assert np.max(np.abs(prox_box(x, 0.7, lo, hi) - ref)) <= 1e-8


class TestPseudoHuber:
    def test_stationarity(self, rng):
        x = rng.uniform(-20, 20, 200)
        g, rho = 0.8, 1.5
        w = prox_pseudo_huber(x, g, rho)
        np.testing.assert_allclose(w - x + g * rho * w / np.sqrt(1 + w * w), 0,
                                   atol=1e-12)

    def test_against_bruteforce(self, rng):
        h = lambda t: 2.0 * (np.sqrt(1 + t * t) - 1)
        x = rng.uniform(-5, 5, 100)
        ref = np.array([bruteforce_scalar_prox(h, xi, 0.5) for xi in x])
        assert np.max(np.abs(prox_pseudo_huber(x, 0.5, 2.0) - ref)) <= 1e-8

    def test_builder(self, rng):
        Q = np.diag([1.0, 3.0])
        p = build_pseudo_huber_qp(Q, np.array([1.0, -1.0]), 2.0)
        x = rng.standard_normal(2)
        w = p.phi1.prox(x, 0.5)
        np.testing.assert_allclose(Q @ w - [1.0, -1.0] + (w - x) / 0.5, 0, atol=1e-12)
        assert p.regime.L == pytest.approx(3.0)


class TestSparseSphere:
    @pytest.mark.parametrize("k,expected", [(1, [0, 0, 1, 0]), (2, [0.6, 0, 0.8, 0])])
    def test_hand_values(self, k, expected):
        np.testing.assert_allclose(project_sparse_sphere(np.array([3.0, 0, 4, 0]), k),
                                   expected)

    def test_tie_lowest_index(self):
        np.testing.assert_array_equal(project_sparse_sphere(np.array([1.0, -1.0]), 1),
                                      [1.0, 0.0])

    def test_zero_fallback(self):
        np.testing.assert_array_equal(project_sparse_sphere(np.zeros(3), 2), [1, 0, 0])

    @pytest.mark.parametrize("n", [1, 2, 5, 8, 10])
    def test_exhaustive(self, n, rng):
        for trial in range(20):
            # integer entries make magnitude ties common
            x = rng.integers(-3, 4, n).astype(float) if trial % 2 else rng.standard_normal(n)
            for k in range(1, n + 1):
                np.testing.assert_array_equal(project_sparse_sphere(x, k),
                                              exhaustive_sparse_sphere(x, k))


class TestSparseLsq:
    @pytest.mark.parametrize("shape", [(8, 20), (20, 8)])
    def test_prox_residual(self, shape, rng):
        A = rng.standard_normal(shape)
        b = rng.standard_normal(shape[0])
        p = build_sparse_lsq(SparseLsqSpec(A, b, 0.1))
        x, g = rng.standard_normal(shape[1]), 0.37
        w = p.phi1.prox(x, g)
        res = (A.T @ A + np.eye(shape[1]) / g) @ w - (A.T @ b + x / g)
        assert np.linalg.norm(res) <= 1e-10

    def test_zero_data(self, rng):
        A = rng.standard_normal((5, 9))
        p = build_sparse_lsq(SparseLsqSpec(A, np.zeros(5), 0.1))
        np.testing.assert_allclose(p.phi1.prox(np.zeros(9), 1.0), 0, atol=1e-15)

    def test_large_step_solves_normal_equations(self, rng):
        A = rng.standard_normal((12, 4))
        b = rng.standard_normal(12)
        p = build_sparse_lsq(SparseLsqSpec(A, b, 0.1))
        w = p.phi1.prox(rng.standard_normal(4), 1e10)
        np.testing.assert_allclose(w, np.linalg.lstsq(A, b, rcond=None)[0], atol=1e-7)

    def test_phi2_scaled_by_weight(self, rng):
        A = rng.standard_normal((3, 6))
        p = build_sparse_lsq(SparseLsqSpec(A, np.ones(3), 0.4))
        x = rng.uniform(-4, 4, 6)
        np.testing.assert_allclose(p.phi2.prox(x, 0.5), prox_l_half(x, 0.2))
        assert p.regime.L == pytest.approx(np.linalg.norm(A, 2) ** 2)

    @pytest.mark.parametrize("r", [0.0, -1.0])
    def test_rejects_nonpositive_weight(self, r):
        with pytest.raises(ConfigError):
            build_sparse_lsq(SparseLsqSpec(np.eye(2), np.ones(2), r))


class TestSpca:
    def test_zero_data_identity(self, rng):
        p = build_spca(SpcaSpec(np.zeros((4, 3)), 2))
        x = rng.standard_normal(3)
        np.testing.assert_array_equal(p.phi1.prox(x, 1.0), x)

    def test_scalar_hand_value(self):
        p = build_spca(SpcaSpec(np.array([[1.0]]), 1))
        np.testing.assert_allclose(p.phi1.prox(np.array([3.0]), 0.5), [6.0])

    @pytest.mark.parametrize("shape", [(5, 12), (30, 6)])
    def test_matches_direct_inverse(self, shape, rng):
        W = rng.standard_normal(shape)
        m, n = shape
        p = build_spca(SpcaSpec(W, 2))
        g = 0.6 * m / np.linalg.norm(W, 2) ** 2
        x = rng.standard_normal(n)
        direct = np.linalg.solve(np.eye(n) - g / m * W.T @ W, x)
        np.testing.assert_allclose(p.phi1.prox(x, g), direct, rtol=1e-9, atol=1e-12)

    def test_rejects_large_step(self, rng):
        W = rng.standard_normal((6, 4))
        gmax = W.shape[0] / np.linalg.norm(W, 2) ** 2
        with pytest.raises(UnboundedSubproblem):
            build_spca(SpcaSpec(W, 2), gamma_hint=gmax)
        build_spca(SpcaSpec(W, 2), gamma_hint=0.99 * gmax)

    def test_objective_sign(self, rng):
        W = rng.standard_normal((10, 5))
        p = build_spca(SpcaSpec(W, 2))
        for _ in range(10):
            x = project_sparse_sphere(rng.standard_normal(5), 2)
            total = p.phi1.value(x) + p.phi2.value(x)
            assert total == pytest.approx(-np.sum((W @ x) ** 2) / 20)
        assert p.phi2.value(np.ones(5)) == np.inf

    def test_bad_k(self):
        with pytest.raises(ConfigError):
            build_spca(SpcaSpec(np.eye(3), 4))


class TestConsensusSpca:
    def test_single_agent_matches_spca_prox(self, rng):
        W = rng.standard_normal((10, 4))
        beta = 2.0 * np.linalg.norm(W, 2) ** 2 / 10 + 1.0
        prob = build_consensus_spca(ConsensusSpcaSpec(SpcaSpec(W, 2), 1), beta)
        z, y = rng.standard_normal(4), rng.standard_normal(4)
        x = prob.argmin_x(y, z, beta)
        ref = build_spca(SpcaSpec(W, 2)).phi1.prox(z - y / beta, 1 / beta)
        np.testing.assert_allclose(x, ref, rtol=1e-12)

    def test_zero_data_returns_z(self, rng):
        prob = build_consensus_spca(ConsensusSpcaSpec(SpcaSpec(np.zeros((6, 3)), 1), 3), 1.0)
        z = rng.standard_normal(3)
        np.testing.assert_allclose(prob.argmin_x(np.zeros(9), z, 1.0), np.tile(z, 3))

    def test_matches_monolithic_solve(self, rng):
        m, n, N = 24, 5, 4
        W = rng.standard_normal((m, n))
        spec = ConsensusSpcaSpec(SpcaSpec(W, 2), N)
        beta = 3.0 * max(np.linalg.norm(Wi, 2) ** 2 for Wi in spec.blocks()) / m
        prob = build_consensus_spca(spec, beta)
        z, y = rng.standard_normal(n), rng.standard_normal(N * n)
        H = linalg.block_diag(*[beta * np.eye(n) - Wi.T @ Wi / m for Wi in spec.blocks()])
        ref = np.linalg.solve(H, beta * np.tile(z, N) - y)
        np.testing.assert_allclose(prob.argmin_x(y, z, beta), ref, rtol=1e-9, atol=1e-12)

    def test_z_step_projects_average(self, rng):
        W = rng.standard_normal((9, 4))
        prob = build_consensus_spca(ConsensusSpcaSpec(SpcaSpec(W, 2), 3), 50.0)
        x, y = rng.standard_normal(12), rng.standard_normal(12)
        avg = (x + y / 50.0).reshape(3, 4).mean(axis=0)
        np.testing.assert_array_equal(prob.argmin_z(x, y, 50.0),
                                      project_sparse_sphere(avg, 2))

    def test_rejects_small_penalty(self, rng):
        W = rng.standard_normal((9, 4))
        spec = ConsensusSpcaSpec(SpcaSpec(W, 2), 3)
        L = max(np.linalg.norm(Wi, 2) ** 2 for Wi in spec.blocks()) / 9
        with pytest.raises(ConfigError):
            build_consensus_spca(spec, 2 * L)
        build_consensus_spca(spec, 2.01 * L)

    def test_partition_size_checked(self):
        spec = ConsensusSpcaSpec(SpcaSpec(np.eye(4), 1), 3, partition=[[0, 1], [2, 3]])
        with pytest.raises(ConfigError):
            build_consensus_spca(spec)


def scalar_mpc(x0=1.0, q=1.0, r=1.0, a=1.0, b=1.0):
    return build_mpc(MpcSpec(A=[[a]], B=[[b]], Q=[[q]], R=[[r]], x_ref=np.zeros(1),
                             N=1, u_lo=[-10.0], u_hi=[10.0], x0=np.array([x0])))


class TestMpc:
    def test_one_step_hand_value(self):
        # min u^2 + x1^2 with x1 = 1 + u: u = -1/2, x1 = 1/2
        p = scalar_mpc()
        w = p.phi1.prox(np.zeros(2), 1.0)
        np.testing.assert_allclose(p.meta["unscale"](w), [-0.5, 0.5], atol=1e-14)

    def test_one_step_kkt(self, rng):
        a, b, q, r, x0, g = 0.9, 0.5, 2.0, 0.3, 1.2, 0.7
        p = scalar_mpc(x0, q, r, a, b)
        zeta = rng.standard_normal(2)
        w = p.phi1.prox(zeta, g)
        # scaled coordinates (u, x1) / D with D = 1/sqrt(2 diag(r, q))
        D = 1 / np.sqrt(2 * np.array([r, q]))
        E = np.array([-b, 1.0]) * D
        K = np.zeros((3, 3))
        K[:2, :2] = (1 + 1 / g) * np.eye(2)
        K[:2, 2] = K[2, :2] = E
        sol = np.linalg.solve(K, np.r_[zeta / g, a * x0])
        np.testing.assert_allclose(w, sol[:2], rtol=1e-12)

    def test_minimizer_is_fixed_point(self):
        p = build_mpc(generate_synthetic("mpc", {}, 3))
        wstar = p.meta["project_dynamics"](p.meta["center"])
        for g in (0.1, 1.0, 10.0):
            np.testing.assert_allclose(p.phi1.prox(wstar, g), wstar, atol=1e-12)

    def test_dynamics_satisfied(self, rng):
        spec = generate_synthetic("mpc", {}, 1)
        p = build_mpc(spec)
        z = p.meta["unscale"](p.phi1.prox(rng.standard_normal(p.dim), 0.5))
        nU, nx, nu = p.meta["nU"], p.meta["nx"], p.meta["nu"]
        U, X = z[:nU].reshape(-1, nu), z[nU:].reshape(-1, nx)
        prev = spec.x0
        for i in range(spec.N):
            np.testing.assert_allclose(X[i], spec.A @ prev + spec.B @ U[i], atol=1e-10)
            prev = X[i]

    def test_strong_convexity(self, rng):
        p = build_mpc(generate_synthetic("mpc", {}, 0))
        assert isinstance(p.regime, StronglyConvex) and p.regime.mu == 1.0
        proj, c = p.meta["project_dynamics"], p.meta["center"]
        for _ in range(20):
            u, v = proj(rng.standard_normal(p.dim)), proj(rng.standard_normal(p.dim))
            assert np.isfinite(p.phi1.value(u))
            assert (u - c - (v - c)) @ (u - v) >= (1 - 1e-12) * (u - v) @ (u - v)

    def test_constraints_prox(self, rng):
        p = build_mpc(generate_synthetic("mpc", {}, 0))
        lo, hi = p.meta["box"]
        rho, kap = p.meta["corridor"]
        x = 20 * rng.standard_normal(p.dim)
        w = p.phi2.prox(x, 0.3)
        nU = p.meta["nU"]
        np.testing.assert_array_equal(w[:nU], np.clip(x[:nU], lo[:nU], hi[:nU]))
        soft = np.isfinite(rho)
        np.testing.assert_allclose(w[soft], prox_soft_corridor(x[soft], 0.3, rho[soft],
                                                               kap[soft]))
        assert np.isfinite(p.phi2.value(w))

    @pytest.mark.parametrize("bad", [dict(Q=[[1.0, 0.1], [0.1, 1.0]]), dict(R=[[-1.0]])])
    def test_rejects_bad_weights(self, bad):
        A, B = double_integrator()
        kw = dict(A=A, B=B, Q=np.eye(2), R=np.eye(1), x_ref=np.zeros(2), N=3,
                  u_lo=[-1.0], u_hi=[1.0])
        kw.update(bad)
        with pytest.raises(ConfigError):
            build_mpc(MpcSpec(**kw))


class TestGenerate:
    @pytest.mark.parametrize("family", ["sparse_lsq", "spca", "consensus_spca", "mpc"])
    def test_deterministic(self, family):
        a = generate_synthetic(family, None, 7)
        b = generate_synthetic(family, None, 7)
        assert repr(a) == repr(b)

    def test_default_sparse_lsq_dims(self):
        spec = generate_synthetic("sparse_lsq", None, 0)
        assert spec.A.shape == (100, 500) and spec.r == 0.1
        assert np.count_nonzero(spec.x_hat) == 50
        np.testing.assert_allclose(spec.b, spec.A @ spec.x_hat)

    def test_spca_columns_centered(self):
        spec = generate_synthetic("spca", {"m": 50, "n": 8, "k": 3}, 1)
        np.testing.assert_allclose(spec.W.mean(axis=0), 0, atol=1e-12)
        assert np.count_nonzero(spec.v_hat) == 3

    def test_consensus_agents(self):
        spec = generate_synthetic("consensus_spca", {"N": 3, "m": 30, "n": 6}, 0)
        assert spec.N == 3 and sum(W.shape[0] for W in spec.blocks()) == 30

    @pytest.mark.parametrize("family,dims", [("nope", None), ("mpc", {"bogus": 1})])
    def test_errors(self, family, dims):
        with pytest.raises(ConfigError):
            generate_synthetic(family, dims, 0)
