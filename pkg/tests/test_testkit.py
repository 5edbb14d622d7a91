import numpy as np
import pytest
from scipy.optimize import minimize

from splitls.core import ConfigError, drs_oracle, dre_eval
from splitls.problems import build_sparse_lsq, generate_synthetic, prox_l_half
from splitls.testkit import (ScalarProxOracle, box_qp_minimizer, bruteforce_scalar_prox,
                             exhaustive_sparse_sphere, quadratic_box_pair,
                             run_equivalence_check, run_selfdual_check, sweep_invariants)


@pytest.fixture(scope="module")
def box_pair():
    H = np.array([[2.0, 0.5], [0.5, 1.0]])
    return quadratic_box_pair(H, np.array([1.5, -2.0]), np.array([-1.0, -1.0]),
                              np.array([1.0, 0.5]))


@pytest.fixture(scope="module")
def consensus_spec():
    return generate_synthetic("consensus_spca", {"N": 3, "m": 60, "n": 20, "k": 4}, 5)


class TestBruteforce:
    @pytest.mark.parametrize("x", [-3.0, 0.0, 0.4, 7.5])
    def test_zero_function(self, x):
        assert bruteforce_scalar_prox(lambda w: np.zeros_like(w), x, 0.8) == pytest.approx(
            x, abs=1e-9)

    @pytest.mark.parametrize("x", [-3.0, -0.5, 0.0, 0.2, 2.0])
    def test_absolute_value(self, x):
        w = bruteforce_scalar_prox(np.abs, x, 0.6)
        assert w == pytest.approx(np.sign(x) * max(abs(x) - 0.6, 0.0), abs=1e-10)

    def test_l_half(self, rng):
        for x in rng.uniform(-4, 4, 50):
            w = bruteforce_scalar_prox(lambda t: np.sqrt(np.abs(t)), x, 0.5)
            assert abs(w - prox_l_half(np.array([x]), 0.5)[0]) <= 1e-8

    @pytest.mark.parametrize("x,gamma", [(5.0, 0.1), (-2.0, 3.0), (0.01, 1.0)])
    def test_minimizer_strictly_inside_bracket(self, x, gamma):
        oracle = ScalarProxOracle(lambda t: np.sqrt(np.abs(t)))
        lo, hi = oracle.bracket(x, gamma)
        w = oracle(x, gamma)
        assert lo < w < hi
        half = 10 * gamma * (1 + abs(x))
        assert lo <= x - half and x + half <= hi
        assert lo <= -half and half <= hi

    def test_bracket_reaches_far_domain(self):
        box = lambda t: np.where((t >= -1.0) & (t <= 2.0), 0.0, np.inf)
        assert bruteforce_scalar_prox(box, -6.0, 0.05, kinks=(-1.0, 2.0)) == -1.0
        with pytest.raises(ValueError):
            bruteforce_scalar_prox(box, -6.0, 0.05, kinks=())

    def test_scalar_only_function(self):
        w = bruteforce_scalar_prox(lambda t: abs(float(t)), 2.0, 0.5)
        assert w == pytest.approx(1.5, abs=1e-10)


class TestExhaustiveSphere:
    def test_hand_value(self):
        np.testing.assert_allclose(exhaustive_sparse_sphere(np.array([3.0, 0, 4, 0]), 2),
                                   [0.6, 0, 0.8, 0])

    def test_tie(self):
        np.testing.assert_array_equal(exhaustive_sparse_sphere(np.array([-2.0, 2.0, 1.0]), 1),
                                      [-1.0, 0.0, 0.0])


class TestSelfDual:
    @pytest.mark.parametrize("method", ["closed", "moreau"])
    def test_quadratic_box(self, box_pair, method):
        mu = box_pair.problem.regime.modulus
        assert run_selfdual_check(box_pair, 2.0 / mu, 100, rng=0, method=method) <= 1e-10

    def test_one_dimensional(self):
        pair = quadratic_box_pair([[1.0]], [2.0], [-1.0], [1.0])
        assert run_selfdual_check(pair, 1.5, 100, rng=1) <= 1e-10

    def test_rejects_small_stepsize(self, box_pair):
        mu = box_pair.problem.regime.modulus
        with pytest.raises(ConfigError):
            run_selfdual_check(box_pair, 1.0 / mu, 5)

    def test_fixed_point(self, box_pair):
        p = box_pair.problem
        gamma = 2.0 / p.regime.modulus
        H = np.array([[2.0, 0.5], [0.5, 1.0]])
        xs, _ = box_qp_minimizer(H, np.array([1.5, -2.0]), np.array([-1.0, -1.0]),
                                 np.array([1.0, 0.5]))
        # s = x* + gamma * grad phi1(x*) is a fixed point
        s = xs + gamma * p.phi1.grad(xs)
        u, v = drs_oracle(p, s, gamma)
        np.testing.assert_allclose(u, v, atol=1e-12)
        assert dre_eval(p, s, u, v, gamma) == pytest.approx(p.phi(xs), abs=1e-12)


class TestEquivalence:
    def test_nominal(self, consensus_spec):
        rep = run_equivalence_check(consensus_spec, None, "nominal", iters=100)
        assert rep.iterations == 100
        assert rep.max_dev <= 1e-10

    def test_lbfgs(self, consensus_spec):
        rep = run_equivalence_check(consensus_spec, None, "lbfgs(5)", iters=100)
        assert rep.max_dev <= 1e-8

    def test_zero_iterations(self, consensus_spec):
        rep = run_equivalence_check(consensus_spec, None, "lbfgs", iters=0)
        assert rep.iterations == 0 and rep.max_dev == 0.0


class TestInvariants:
    def test_quadratic_sandwich_is_tight(self, quad_zero_problem):
        # s = 1, gamma = 1/2: u = 2/3, v = 1/3 and the lower bound equals DRE = 1/9
        s = np.array([1.0])
        u, v = drs_oracle(quad_zero_problem, s, 0.5)
        lower = quad_zero_problem.phi(v) + (1 - 0.5) / (2 * 0.5) * float((v - u) @ (v - u))
        assert lower == pytest.approx(1 / 9, abs=1e-15)
        assert dre_eval(quad_zero_problem, s, u, v, 0.5) == pytest.approx(lower, abs=1e-15)
        assert quad_zero_problem.phi(u) >= 1 / 9
        rep = sweep_invariants(quad_zero_problem, 0.5, 200, rng=0)
        assert rep.worst <= 1e-12

    def test_zero_residual_collapses(self, quad_zero_problem):
        u, v = drs_oracle(quad_zero_problem, np.zeros(1), 0.5)
        dre = dre_eval(quad_zero_problem, np.zeros(1), u, v, 0.5)
        assert dre == quad_zero_problem.phi(u) == quad_zero_problem.phi(v) == 0.0

    def test_l_half_instance(self):
        prob = build_sparse_lsq(generate_synthetic("sparse_lsq", {"m": 10, "n": 25, "k": 3}, 2))
        gamma = 0.9 / prob.regime.L
        rep = sweep_invariants(prob, gamma, 1000, rng=3)
        assert rep.samples == 1000 and rep.worst <= 1e-9

    def test_strongly_convex_lower_bound(self, box_pair):
        p = box_pair.problem
        H = np.array([[2.0, 0.5], [0.5, 1.0]])
        xs, fs = box_qp_minimizer(H, np.array([1.5, -2.0]), np.array([-1.0, -1.0]),
                                  np.array([1.0, 0.5]))
        rep = sweep_invariants(p, 3.0 / p.regime.modulus, 1000, rng=4, x_star=xs,
                               inf_phi=fs)
        assert rep.qlb <= 1e-9

    def test_box_qp_minimizer(self, rng):
        for _ in range(5):
            M = rng.standard_normal((3, 3))
            H = M @ M.T + 0.5 * np.eye(3)
            a = 2 * rng.standard_normal(3)
            lo, hi = -np.ones(3), np.ones(3)
            xs, fs = box_qp_minimizer(H, a, lo, hi)
            ref = minimize(lambda x: 0.5 * (x - a) @ H @ (x - a), np.zeros(3),
                           jac=lambda x: H @ (x - a), bounds=list(zip(lo, hi)),
                           method="L-BFGS-B", options={"ftol": 1e-15, "gtol": 1e-12})
            assert fs <= ref.fun + 1e-12
            np.testing.assert_allclose(xs, ref.x, atol=1e-5)
