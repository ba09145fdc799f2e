"""
Tests for the ISTA and FISTA baselines and how they compare with C-FISTA.
"""

import math
import unittest

import numpy as np

from cfkit.baselines import MomentumState, fista_step, ista_step, solve_fista, solve_ista
from cfkit.data import GenSpec, generate, make_groups
from cfkit.engine import STATUS_MAX_ITERS, SolverConfig, solve
from cfkit.models import LassoOracle, lasso_constants
from cfkit.penalties import GroupL2Penalty, L1Penalty, OverlappingSparseGroupPenalty, SparseGroupPenalty, ZeroPenalty
from cfkit.session import SolveSession


def _make_unit_quadratic():
    """H(x) = x^2 / 2 in one dimension."""
    return LassoOracle(np.eye(1), np.zeros(1), 1.0, 1.0)


def _make_ill_conditioned(seed=3):
    """Least squares whose columns are scaled over a decade."""
    rng = np.random.default_rng(seed)
    m, n = 60, 12
    a = rng.standard_normal((m, n)) * np.geomspace(1.0, 10.0, n)
    b = a @ np.repeat([1.0, 0.0, -1.0, 0.0], 3) + 0.01 * rng.standard_normal(m)
    mu, lip = lasso_constants(a, None, None)
    return LassoOracle(a, b, mu, lip)


def _iterations_to_gap(result, f_star, rel):
    """First iteration whose objective is within rel of f_star, or inf."""
    target = rel * max(1.0, abs(f_star))
    for r in result.trace:
        if r.objective - f_star <= target:
            return r.k
    return math.inf


class TestSteps(unittest.TestCase):
    """Single ISTA and FISTA steps."""

    def test_ista_unit_quadratic(self):
        """One step with L = 1 lands on the minimizer of x^2/2."""
        x = ista_step(np.array([2.0]), _make_unit_quadratic(), ZeroPenalty(), 1.0)
        np.testing.assert_array_equal(x, [0.0])

    def test_ista_fixed_point(self):
        """A prox-gradient fixed point does not move."""
        oracle = _make_unit_quadratic()
        x = np.array([0.0])
        np.testing.assert_array_equal(ista_step(x, oracle, L1Penalty(0.5), 1.0), x)

    def test_ista_rejects_nonpositive_lipschitz(self):
        """L must be positive."""
        with self.assertRaises(ValueError):
            ista_step(np.zeros(1), _make_unit_quadratic(), ZeroPenalty(), 0.0)

    def test_first_fista_step_equals_ista(self):
        """With t = 1 there is no momentum yet."""
        oracle = _make_ill_conditioned()
        lip = oracle.constants.lipschitz
        x = np.linspace(-1, 1, 12)
        s = fista_step(MomentumState(x, x.copy(), 1.0), oracle, L1Penalty(0.3), lip)
        np.testing.assert_array_equal(s.x, ista_step(x, oracle, L1Penalty(0.3), lip))
        np.testing.assert_array_equal(s.x_prev, x)
        self.assertAlmostEqual(s.t, 0.5 * (1 + math.sqrt(5)))

    def test_fista_stationary_at_optimum(self):
        """x = x_prev at the optimum stays put while t keeps growing."""
        oracle = _make_unit_quadratic()
        s = MomentumState(np.zeros(1), np.zeros(1), 3.0)
        out = fista_step(s, oracle, ZeroPenalty(), 1.0)
        np.testing.assert_array_equal(out.x, [0.0])
        self.assertGreater(out.t, s.t)

    def test_momentum_state_validation(self):
        """t below one is rejected."""
        with self.assertRaises(ValueError):
            MomentumState(np.zeros(1), np.zeros(1), 0.5)


class TestSolvers(unittest.TestCase):
    """Full baseline solves."""

    def test_baselines_reach_least_squares(self):
        """Both baselines converge on a well-conditioned quadratic."""
        rng = np.random.default_rng(5)
        a = rng.standard_normal((40, 6))
        b = rng.standard_normal(40)
        mu, lip = lasso_constants(a, None, None)
        oracle = LassoOracle(a, b, mu, lip)
        x_ls = np.linalg.lstsq(a, b, rcond=None)[0]
        for solver in (solve_ista, solve_fista):
            result = solver(oracle, ZeroPenalty(), np.zeros(6), SolverConfig(tolerance=1e-10))
            self.assertTrue(result.converged, solver.__name__)
            np.testing.assert_allclose(result.state.x, x_ls, atol=1e-8)

    def test_baseline_params_use_rl_step(self):
        """The step is 1/(rL) and theta is zero."""
        oracle = _make_ill_conditioned()
        result = solve_ista(oracle, ZeroPenalty(), np.zeros(12), SolverConfig(max_iters=2, tolerance=0.0))
        self.assertEqual(result.params.step, 1.0 / oracle.constants.lipschitz)
        self.assertEqual(result.params.theta, 0.0)
        self.assertEqual(result.status, STATUS_MAX_ITERS)
        self.assertEqual(len(result.trace), 2)

    def test_deterministic(self):
        """Repeated FISTA runs give identical traces."""
        oracle = _make_ill_conditioned()
        cfg = SolverConfig(max_iters=50, tolerance=0.0)
        a = solve_fista(oracle, L1Penalty(0.2), np.zeros(12), cfg)
        b = solve_fista(oracle, L1Penalty(0.2), np.zeros(12), cfg)
        self.assertEqual([r.objective for r in a.trace], [r.objective for r in b.trace])


class TestOrdering(unittest.TestCase):
    """Iterations needed to reach a given objective gap on ill-conditioned instances."""

    def _compare(self, penalty, fista_cap, ista_cap):
        oracle = _make_ill_conditioned()
        x0 = np.zeros(oracle.dim)
        ref = solve(oracle, penalty, x0, cfg=SolverConfig(tolerance=1e-12, record_trace=False, stall_window=200))
        f_star = ref.final_objective
        cfista = solve(oracle, penalty, x0, cfg=SolverConfig(tolerance=1e-9, max_iters=2000))
        fista = solve_fista(oracle, penalty, x0, SolverConfig(tolerance=0.0, max_iters=fista_cap))
        ista = solve_ista(oracle, penalty, x0, SolverConfig(tolerance=0.0, max_iters=ista_cap))
        return cfista, fista, ista, f_star

    def test_cfista_beats_fista_beats_ista(self):
        """GL and SGL: C-FISTA reaches a tight gap first, FISTA beats ISTA to a loose one."""
        groups = make_groups(12, 3)
        for penalty in (GroupL2Penalty(groups, 1.0), SparseGroupPenalty(groups, 1.0, 0.5)):
            cfista, fista, ista, f_star = self._compare(penalty, fista_cap=5000, ista_cap=5000)
            tight_c = _iterations_to_gap(cfista, f_star, 1e-6)
            tight_f = _iterations_to_gap(fista, f_star, 1e-6)
            tight_i = _iterations_to_gap(ista, f_star, 1e-6)
            self.assertLess(tight_c, tight_f)
            self.assertLess(tight_c, tight_i)
            self.assertLess(_iterations_to_gap(fista, f_star, 1e-3), _iterations_to_gap(ista, f_star, 1e-3))

    def test_cfista_beats_fista_on_overlapping_groups(self):
        """OSGL: C-FISTA reaches the tight gap in fewer iterations than FISTA."""
        penalty = OverlappingSparseGroupPenalty(make_groups(12, 3, 1), 1.0, 0.5)
        cfista, fista, _, f_star = self._compare(penalty, fista_cap=1500, ista_cap=1)
        self.assertLess(_iterations_to_gap(cfista, f_star, 1e-6), _iterations_to_gap(fista, f_star, 1e-6))


class TestDeskOrdering(unittest.TestCase):
    """Iterations to an absolute objective gap of 1e-10 on the 800 x 400 generated instances."""

    GAP = 1e-10

    def _iterations(self, flavor, caps, stride=0):
        d = generate(GenSpec(m=800, n=400, group_size=10, overlap_stride=stride, seed=7))
        f_star = SolveSession(d, flavor=flavor).reference().objective
        counts = {}
        for algorithm, cap in caps.items():
            cfg = SolverConfig(tolerance=0.0, max_iters=cap)
            result = SolveSession(d, algorithm=algorithm, flavor=flavor, config=cfg).run()
            hits = [r.k for r in result.trace if r.objective - f_star <= self.GAP]
            counts[algorithm] = hits[0] if hits else math.inf
        return counts

    def test_group_flavors(self):
        """GL and SGL: C-FISTA < FISTA < ISTA."""
        for flavor in ("gl", "sgl"):
            n = self._iterations(flavor, {"cfista": 1000, "fista": 1000, "ista": 1000})
            self.assertLess(n["cfista"], n["fista"], flavor)
            self.assertLess(n["fista"], n["ista"], flavor)
            self.assertLess(n["ista"], math.inf, flavor)

    def test_overlapping_groups(self):
        """OSGL: C-FISTA reaches the gap well before either baseline."""
        n = self._iterations("osgl", {"cfista": 300, "fista": 300, "ista": 300}, stride=5)
        self.assertLess(n["cfista"], math.inf)
        self.assertLess(n["cfista"], n["fista"])
        self.assertLess(n["cfista"], n["ista"])


if __name__ == "__main__":
    unittest.main()
