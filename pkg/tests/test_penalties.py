"""
Tests for the penalty strategies and their registry.
"""

import unittest

import numpy as np

from cfkit.penalties import (
    PENALTIES,
    BoxL1Penalty,
    GroupL2Penalty,
    L1Penalty,
    OverlappingSparseGroupPenalty,
    PartialPenalty,
    SparseGroupPenalty,
    ZeroPenalty,
    get_penalty,
)
from cfkit.prox import GroupStructure, prox_group_l2, prox_l1, prox_sparse_group


class TestPenalties(unittest.TestCase):
    """Values and step-scaled prox maps."""

    def _make_groups(self, overlapping=False):
        if overlapping:
            return GroupStructure.from_lists([[0, 1, 2], [2, 3, 4], [4, 5]], 6)
        return GroupStructure.from_lists([[0, 1], [2, 3, 4], [5]], 6)

    def test_zero_penalty(self):
        """R = 0 and its prox is the identity."""
        v = np.array([1.0, -2.0])
        p = ZeroPenalty()
        self.assertEqual(p.value(v), 0.0)
        np.testing.assert_array_equal(p.prox(v, 0.3), v)

    def test_l1_prox_scales_with_step(self):
        """Prox_{step * gamma ||.||_1} is the soft threshold at step * gamma."""
        v = np.array([3.0, -0.1, 1.0])
        p = L1Penalty(2.0)
        np.testing.assert_array_equal(p.prox(v, 0.25), prox_l1(v, 0.5))
        self.assertAlmostEqual(p.value(v), 8.2)

    def test_box_value_outside_is_infinite(self):
        """The box indicator makes R infinite outside the box."""
        p = BoxL1Penalty(1.0, 0.0, 1.0)
        self.assertEqual(p.value(np.array([0.5, 2.0])), np.inf)
        self.assertAlmostEqual(p.value(np.array([0.5, 1.0])), 1.5)
        np.testing.assert_array_equal(p.prox(np.array([5.0, -5.0]), 1.0), [1.0, 0.0])

    def test_group_l2_matches_groupwise_prox(self):
        """GroupL2Penalty applies the block soft threshold per group."""
        rng = np.random.default_rng(1)
        g = self._make_groups()
        p = GroupL2Penalty(g, 0.8)
        v = rng.normal(size=6)
        out = p.prox(v, 0.5)
        for grp in g.groups:
            idx = list(grp)
            np.testing.assert_array_equal(out[idx], prox_group_l2(v[idx], 0.4))
        expected = 0.8 * sum(np.linalg.norm(v[list(grp)]) for grp in g.groups)
        self.assertAlmostEqual(p.value(v), expected)

    def test_sparse_group_matches_groupwise_prox(self):
        """SparseGroupPenalty applies the closed form per group."""
        rng = np.random.default_rng(2)
        g = self._make_groups()
        p = SparseGroupPenalty(g, 0.6, 0.3)
        v = rng.normal(size=6) * 2
        out = p.prox(v, 0.5)
        for grp in g.groups:
            idx = list(grp)
            np.testing.assert_array_equal(out[idx], prox_sparse_group(v[idx], 0.3, 0.15))

    def test_sparse_group_without_l1_equals_group_lasso(self):
        """gamma2 = 0 reproduces GroupL2Penalty exactly."""
        rng = np.random.default_rng(3)
        g = self._make_groups()
        v = rng.normal(size=6)
        a = SparseGroupPenalty(g, 0.7, 0.0)
        b = GroupL2Penalty(g, 0.7)
        np.testing.assert_array_equal(a.prox(v, 0.9), b.prox(v, 0.9))
        self.assertEqual(a.value(v), b.value(v))

    def test_disjoint_penalties_reject_overlap(self):
        """Closed-form penalties need disjoint groups."""
        g = self._make_groups(overlapping=True)
        with self.assertRaises(ValueError):
            GroupL2Penalty(g, 1.0)
        with self.assertRaises(ValueError):
            SparseGroupPenalty(g, 1.0, 1.0)

    def test_overlapping_penalty_records_dual_block(self):
        """The overlapping penalty keeps the last dual certificate."""
        g = self._make_groups(overlapping=True)
        p = OverlappingSparseGroupPenalty(g, 0.5, 0.2)
        self.assertIsNone(p.last_block)
        p.prox(np.linspace(-2, 2, 6), 0.5)
        self.assertIsNotNone(p.last_block)
        self.assertEqual(p.last_block.gamma1, 0.25)
        self.assertTrue(p.last_block.is_feasible())

    def test_partial_penalty_leaves_tail_alone(self):
        """Trailing coordinates pass through untouched and add nothing to R."""
        inner = L1Penalty(1.0)
        p = PartialPenalty(inner, 2)
        v = np.array([3.0, -0.5, 7.0])
        np.testing.assert_array_equal(p.prox(v, 1.0), [2.0, 0.0, 7.0])
        self.assertEqual(p.value(v), 3.5)

    # -- Registry --

    def test_registry_builds_each_flavor(self):
        """get_penalty returns the registered class for every flavor."""
        g = self._make_groups()
        self.assertIsInstance(get_penalty("gl", g, 1.0), GroupL2Penalty)
        self.assertIsInstance(get_penalty("sgl", g, 1.0, 0.5), SparseGroupPenalty)
        self.assertIsInstance(get_penalty("osgl", g, 1.0, 0.5, inner_tol=1e-9), OverlappingSparseGroupPenalty)
        self.assertEqual(set(PENALTIES), {"gl", "sgl", "osgl"})

    def test_registry_rejects_unknown_and_gl_with_l1(self):
        """Unknown names and a group Lasso l1 weight are errors."""
        g = self._make_groups()
        with self.assertRaises(ValueError):
            get_penalty("fused", g, 1.0)
        with self.assertRaises(ValueError):
            get_penalty("gl", g, 1.0, 0.5)


if __name__ == "__main__":
    unittest.main()
