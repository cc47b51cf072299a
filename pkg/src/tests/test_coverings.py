import math
from unittest import TestCase

import numpy as np

from dilations.errors import InvalidInput, KindMismatch, DimensionMismatch
from dilations.models import CoveringKind, ProbeSide
from dilations.tools.coverings import induced_covering, sample_members, base_sample, covers, admissibility_gap, \
    weak_equivalence_counts, weakly_equivalent, neighbourhood, required_order, subordination_index, subordinated
from dilations.tools.quasinorm import build_ellipsoid, shell_indices, ratios_bounded
from tests.matrices import COUNTEREXAMPLE_A, COUNTEREXAMPLE_B, SPLIT_A, equivalent_pairs, coarse_pairs, \
    inequivalent_pairs

SHEAR = np.array([[2.0, 1.0], [0.0, 3.0]])


class InducedCoveringTest(TestCase):
    def test_homogeneous_defaults(self):
        covering = induced_covering(2 * np.eye(2))
        self.assertEqual(covering.shell_bounds, (0, 1))
        self.assertEqual(covering.width, 1)
        self.assertEqual(covering.index_range, (-100, 100))
        self.assertEqual(covering.shells(-3), (-3, -2))

    def test_inhomogeneous_defaults(self):
        covering = induced_covering(2 * np.eye(2), CoveringKind.INHOMOGENEOUS)
        self.assertAlmostEqual(covering.base_annulus[1], 6.0)
        self.assertEqual(covering.shell_bounds, (0, 1))
        self.assertEqual(covering.index_range, (0, 100))
        self.assertEqual(covering.shells(0), (-math.inf, 1))
        self.assertEqual(covering.shells(2), (2, 3))

    def test_invalid_coverings(self):
        with self.assertRaises(InvalidInput):
            induced_covering(2 * np.eye(2), a=2.0, b=1.0)
        with self.assertRaises(InvalidInput):
            induced_covering(2 * np.eye(2), CoveringKind.INHOMOGENEOUS, index_range=(-1, 5))
        with self.assertRaises(InvalidInput):
            # rho jumps from 1 straight to 4
            induced_covering(2 * np.eye(2), a=1.5, b=3.0)

    def test_sampled_members_lie_in_their_shells(self):
        covering = induced_covering(SHEAR, index_range=(-5, 5))
        q = covering.quasi_norm
        for j in [-4, 0, 3]:
            X = sample_members(covering, j, 50, seed=2)
            self.assertTrue(np.all(covering.contains(j, shell_indices(q, X))))

    def test_central_set_sample(self):
        covering = induced_covering(SHEAR, CoveringKind.INHOMOGENEOUS, index_range=(0, 5))
        shells = shell_indices(covering.quasi_norm, sample_members(covering, 0, 50, seed=2))
        lo, hi = covering.shell_bounds
        self.assertTrue(np.all(shells <= hi))
        self.assertTrue(np.all(shells >= hi - 5))
        self.assertEqual(base_sample(covering, 50, seed=2).shape, (2, 52))

    def test_covers(self):
        X = np.array([[1e-9, 1.0, 1e9], [0.0, 0.0, 0.0]])
        homogeneous = induced_covering(2 * np.eye(2), index_range=(-3, 3))
        inhomogeneous = induced_covering(2 * np.eye(2), CoveringKind.INHOMOGENEOUS, index_range=(0, 3))
        self.assertEqual(covers(homogeneous, X).tolist(), [False, True, False])
        self.assertEqual(covers(inhomogeneous, X).tolist(), [True, True, False])


class AdmissibilityTest(TestCase):
    def test_one_determinant_wide_annulus(self):
        self.assertEqual(admissibility_gap(induced_covering(SHEAR, index_range=(-5, 5))), 1)

    def test_three_determinants_wide_annulus(self):
        self.assertEqual(admissibility_gap(induced_covering(SHEAR, b=6.0 ** 3, index_range=(-5, 5))), 3)

    def test_inhomogeneous_gap(self):
        covering = induced_covering(SHEAR, CoveringKind.INHOMOGENEOUS, index_range=(0, 6))
        self.assertEqual(admissibility_gap(covering), 2)


class WeakEquivalenceTest(TestCase):
    def test_identical_dilations(self):
        table = weak_equivalence_counts(2 * np.eye(2), 2 * np.eye(2), R=3, range=50)
        self.assertEqual(table.max_J_count, 3)
        self.assertEqual(table.max_I_count, 3)
        self.assertEqual(len(table.rows), 101)
        self.assertEqual(table.rows[50], (0, 3, (-1, 0, 1)))

    def test_r_four_stays_small(self):
        table = weak_equivalence_counts(2 * np.eye(2), 2 * np.eye(2), R=4, range=50)
        self.assertLessEqual(table.max_J_count, 5)

    def test_positive_side_rows(self):
        table = weak_equivalence_counts(SPLIT_A, SPLIT_A @ SPLIT_A, R=10, range=50, side=ProbeSide.POSITIVE_ONLY)
        self.assertEqual(len(table.rows), 51)
        self.assertEqual(table.rows[0][0], 0)

    def test_counterexample_counts_grow(self):
        short = weak_equivalence_counts(COUNTEREXAMPLE_A, COUNTEREXAMPLE_B, R=10, range=50)
        long = weak_equivalence_counts(COUNTEREXAMPLE_A, COUNTEREXAMPLE_B, R=10, range=200)
        self.assertGreater(long.max_J_count - short.max_J_count, 2)
        self.assertFalse(weakly_equivalent(COUNTEREXAMPLE_A, COUNTEREXAMPLE_B, R=10, range=50))

    def test_shear_counts_do_not_drift_with_the_range(self):
        A = np.array([[3.0, 1.0], [0.0, 2.0]])
        short = weak_equivalence_counts(A, A @ A, R=10, range=50)
        long = weak_equivalence_counts(A, A @ A, R=10, range=200)
        self.assertEqual((short.max_J_count, short.max_I_count), (7, 4))
        self.assertEqual((long.max_J_count, long.max_I_count), (7, 4))
        # witnesses j of row i are 2i - m with |m| <= 3
        self.assertEqual(long.rows[150], (-50, 7, tuple(range(-103, -96))))
        self.assertTrue(weakly_equivalent(A, A @ A, R=10, range=50))

    def test_invalid_parameters(self):
        with self.assertRaises(InvalidInput):
            weak_equivalence_counts(2 * np.eye(2), 2 * np.eye(2), R=1.0, range=50)
        with self.assertRaises(InvalidInput):
            weak_equivalence_counts(2 * np.eye(2), 2 * np.eye(2), R=2.0, range=10)
        with self.assertRaises(DimensionMismatch):
            weak_equivalence_counts(2 * np.eye(2), 2 * np.eye(3), R=2.0, range=50)


class NeighbourhoodTest(TestCase):
    def setUp(self):
        self.homogeneous = induced_covering(2 * np.eye(2))
        self.inhomogeneous = induced_covering(2 * np.eye(2), CoveringKind.INHOMOGENEOUS)

    def test_neighbourhood(self):
        self.assertEqual(neighbourhood(self.homogeneous, 5, 2), (3, 8))
        self.assertEqual(neighbourhood(self.inhomogeneous, 1, 1), (-math.inf, 3))
        self.assertEqual(neighbourhood(self.inhomogeneous, 4, 1), (3, 6))

    def test_required_order(self):
        self.assertEqual(required_order(self.homogeneous, 3, 4, 10), 0)
        self.assertEqual(required_order(self.homogeneous, 3, 8, 10), 2)
        self.assertIsNone(required_order(self.homogeneous, 0, 30, 10))
        self.assertEqual(required_order(self.inhomogeneous, -20, 1, 10), 0)

    def test_thin_annulus_never_overlaps(self):
        thin = induced_covering(2 * np.eye(2), a=1.0, b=1.5)
        self.assertEqual(thin.width, 0)
        self.assertIsNone(required_order(thin, 0, 1, 5))


class SubordinationTest(TestCase):
    def test_self_subordination(self):
        covering = induced_covering(SHEAR, index_range=(-3, 3))
        self.assertEqual(subordination_index(covering, covering), 0)
        central = induced_covering(SHEAR, CoveringKind.INHOMOGENEOUS, index_range=(0, 5))
        self.assertEqual(subordination_index(central, central), 0)

    def test_mismatches(self):
        with self.assertRaises(KindMismatch):
            subordination_index(induced_covering(SHEAR), induced_covering(SHEAR, CoveringKind.INHOMOGENEOUS))
        with self.assertRaises(DimensionMismatch):
            subordination_index(induced_covering(2 * np.eye(2)), induced_covering(2 * np.eye(3)))

    def test_counterexample_index_grows(self):
        qA, qB = build_ellipsoid(COUNTEREXAMPLE_A), build_ellipsoid(COUNTEREXAMPLE_B)
        covP = induced_covering(COUNTEREXAMPLE_B, quasi_norm=qB)
        short = subordination_index(induced_covering(COUNTEREXAMPLE_A, index_range=(-4, 4), quasi_norm=qA), covP,
                                    k_max=50)
        long = subordination_index(induced_covering(COUNTEREXAMPLE_A, index_range=(-1024, 1024), quasi_norm=qA),
                                   covP, k_max=50)
        self.assertIsNotNone(short)
        self.assertIsNotNone(long)
        self.assertGreater(long, short)

    def test_exponential_divergence_leaves_every_neighbourhood(self):
        covQ = induced_covering(np.diag([3.0, 2.0]), index_range=(-100, 100))
        covP = induced_covering(np.diag([2.0, 3.0]))
        self.assertIsNone(subordination_index(covQ, covP, k_max=25))


class IndicatorAgreementTest(TestCase):
    """Every finite-scale indicator agrees with the normal form verdicts on the fixed corpus"""

    @classmethod
    def setUpClass(cls):
        cls.corpus = [(A, B, True, True) for A, B in equivalent_pairs()] + \
                     [(A, B, False, True) for A, B in coarse_pairs()] + \
                     [(A, B, False, False) for A, B in inequivalent_pairs()]

    def test_corpus_size(self):
        self.assertEqual(len(self.corpus), 20)

    def test_weak_equivalence_counts(self):
        for A, B, equivalent, coarse in self.corpus:
            with self.subTest(A=A.tolist(), B=B.tolist()):
                self.assertEqual(weakly_equivalent(A, B, R=10, range=50, side=ProbeSide.TWO_SIDED), equivalent)
                self.assertEqual(weakly_equivalent(A, B, R=10, range=50, side=ProbeSide.POSITIVE_ONLY), coarse)

    def test_subordination(self):
        for A, B, equivalent, coarse in self.corpus:
            with self.subTest(A=A.tolist(), B=B.tolist()):
                self.assertEqual(subordinated(A, B, CoveringKind.HOMOGENEOUS, range=4, growth_factor=256),
                                 equivalent)
                self.assertEqual(subordinated(A, B, CoveringKind.INHOMOGENEOUS, range=4, growth_factor=256),
                                 coarse)

    def test_quasi_norm_ratios(self):
        for A, B, equivalent, coarse in self.corpus:
            with self.subTest(A=A.tolist(), B=B.tolist()):
                qA, qB = build_ellipsoid(A), build_ellipsoid(B)
                self.assertEqual(ratios_bounded(qA, qB, n_samples=100), equivalent)
                self.assertEqual(ratios_bounded(qA, qB, n_samples=100, far_only=True), coarse)
