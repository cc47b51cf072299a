import math
from unittest import TestCase
from unittest.mock import patch

import numpy as np
from numpy.testing import assert_allclose

from dilations.errors import InvalidInput, DimensionMismatch, NotExpansive, NonPositiveSpectrum
from dilations.models import GrowthClass, ProbeSide, JobConfig, EquivalenceDecision
from dilations.tools.equivalence import epsilon, epsilon_floor, probe_products, boundedness_probe, positivize, \
    matrix_log_expansive, rescale_determinant, expansive_normal_form, decide_equivalent, decide_coarsely_equivalent, \
    eigenspace_consistency_check, classify_pair
from dilations.tools.linalg_core import spectrum, structured_exp
from tests.matrices import COUNTEREXAMPLE_A, COUNTEREXAMPLE_B, SPLIT_A, SPLIT_B, rotation_scaling, jordan_block, \
    random_expansive, conjugator, equivalent_pairs, coarse_pairs, inequivalent_pairs


class EpsilonTest(TestCase):
    def test_epsilon(self):
        self.assertAlmostEqual(epsilon(2 * np.eye(2), 4 * np.eye(2)), 0.5)
        self.assertAlmostEqual(epsilon(SPLIT_A, SPLIT_B), 1.0)

    def test_rational_floor_is_exact(self):
        self.assertEqual(epsilon_floor(0.5, 7), 3)
        self.assertEqual(epsilon_floor(0.5, -3), -2)
        self.assertEqual(epsilon_floor(1 / 3, 300), 100)
        self.assertEqual(epsilon_floor(0.1, 30), 3)

    def test_not_expansive(self):
        with self.assertRaises(NotExpansive):
            epsilon(np.eye(2), 2 * np.eye(2))


class ProbeTest(TestCase):
    def test_counterexample_products(self):
        for k, M, log_scale in probe_products(COUNTEREXAMPLE_A, COUNTEREXAMPLE_B, 100):
            assert_allclose(math.exp(log_scale) * M, [[1.0, k], [0.0, 1.0]], atol=1e-9)

    def test_counterexample_grows_linearly(self):
        probe = boundedness_probe(COUNTEREXAMPLE_A, COUNTEREXAMPLE_B, 200)
        self.assertEqual(probe.classification, GrowthClass.POLYNOMIAL)
        self.assertEqual(probe.degree, 1)
        self.assertAlmostEqual(probe.diagnostics["positive"]["slope_logk"], 1.0, delta=0.1)
        self.assertEqual(str(probe), "polynomial(degree=1)")
        self.assertEqual(probe.ks, tuple(range(1, 201)))

    def test_powers_are_bounded(self):
        probe = boundedness_probe(SPLIT_A, SPLIT_A @ SPLIT_A, side=ProbeSide.TWO_SIDED)
        self.assertTrue(probe.is_bounded)

    def test_swapped_moduli_grow_exponentially(self):
        probe = boundedness_probe(np.diag([3.0, 2.0]), np.diag([2.0, 3.0]), 100)
        self.assertEqual(probe.classification, GrowthClass.EXPONENTIAL)
        self.assertAlmostEqual(probe.rate, 1.5, places=6)

    def test_coarse_pair_is_bounded_on_one_side_only(self):
        B = np.array([[3.0, 1.0], [0.0, 2.0]])
        self.assertTrue(boundedness_probe(SPLIT_A, B, side=ProbeSide.POSITIVE_ONLY).is_bounded)
        two_sided = boundedness_probe(SPLIT_A, B, 100, side=ProbeSide.TWO_SIDED)
        self.assertEqual(two_sided.classification, GrowthClass.EXPONENTIAL)
        self.assertEqual(len(two_sided.ks), 201)
        self.assertEqual(two_sided.ks[100], 0)
        self.assertEqual(two_sided.log_norms[100], 0.0)

    def test_reflection_stays_bounded_on_both_sides(self):
        reflected = np.array([[-3.0, 1.0], [0.0, 2.0]])
        series = boundedness_probe(reflected, positivize(reflected), side=ProbeSide.TWO_SIDED)
        self.assertTrue(series.is_bounded)
        self.assertLess(max(abs(value) for value in series.log_norms), 3.0)
        decision = decide_equivalent(reflected, positivize(reflected))
        self.assertTrue(decision)
        self.assertTrue(decision.agrees)

    def test_k_max_too_small(self):
        with self.assertRaises(InvalidInput):
            boundedness_probe(SPLIT_A, SPLIT_B, 10)


class LogarithmTest(TestCase):
    def test_positivize(self):
        assert_allclose(positivize(rotation_scaling(2.0, 0.7)), 2 * np.eye(2), atol=1e-10)
        assert_allclose(positivize(np.diag([-3.0, 2.0])), np.diag([3.0, 2.0]), atol=1e-10)

    def test_positivize_keeps_the_determinant(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            A = random_expansive(rng, int(rng.integers(1, 5)))
            self.assertAlmostEqual(abs(np.linalg.det(positivize(A))) / abs(np.linalg.det(A)), 1.0, places=8)

    def test_exp_log_roundtrip(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            A = random_expansive(rng, int(rng.integers(1, 6)), positive=True)
            X = matrix_log_expansive(A)
            self.assertTrue(np.isrealobj(X))
            self.assertLessEqual(np.linalg.norm(structured_exp(X) - A, 2), 1e-9 * np.linalg.norm(A, 2))

    def test_negative_spectrum_has_no_real_logarithm_here(self):
        with self.assertRaises(NonPositiveSpectrum):
            matrix_log_expansive(np.diag([-3.0, 2.0]))

    def test_rescale_determinant(self):
        A = rescale_determinant(COUNTEREXAMPLE_A, 3.0)
        self.assertAlmostEqual(np.linalg.det(A), 3.0)
        with self.assertRaises(InvalidInput):
            rescale_determinant(COUNTEREXAMPLE_A, 1.0)


class NormalFormTest(TestCase):
    def test_known_normal_forms(self):
        assert_allclose(expansive_normal_form(2 * np.eye(2)).matrix, math.sqrt(2) * np.eye(2), atol=1e-12)
        assert_allclose(expansive_normal_form(rotation_scaling(2.0, 0.7)).matrix, math.sqrt(2) * np.eye(2),
                        atol=1e-10)
        assert_allclose(expansive_normal_form(COUNTEREXAMPLE_A).matrix,
                        math.sqrt(2) * np.array([[1.0, 0.5], [0.0, 1.0]]), atol=1e-10)

    def test_block_pattern(self):
        nf = expansive_normal_form(np.diag([4.0, 2.0]))
        self.assertAlmostEqual(nf.t_scale, 1 / 3)
        assert_allclose(nf.eigenvalues, [2 ** (2 / 3), 2 ** (1 / 3)])

    def test_provenance_identifies_the_input(self):
        self.assertEqual(expansive_normal_form(SPLIT_A).provenance, expansive_normal_form(SPLIT_A.copy()).provenance)
        self.assertNotEqual(expansive_normal_form(SPLIT_A).provenance, expansive_normal_form(SPLIT_B).provenance)

    def test_normal_form_contract(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            A = random_expansive(rng, int(rng.integers(1, 6)))
            nf = expansive_normal_form(A).matrix
            self.assertAlmostEqual(np.linalg.det(nf), 2.0, delta=1e-9)
            for value, _ in spectrum(nf).clusters:
                self.assertEqual(value.imag, 0)
                self.assertGreater(value.real, 1)
            assert_allclose(expansive_normal_form(nf).matrix, nf, atol=1e-7)
            for n in [2, 3]:
                assert_allclose(expansive_normal_form(np.linalg.matrix_power(A, n)).matrix, nf, atol=1e-6)

    def test_not_expansive(self):
        with self.assertRaises(NotExpansive):
            expansive_normal_form(np.diag([0.5, 3.0]))


class DecisionTest(TestCase):
    def test_equivalent_pairs(self):
        for A, B in equivalent_pairs():
            with self.subTest(A=A.tolist(), B=B.tolist()):
                self.assertTrue(decide_equivalent(A, B))
                self.assertTrue(decide_coarsely_equivalent(A, B))

    def test_coarse_pairs(self):
        for A, B in coarse_pairs():
            with self.subTest(A=A.tolist(), B=B.tolist()):
                self.assertFalse(decide_equivalent(A, B))
                self.assertTrue(decide_coarsely_equivalent(A, B))

    def test_inequivalent_pairs(self):
        for A, B in inequivalent_pairs():
            with self.subTest(A=A.tolist(), B=B.tolist()):
                self.assertFalse(decide_equivalent(A, B))
                self.assertFalse(decide_coarsely_equivalent(A, B))

    def test_split_pair_is_coarse_only_after_transposing(self):
        self.assertFalse(decide_coarsely_equivalent(SPLIT_A, SPLIT_B))
        self.assertTrue(decide_coarsely_equivalent(SPLIT_A.T, SPLIT_B.T))

    def test_margins(self):
        decision = decide_equivalent(jordan_block(2.0, 2), 2 * np.eye(2))
        self.assertGreater(decision.margin, 0.1)
        self.assertFalse(decision.oracle.is_bounded)
        self.assertTrue(decision.agrees)

    def test_verdicts_agree_with_growth_oracles(self):
        for A, B in equivalent_pairs() + coarse_pairs() + inequivalent_pairs():
            with self.subTest(A=A.tolist(), B=B.tolist()):
                self.assertTrue(decide_equivalent(A, B).agrees)
                self.assertTrue(decide_coarsely_equivalent(A, B).agrees)

    def test_conjugation_invariance(self):
        rng = np.random.default_rng(17)
        for A, B in equivalent_pairs() + coarse_pairs() + inequivalent_pairs():
            C = conjugator(rng, A.shape[0])
            C_inverse = np.linalg.inv(C)
            with self.subTest(A=A.tolist(), B=B.tolist()):
                self.assertEqual(decide_equivalent(C @ A @ C_inverse, C @ B @ C_inverse).equal,
                                 decide_equivalent(A, B).equal)
                self.assertEqual(decide_coarsely_equivalent(C @ A @ C_inverse, C @ B @ C_inverse).equal,
                                 decide_coarsely_equivalent(A, B).equal)

    def test_points_of_one_parameter_group_are_equivalent(self):
        rng = np.random.default_rng(23)
        for _ in range(8):
            X = matrix_log_expansive(random_expansive(rng, int(rng.integers(2, 4)), positive=True))
            t, s = rng.uniform(0.5, 2.5, 2)
            with self.subTest(t=t, s=s):
                decision = decide_equivalent(structured_exp(t * X), structured_exp(s * X))
                self.assertTrue(decision)
                self.assertTrue(decision.agrees)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            decide_equivalent(2 * np.eye(2), 2 * np.eye(3))
        with self.assertRaises(DimensionMismatch):
            decide_coarsely_equivalent(2 * np.eye(2), 2 * np.eye(3))


class EigenspaceTest(TestCase):
    def test_eigenspaces_cannot_see_the_counterexample(self):
        report = eigenspace_consistency_check(COUNTEREXAMPLE_A, COUNTEREXAMPLE_B)
        self.assertLessEqual(report.max_distance, 1e-8)
        full = eigenspace_consistency_check(COUNTEREXAMPLE_A, COUNTEREXAMPLE_B, coarse=False)
        self.assertLessEqual(full.max_distance, 1e-8)
        self.assertFalse(decide_coarsely_equivalent(COUNTEREXAMPLE_A, COUNTEREXAMPLE_B))

    def test_split_pair_filtrations_differ(self):
        report = eigenspace_consistency_check(SPLIT_A, SPLIT_B)
        self.assertAlmostEqual(report.max_distance, math.pi / 4)
        self.assertEqual(report.to_dict()["mode"], "coarse")


class ClassifyTest(TestCase):
    def test_counterexample(self):
        verdict = classify_pair(COUNTEREXAMPLE_A, COUNTEREXAMPLE_B)
        self.assertFalse(verdict.hom_besov_equal)
        self.assertFalse(verdict.inhom_besov_equal)
        self.assertFalse(verdict.hardy_equal)
        self.assertEqual(str(verdict.probes["A_B_two_sided"]), "polynomial(degree=1)")

    def test_split_pair(self):
        verdict = classify_pair(SPLIT_A, SPLIT_B)
        self.assertFalse(verdict.hom_besov_equal)
        self.assertTrue(verdict.inhom_besov_equal)
        self.assertFalse(verdict.hardy_equal)
        self.assertAlmostEqual(verdict.epsilon, 1.0)
        self.assertTrue(verdict.probes["AT_BT_positive_only"].is_bounded)

    def test_equivalent_pair(self):
        verdict = classify_pair(2 * np.eye(2), 3 * np.eye(2))
        self.assertTrue(verdict.hom_besov_equal and verdict.inhom_besov_equal and verdict.hardy_equal)
        self.assertAlmostEqual(verdict.epsilon, math.log(2) / math.log(3))
        report = verdict.to_dict()
        self.assertEqual(report["schema"], 1)
        self.assertNotIn("quasi_norms", report)

    def test_quasi_norm_evidence(self):
        config = JobConfig(command="classify", matrices={}, tol_eig=1e-6, tol_jordan=1e-8, tol_verdict=1e-7,
                           k_max=100, seed=3, r_ladder=[2.0], covering_range=50, compare_quasi_norms=True)
        report = classify_pair(SPLIT_A, SPLIT_B, config).to_dict()
        self.assertEqual(set(report["quasi_norms"]), {"ratio_low", "ratio_high", "ratio_low_far", "ratio_high_far",
                                                      "bounded", "bounded_at_infinity"})
        self.assertEqual(report["probe_summary"]["A_B_two_sided"]["k_max"], 100)

    def test_override_is_recorded(self):
        A, B = 2 * np.eye(2), 3 * np.eye(2)
        refused = EquivalenceDecision(equal=False, margin=0.5, oracle=boundedness_probe(A.T, B.T))
        with patch("dilations.tools.equivalence.decide_coarsely_equivalent", return_value=refused):
            verdict = classify_pair(A, B)
        self.assertTrue(verdict.hom_besov_equal)
        self.assertTrue(verdict.inhom_besov_equal)
        self.assertEqual(verdict.margins["coarse_equivalence_transposed"], 0.5)
        warnings = verdict.to_dict()["warnings"]
        self.assertEqual(len(warnings), 2)
        self.assertTrue(any("overridden" in warning for warning in warnings))
        self.assertTrue(any("disagrees with the positive-side" in warning for warning in warnings))

    def test_consistent_verdicts_have_no_warnings(self):
        self.assertEqual(classify_pair(SPLIT_A, SPLIT_B).to_dict()["warnings"], [])
