"""
Equivalence and coarse equivalence of expansive matrices.

Two expansive matrices are equivalent when their homogeneous quasi-norms are, and coarsely equivalent when the
quasi-norms agree at infinity. Both relations are decided exactly on expansive normal forms (positive spectrum,
determinant 2); the growth of ||A^-k B^floor(eps k)|| is recorded next to every decision as an independent check.
"""
import hashlib
import logging
import math
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.linalg

from django.conf import settings
from .linalg_core import as_matrix, require_expansive, real_jordan_form, nilpotent_log, structured_exp, spectrum, \
    coupling_matrix, normalized_powers, jordan_products
from .quasinorm import build_ellipsoid, qn_compare, ratios_bounded
from .spectral import generalized_eigenspace, modulus_span
from ..errors import DimensionMismatch, NonPositiveSpectrum, InvalidInput
from ..models import ProbeSide, GrowthClass, ProbeSeries, NormalForm, EquivalenceDecision, EigenspaceReport, \
    Verdict, RealJordanDecomposition, JobConfig, frozen_array

RATIONAL_DENOMINATOR = 10 ** 6
RATIONAL_TOL = 1e-12


def same_dimension(A: np.ndarray, B: np.ndarray):
    if A.shape != B.shape:
        raise DimensionMismatch(f"Matrices have shapes {A.shape} and {B.shape}")


def epsilon(A, B) -> float:
    """eps(A, B) = ln|det A| / ln|det B|"""
    A = require_expansive(A, "A")
    B = require_expansive(B, "B")
    return float(np.linalg.slogdet(A)[1] / np.linalg.slogdet(B)[1])


def epsilon_floor(eps: float, k: int) -> int:
    """
    floor(eps * k), exact whenever eps is a rational with small denominator.

    Otherwise a product landing within half an ulp below an integer is rounded up to it.
    """
    ratio = Fraction(eps).limit_denominator(RATIONAL_DENOMINATOR)
    if abs(float(ratio) - eps) <= RATIONAL_TOL:
        return (ratio.numerator * k) // ratio.denominator
    value = eps * k
    nearest = round(value)
    if abs(value - nearest) <= math.ulp(value) / 2:
        return int(nearest)
    return math.floor(value)


def probe_products(A, B, k_max: int, direction: int = 1, cluster_tol: Optional[float] = None,
                   reconstruction_tol: Optional[float] = None):
    """
    Yield (k, M, log_scale) with A^-k B^floor(eps k) = exp(log_scale) * M for k = direction, ..., direction * k_max.

    The powers are taken in the real Jordan coordinates of A and B, joined by their coupling matrix, so rounding
    noise between generalized eigenspaces of different moduli is never amplified.
    """
    A = as_matrix(A)
    B = as_matrix(B)
    eps = epsilon(A, B)
    left = real_jordan_form(A, cluster_tol, reconstruction_tol=reconstruction_tol)
    right = real_jordan_form(B, cluster_tol, reconstruction_tol=reconstruction_tol)
    ks = direction * np.arange(1, k_max + 1)
    exponents = np.array([epsilon_floor(eps, int(k)) for k in ks])
    M, log_scales = jordan_products(left, normalized_powers(left, -ks), coupling_matrix(left, right),
                                    right, normalized_powers(right, exponents))
    for k, product, log_scale in zip(ks, M, log_scales):
        yield int(k), product, float(log_scale)


def _fit_growth(abs_ks: np.ndarray, log_norms: np.ndarray, fit_k_min: int) -> dict:
    """Regress the running maximum of the log-norms on [1, log k, k] for k >= fit_k_min"""
    envelope = np.maximum.accumulate(log_norms)
    keep = abs_ks >= fit_k_min
    ks = abs_ks[keep].astype(float)
    design = np.column_stack([np.ones_like(ks), np.log(ks), ks])
    (intercept, slope_logk, slope_k), *_ = np.linalg.lstsq(design, envelope[keep], rcond=None)
    return {"intercept": float(intercept), "slope_logk": float(slope_logk), "slope_k": float(slope_k),
            "max_log_norm": float(envelope[-1])}


def _classify(fit: dict) -> tuple:
    if abs(fit["slope_k"]) < settings.PROBE_BOUNDED_SLOPE_K:
        if abs(fit["slope_logk"]) < settings.PROBE_BOUNDED_SLOPE_LOGK:
            return GrowthClass.BOUNDED, None, None
        return GrowthClass.POLYNOMIAL, int(round(fit["slope_logk"])), None
    return GrowthClass.EXPONENTIAL, None, math.exp(fit["slope_k"])


_SEVERITY = {GrowthClass.BOUNDED: 0, GrowthClass.POLYNOMIAL: 1, GrowthClass.EXPONENTIAL: 2}


def boundedness_probe(A, B, k_max: Optional[int] = None, side: ProbeSide = ProbeSide.POSITIVE_ONLY,
                      fit_k_min: Optional[int] = None, cluster_tol: Optional[float] = None,
                      reconstruction_tol: Optional[float] = None) -> ProbeSeries:
    """
    Sample log ||A^-k B^floor(eps k)|| for 0 < k <= k_max (positive_only) or 0 < |k| <= k_max (two_sided) and
    classify its growth.

    A sup over k in N that is finite characterizes coarse equivalence; a finite sup over k in Z characterizes
    equivalence.
    """
    k_max = settings.PROBE_K_MAX if k_max is None else k_max
    fit_k_min = settings.PROBE_FIT_K_MIN if fit_k_min is None else fit_k_min
    if k_max < 50:
        raise InvalidInput(f"Probes need k_max >= 50, got {k_max}")
    A = require_expansive(A, "A")
    B = require_expansive(B, "B")
    same_dimension(A, B)
    side = ProbeSide(side)

    directions = [1, -1] if side == ProbeSide.TWO_SIDED else [1]
    samples = {}
    diagnostics = {}
    verdicts = []
    for direction in directions:
        ks, log_norms = [], []
        for k, M, log_scale in probe_products(A, B, k_max, direction, cluster_tol, reconstruction_tol):
            ks.append(k)
            log_norms.append(log_scale + math.log(np.linalg.norm(M, 2)))
        samples[direction] = (ks, log_norms)
        fit = _fit_growth(np.abs(np.array(ks)), np.array(log_norms), fit_k_min)
        name = "positive" if direction > 0 else "negative"
        diagnostics[name] = fit
        verdicts.append(_classify(fit))
        logging.debug(f"Probe {name} side: {fit}")

    classification, degree, rate = max(verdicts, key=lambda v: (_SEVERITY[v[0]], v[1] or 0, v[2] or 0))
    if side == ProbeSide.TWO_SIDED:
        negative_ks, negative_logs = samples[-1]
        ks = list(reversed(negative_ks)) + [0] + samples[1][0]
        log_norms = list(reversed(negative_logs)) + [0.0] + samples[1][1]
    else:
        ks, log_norms = samples[1]
    return ProbeSeries(ks=tuple(ks), log_norms=tuple(log_norms), classification=classification, side=side,
                       degree=degree, rate=rate, diagnostics=diagnostics)


def positivize(A, decomposition: Optional[RealJordanDecomposition] = None) -> np.ndarray:
    """
    Equivalent matrix with positive eigenvalues |lambda| and the same |det|.

    Every real Jordan block factors as D1 * D2 with an orthogonal rotation part D1 = diag(M_w); D2 keeps the moduli
    on the diagonal and carries the rotations into the superdiagonal.
    """
    A = require_expansive(A)
    decomposition = real_jordan_form(A) if decomposition is None else decomposition
    D2 = scipy.linalg.block_diag(*[block.positive_part() for block in decomposition.blocks])
    return decomposition.reconstruct(D2)


def matrix_log_expansive(A1, jordan_hint: Optional[RealJordanDecomposition] = None) -> np.ndarray:
    """
    Real X with exp(X) = A1 for an expansive A1 with positive spectrum.

    In Jordan coordinates every modulus group is lambda (I + T / lambda) with T nilpotent, and its logarithm is
    ln(lambda) I + log(I + T / lambda) with a finite series.
    """
    A1 = require_expansive(A1, "A1")
    decomposition = jordan_hint
    if decomposition is None:
        decomposition = real_jordan_form(A1)
        if any(block.rotation != 1 for block in decomposition.blocks):
            raise NonPositiveSpectrum(f"Spectrum of {decomposition} is not positive")

    Y = decomposition.inverse_basis @ A1 @ decomposition.basis
    blocks = []
    for modulus, (start, stop) in decomposition.group_extents():
        block = Y[start:stop, start:stop]
        scalar = float(np.trace(block)) / (stop - start)
        if scalar <= 0:
            raise NonPositiveSpectrum(f"Block group of modulus {modulus:.6g} has eigenvalue {scalar:.6g}")
        blocks.append(math.log(scalar) * np.eye(stop - start) + nilpotent_log(block / scalar))
    return decomposition.reconstruct(scipy.linalg.block_diag(*blocks))


def _one_parameter_point(A: np.ndarray, target_det: float, cluster_tol: Optional[float] = None,
                         reconstruction_tol: Optional[float] = None) -> tuple:
    """exp(t X) for the positive-spectrum logarithm X of A and t with det exp(t X) = target_det"""
    decomposition = real_jordan_form(A, cluster_tol, reconstruction_tol=reconstruction_tol)
    X = matrix_log_expansive(positivize(A, decomposition), decomposition)
    t = math.log(target_det) / float(np.linalg.slogdet(A)[1])
    return structured_exp(t * X, decomposition), decomposition, t


def rescale_determinant(A, c: float) -> np.ndarray:
    """The matrix equivalent to A with positive eigenvalues and determinant c > 1"""
    A = require_expansive(A)
    if not c > 1:
        raise InvalidInput(f"Target determinant must exceed 1, got {c}")
    return _one_parameter_point(A, c)[0]


def expansive_normal_form(A, cluster_tol: Optional[float] = None,
                          reconstruction_tol: Optional[float] = None) -> NormalForm:
    """
    The unique matrix equivalent to A with positive eigenvalues and determinant 2.

    A is positivized blockwise, its logarithm X is taken block by block, and the normal form is exp(t X) with
    t = ln 2 / ln|det A|.
    """
    A = require_expansive(A)
    A_prime, decomposition, t = _one_parameter_point(A, 2.0, cluster_tol, reconstruction_tol)
    pattern = tuple((modulus ** t, extent) for modulus, extent in decomposition.group_extents())
    provenance = hashlib.sha256(np.ascontiguousarray(A).tobytes()).hexdigest()
    logging.debug(f"Normal form with t={t:.6g}, block pattern {pattern}")
    return NormalForm(matrix=frozen_array(A_prime), basis=decomposition.basis, block_pattern=pattern, t_scale=t,
                      provenance=provenance)


def decide_equivalent(A, B, tol: Optional[float] = None, k_max: Optional[int] = None,
                      cluster_tol: Optional[float] = None,
                      reconstruction_tol: Optional[float] = None) -> EquivalenceDecision:
    """
    A and B are equivalent iff their expansive normal forms coincide.

    The decision is truthy iff ||NF(A) - NF(B)|| <= tol * max(1, ||NF(A)||); the two-sided probe rides along as
    an oracle.
    """
    tol = settings.VERDICT_TOL if tol is None else tol
    A = require_expansive(A, "A")
    B = require_expansive(B, "B")
    same_dimension(A, B)
    nf_A = expansive_normal_form(A, cluster_tol, reconstruction_tol)
    nf_B = expansive_normal_form(B, cluster_tol, reconstruction_tol)
    margin = float(np.linalg.norm(nf_A.matrix - nf_B.matrix, 2) / max(1.0, np.linalg.norm(nf_A.matrix, 2)))
    equal = margin <= tol
    oracle = boundedness_probe(A, B, k_max, ProbeSide.TWO_SIDED, cluster_tol=cluster_tol,
                                reconstruction_tol=reconstruction_tol)
    decision = EquivalenceDecision(equal=equal, margin=margin, oracle=oracle)
    if not decision.agrees:
        logging.warning(f"Equivalence verdict {equal} (margin {margin:.3g}) disagrees with the two-sided probe "
                        f"({oracle})")
    return decision


def _patterns_match(nf_A: NormalForm, nf_B: NormalForm, tol: float) -> bool:
    if len(nf_A.block_pattern) != len(nf_B.block_pattern):
        return False
    for (value_A, (start_A, stop_A)), (value_B, (start_B, stop_B)) in zip(nf_A.block_pattern, nf_B.block_pattern):
        if stop_A - start_A != stop_B - start_B or not math.isclose(value_A, value_B, rel_tol=tol):
            return False
    return True


def decide_coarsely_equivalent(A, B, tol: Optional[float] = None, k_max: Optional[int] = None,
                               cluster_tol: Optional[float] = None,
                               reconstruction_tol: Optional[float] = None) -> EquivalenceDecision:
    """
    A and B are coarsely equivalent iff, in the Jordan basis of A, NF(B) has the diagonal blocks of NF(A) and
    differs from it only above the block diagonal.

    Blocks are the groups of one eigenvalue modulus, ordered by decreasing modulus. The positive-side probe rides
    along as an oracle.
    """
    tol = settings.VERDICT_TOL if tol is None else tol
    A = require_expansive(A, "A")
    B = require_expansive(B, "B")
    same_dimension(A, B)
    nf_A = expansive_normal_form(A, cluster_tol, reconstruction_tol)
    nf_B = expansive_normal_form(B, cluster_tol, reconstruction_tol)
    oracle = boundedness_probe(A, B, k_max, ProbeSide.POSITIVE_ONLY, cluster_tol=cluster_tol,
                                reconstruction_tol=reconstruction_tol)

    cluster_tol = settings.EIGENVALUE_CLUSTER_TOL if cluster_tol is None else cluster_tol
    if not _patterns_match(nf_A, nf_B, cluster_tol):
        logging.info("Normal forms have different block patterns, not coarsely equivalent")
        decision = EquivalenceDecision(equal=False, margin=math.inf, oracle=oracle)
    else:
        C = nf_A.basis
        C_inverse = np.linalg.inv(C)
        D = C_inverse @ (nf_B.matrix - nf_A.matrix) @ C
        scale = max(1.0, float(np.linalg.norm(C_inverse @ nf_A.matrix @ C, 2)))
        group = np.empty(D.shape[0], dtype=int)
        for index, (_, (start, stop)) in enumerate(nf_A.block_pattern):
            group[start:stop] = index
        on_or_below = group[:, None] >= group[None, :]
        margin = float(np.max(np.abs(D[on_or_below]))) / scale
        decision = EquivalenceDecision(equal=margin <= tol, margin=margin, oracle=oracle)

    if not decision.agrees:
        logging.warning(f"Coarse equivalence verdict {decision.equal} (margin {decision.margin:.3g}) disagrees "
                        f"with the positive-side probe ({oracle})")
    return decision


def _subspace_distance(U: np.ndarray, V: np.ndarray) -> float:
    """Largest principal angle; subspaces of different dimension are pi/2 apart"""
    if U.shape[1] != V.shape[1]:
        return math.pi / 2
    if U.shape[1] == 0:
        return 0.0
    return float(np.max(scipy.linalg.subspace_angles(U, V)))


def eigenspace_consistency_check(A, B, coarse: bool = True, tol: Optional[float] = None) -> EigenspaceReport:
    """
    Compare E(A^-1, r^eps, m) with E(B^-1, r, m) over the moduli r of B^-1 (and of A^-1, mapped by 1/eps) and
    m = 1..d. Full mode also compares the spans of the kernels of (A - lambda I)^m and (B - mu I)^m over single
    moduli |lambda| = |mu|^eps.

    Equal spaces are necessary for coarse equivalence (resp. equivalence), not sufficient.
    """
    tol = settings.EIGENVALUE_CLUSTER_TOL if tol is None else tol
    A = require_expansive(A, "A")
    B = require_expansive(B, "B")
    same_dimension(A, B)
    d = A.shape[0]
    eps = epsilon(A, B)
    A_inverse, B_inverse = np.linalg.inv(A), np.linalg.inv(B)

    radii = set(spectrum(B_inverse, tol).moduli) | {s ** (1 / eps) for s in spectrum(A_inverse, tol).moduli}
    radii = sorted(radii)
    distances = []
    for r in radii:
        for m in range(1, d + 1):
            left = generalized_eigenspace(A_inverse, r ** eps, m, tol)
            right = generalized_eigenspace(B_inverse, r, m, tol)
            distances.append(("filtration", r, m, _subspace_distance(left.basis, right.basis)))
    if not coarse:
        for r in sorted(set(spectrum(B, tol).moduli) | {s ** (1 / eps) for s in spectrum(A, tol).moduli}):
            for m in range(1, d + 1):
                left = modulus_span(A, r ** eps, m, tol)
                right = modulus_span(B, r, m, tol)
                distances.append(("span", r, m, _subspace_distance(left.basis, right.basis)))
    max_distance = max(distance for *_, distance in distances)
    return EigenspaceReport(coarse=coarse, max_distance=max_distance, distances=tuple(distances))


def compare_transposed_quasi_norms(A: np.ndarray, B: np.ndarray, seed: int) -> dict:
    """Quasi-norm evidence for the Besov verdicts, which are governed by the transposed matrices"""
    qA, qB = build_ellipsoid(A.T, seed=seed), build_ellipsoid(B.T, seed=seed)
    comparison = qn_compare(qA, qB, seed=seed)
    return {
        "ratio_low": comparison.ratio_low,
        "ratio_high": comparison.ratio_high,
        "ratio_low_far": comparison.ratio_low_far,
        "ratio_high_far": comparison.ratio_high_far,
        "bounded": ratios_bounded(qA, qB, seed=seed),
        "bounded_at_infinity": ratios_bounded(qA, qB, far_only=True, seed=seed),
    }


def classify_pair(A, B, config: Optional[JobConfig] = None) -> Verdict:
    """
    Besov and Hardy verdicts for a pair of expansive matrices.

    The homogeneous Besov scales (and the Hardy scales) of A and B coincide iff A and B are equivalent, which is
    invariant under transposition. The inhomogeneous scales coincide iff A^T and B^T are coarsely equivalent.
    Every disagreement between a verdict and its probe, and every override, is listed in the verdict's warnings.
    """
    A = require_expansive(A, "A")
    B = require_expansive(B, "B")
    same_dimension(A, B)
    tol = settings.VERDICT_TOL if config is None else config.tol_verdict
    k_max = settings.PROBE_K_MAX if config is None else config.k_max
    seed = settings.SEED if config is None else config.seed
    cluster_tol = settings.EIGENVALUE_CLUSTER_TOL if config is None else config.tol_eig
    reconstruction_tol = settings.JORDAN_RECONSTRUCTION_TOL if config is None else config.tol_jordan

    homogeneous = decide_equivalent(A, B, tol, k_max, cluster_tol, reconstruction_tol)
    inhomogeneous = decide_coarsely_equivalent(A.T, B.T, tol, k_max, cluster_tol, reconstruction_tol)
    warnings = []
    if not homogeneous.agrees:
        warnings.append(f"equivalence verdict {homogeneous.equal} disagrees with the two-sided probe "
                        f"({homogeneous.oracle})")
    if not inhomogeneous.agrees:
        warnings.append(f"coarse equivalence verdict {inhomogeneous.equal} of the transposed pair disagrees with "
                        f"the positive-side probe ({inhomogeneous.oracle})")
    inhom_equal = inhomogeneous.equal
    if homogeneous.equal and not inhom_equal:
        # equivalence implies coarse equivalence
        message = (f"equivalent pair judged not coarsely equivalent (margin {inhomogeneous.margin:.3g}), "
                   f"inhomogeneous verdict overridden to true")
        logging.warning(message)
        warnings.append(message)
        inhom_equal = True

    quasi_norms = None
    if config is not None and config.compare_quasi_norms:
        quasi_norms = compare_transposed_quasi_norms(A, B, seed)

    verdict = Verdict(
        hom_besov_equal=homogeneous.equal,
        inhom_besov_equal=inhom_equal,
        hardy_equal=homogeneous.equal,
        epsilon=epsilon(A, B),
        normal_form_A=expansive_normal_form(A, cluster_tol, reconstruction_tol),
        normal_form_B=expansive_normal_form(B, cluster_tol, reconstruction_tol),
        probes={"A_B_two_sided": homogeneous.oracle, "AT_BT_positive_only": inhomogeneous.oracle},
        eigenspaces=eigenspace_consistency_check(A.T, B.T, coarse=True, tol=cluster_tol),
        margins={"equivalence": homogeneous.margin, "coarse_equivalence_transposed": inhomogeneous.margin},
        tolerances={"eigenvalue_cluster": cluster_tol, "jordan_reconstruction": reconstruction_tol, "verdict": tol},
        quasi_norms=quasi_norms,
        warnings=tuple(warnings),
    )
    logging.info(f"Verdict: {verdict}")
    return verdict
