"""
Step homogeneous quasi-norms.

rho_A is built from an ellipsoid Delta = {x : x^T P x < s} of volume one with Delta in r Delta in A Delta. The
quadratic form comes from the series P = sum_k delta^(2k) (A^-k)^T A^-k, which gives q(A^-1 x) <= q(x) / delta^2
by construction. rho_A(x) = |det A|^j for x in A^(j+1) Delta minus A^j Delta, and rho_A(0) = 0.
"""
import logging
import math
from dataclasses import replace
from typing import Optional

import numpy as np
import scipy.linalg

from django.conf import settings
from .linalg_core import as_matrix, spectrum, real_jordan_form, coupling_matrix
from ..errors import NotExpansive, CertificationFailed, DimensionMismatch, ZeroVector, InvalidInput, \
    NumericalFailure
from ..models import StepQuasiNorm, QuasiNormComparison, frozen_array

MAX_SERIES_TERMS = 10000
MAX_SHELL_STEPS = 100000
NESTING_MARGIN = 1e-9


def unit_ball_volume(d: int) -> float:
    """Volume of the euclidean unit ball in R^d"""
    volume = (1.0, 2.0)
    for n in range(2, d + 1):
        volume = (volume[1], 2 * math.pi / n * volume[0])
    return volume[1]


def _ellipsoid_series(inverse: np.ndarray, delta: float, cutoff: float) -> np.ndarray:
    d = inverse.shape[0]
    P = np.eye(d)
    W = np.eye(d)
    for k in range(1, MAX_SERIES_TERMS + 1):
        W = delta * inverse @ W
        term = W.T @ W
        P += term
        if np.linalg.norm(term, 2) < cutoff * max(1.0, np.linalg.norm(P, 2)):
            logging.debug(f"Ellipsoid series truncated after {k} terms")
            return (P + P.T) / 2
    raise CertificationFailed(f"Ellipsoid series did not converge within {MAX_SERIES_TERMS} terms, "
                              f"choose a smaller delta")


def _boundary_points(P: np.ndarray, rng: np.random.Generator, n: int) -> np.ndarray:
    """Random points u with u^T P u = 1"""
    X = rng.standard_normal((P.shape[0], n))
    return X / np.sqrt(np.einsum("in,ij,jn->n", X, P, X))


def build_ellipsoid(A, delta: Optional[float] = None, n_samples: Optional[int] = None,
                    seed: Optional[int] = None) -> StepQuasiNorm:
    """
    Certified step quasi-norm of an expansive matrix.

    delta must lie strictly between 1 and the smallest eigenvalue modulus; it defaults to their midpoint and
    doubles as the nesting ratio r. Nesting is certified on random boundary points and, up to d = 8, by the
    generalized eigenvalue problem of the two quadratic forms.
    """
    A = as_matrix(A)
    n_samples = settings.CERTIFICATION_SAMPLES if n_samples is None else n_samples
    seed = settings.SEED if seed is None else seed
    d = A.shape[0]
    lowest = spectrum(A).min_modulus
    if lowest <= 1:
        raise NotExpansive(f"Smallest eigenvalue modulus {lowest:.6g} is not above 1")
    delta = (1 + lowest) / 2 if delta is None else delta
    if not 1 < delta < lowest:
        raise InvalidInput(f"delta={delta} must lie in (1, {lowest:.6g})")

    inverse = np.linalg.inv(A)
    P = _ellipsoid_series(inverse, delta, settings.SERIES_CUTOFF)
    det_P = float(np.linalg.det(P))
    if det_P <= 0 or not math.isfinite(det_P):
        raise CertificationFailed("Ellipsoid form is not positive definite")
    scale = (det_P / unit_ball_volume(d) ** 2) ** (1 / d)
    det_abs = math.exp(np.linalg.slogdet(A)[1])
    nesting_ratio = delta

    # r Delta in A Delta  <=>  r^2 q(A^-1 u) < 1 whenever q(u) = 1
    U = _boundary_points(P, np.random.default_rng(seed), n_samples)
    V = inverse @ U
    sampled = float(np.max(np.einsum("in,ij,jn->n", V, P, V))) * nesting_ratio ** 2
    if sampled > 1 - NESTING_MARGIN:
        raise CertificationFailed(f"Sampled nesting check failed ({sampled:.12g}), retry with a smaller delta")
    if d <= 8:
        exact = float(np.max(scipy.linalg.eigh(inverse.T @ P @ inverse, P, eigvals_only=True))) * nesting_ratio ** 2
        if exact > 1 - NESTING_MARGIN:
            raise CertificationFailed(f"Nesting check failed on the exact form ({exact:.12g})")

    logging.debug(f"Built ellipsoid for |det A|={det_abs:.6g} with delta={delta:.6g}, s={scale:.6g}")
    return StepQuasiNorm(matrix=frozen_array(A), inverse=frozen_array(inverse), P=frozen_array(P), scale=scale,
                         det_abs=det_abs, nesting_ratio=nesting_ratio, delta=delta)


def shell_indices(q: StepQuasiNorm, X: np.ndarray, start: int = 0) -> np.ndarray:
    """
    Integer j per nonzero column x with q(A^-(j+1) x) < s <= q(A^-j x).

    The search starts at j = start and steps by one for all columns at once.
    """
    X = np.asarray(X, dtype=float)
    if not np.all(np.any(X, axis=0)):
        raise ZeroVector("The zero vector has no shell index")
    n = X.shape[1]
    j = np.full(n, start, dtype=int)
    if start >= 0:
        Y = np.linalg.matrix_power(q.inverse, start) @ X
    else:
        Y = np.linalg.matrix_power(q.matrix, -start) @ X

    inside = q.form(Y) < q.scale
    steps = 0
    while inside.any():
        Y[:, inside] = q.matrix @ Y[:, inside]
        j[inside] -= 1
        inside[inside] = q.form(Y[:, inside]) < q.scale
        steps += 1
        if steps > MAX_SHELL_STEPS:
            raise NumericalFailure("Shell search did not terminate")

    outside = np.ones(n, dtype=bool)
    steps = 0
    while outside.any():
        Z = q.inverse @ Y[:, outside]
        leaving = q.form(Z) >= q.scale
        columns = np.flatnonzero(outside)
        Y[:, columns[leaving]] = Z[:, leaving]
        j[columns[leaving]] += 1
        outside[columns[~leaving]] = False
        steps += 1
        if steps > MAX_SHELL_STEPS:
            raise NumericalFailure("Shell search did not terminate")
    return j


def qn_shell_index(q: StepQuasiNorm, x) -> int:
    """The j with x in A^(j+1) Delta minus A^j Delta"""
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    return int(shell_indices(q, x)[0])


def qn_eval(q: StepQuasiNorm, x):
    """rho_A(x) for a single vector, or for every column of a d x n array"""
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    if X.shape[0] != q.dim:
        raise DimensionMismatch(f"Expected vectors of dimension {q.dim}, got {X.shape[0]}")
    X = X.reshape(q.dim, -1)
    values = np.zeros(X.shape[1])
    nonzero = np.any(X, axis=0)
    if nonzero.any():
        values[nonzero] = q.det_abs ** shell_indices(q, X[:, nonzero]).astype(float)
    return float(values[0]) if single else values


def sample_directions(d: int, n: int, seed: Optional[int] = None) -> np.ndarray:
    rng = np.random.default_rng(settings.SEED if seed is None else seed)
    X = rng.standard_normal((d, n))
    return X / np.linalg.norm(X, axis=0)


def eigen_directions(A) -> np.ndarray:
    """Unit columns of the real Jordan basis of A; ratios of quasi-norms degenerate first along them"""
    basis = real_jordan_form(A).basis
    return basis / np.linalg.norm(basis, axis=0)


def log_radii(radius_decades: int) -> np.ndarray:
    """Eight radii per decade from 10^-D to 10^D"""
    return np.linspace(-radius_decades, radius_decades, 16 * radius_decades + 1)


def _reframe(q: StepQuasiNorm, basis: np.ndarray, matrix: np.ndarray, inverse: np.ndarray) -> StepQuasiNorm:
    """The quasi-norm q in coordinates y = basis^-1 x, where its dilation acts as matrix"""
    P = basis.T @ q.P @ basis
    return replace(q, matrix=frozen_array(matrix), inverse=frozen_array(inverse), P=frozen_array((P + P.T) / 2))


def common_frame(qA: StepQuasiNorm, qB: StepQuasiNorm) -> tuple:
    """
    rho_A and rho_B rewritten in the real Jordan coordinates y = C_A^-1 x of A, together with C_A^-1.

    A acts there as its Jordan matrix and B as K J_B K^-1 with the coupling matrix K of the two Jordan bases. Shell
    searches iterate these actions, and the zeros of K keep generalized eigenspaces shared by A and B from leaking
    into each other over hundreds of steps.
    """
    jordan_A = real_jordan_form(qA.matrix)
    frame_A = _reframe(qA, jordan_A.basis, jordan_A.jordan_matrix(), jordan_A.inverse_jordan_matrix())
    if np.array_equal(qA.matrix, qB.matrix):
        return frame_A, _reframe(qB, jordan_A.basis, frame_A.matrix, frame_A.inverse), jordan_A.inverse_basis
    jordan_B = real_jordan_form(qB.matrix)
    K = coupling_matrix(jordan_A, jordan_B)
    K_inverse = np.linalg.inv(K)
    frame_B = _reframe(qB, jordan_A.basis, K @ jordan_B.jordan_matrix() @ K_inverse,
                       K @ jordan_B.inverse_jordan_matrix() @ K_inverse)
    return frame_A, frame_B, jordan_A.inverse_basis


def qn_compare(qA: StepQuasiNorm, qB: StepQuasiNorm, n_samples: Optional[int] = None,
               radius_decades: Optional[int] = None, seed: Optional[int] = None) -> QuasiNormComparison:
    """
    Sample rho_B / rho_A over log-spaced radii and over random directions followed by the Jordan basis
    directions of both matrices.

    The far field is the last sampled decade, the finite-scale stand-in for equivalence at infinity. Shells are
    searched in the common Jordan frame of both matrices.
    """
    if qA.dim != qB.dim:
        raise DimensionMismatch(f"Quasi-norms live in dimensions {qA.dim} and {qB.dim}")
    n_samples = settings.COMPARE_SAMPLES if n_samples is None else n_samples
    radius_decades = settings.RADIUS_DECADES if radius_decades is None else radius_decades
    directions = np.column_stack([sample_directions(qA.dim, n_samples, seed), eigen_directions(qA.matrix),
                                  eigen_directions(qB.matrix)])
    exponents = log_radii(radius_decades)
    frame_A, frame_B, to_frame = common_frame(qA, qB)
    directions = to_frame @ directions

    log_ratios = np.empty((len(exponents), directions.shape[1]))
    start_A = start_B = 0
    for row, exponent in enumerate(exponents):
        X = 10.0 ** exponent * directions
        shells_A = shell_indices(frame_A, X, start_A)
        shells_B = shell_indices(frame_B, X, start_B)
        start_A, start_B = int(np.median(shells_A)), int(np.median(shells_B))
        log_ratios[row] = shells_B * math.log(qB.det_abs) - shells_A * math.log(qA.det_abs)
    ratios = np.exp(log_ratios)
    far = exponents >= radius_decades - 1
    comparison = QuasiNormComparison(ratio_low=float(ratios.min()), ratio_high=float(ratios.max()),
                                     ratio_low_far=float(ratios[far].min()),
                                     ratio_high_far=float(ratios[far].max()),
                                     radii=frozen_array(10.0 ** exponents), ratios=frozen_array(ratios))
    logging.debug(f"Quasi-norm ratios over {radius_decades} decades: [{comparison.ratio_low:.6g}, "
                  f"{comparison.ratio_high:.6g}], far field [{comparison.ratio_low_far:.6g}, "
                  f"{comparison.ratio_high_far:.6g}]")
    return comparison


def _spread(comparison: QuasiNormComparison, far_only: bool) -> float:
    if not far_only:
        return comparison.spread
    outside_unit_ball = comparison.ratios[comparison.radii >= 1]
    return float(outside_unit_ball.max() / outside_unit_ball.min())


def ratios_bounded(qA: StepQuasiNorm, qB: StepQuasiNorm, n_samples: Optional[int] = None,
                   radius_decades: int = 4, far_only: bool = False, growth_factor: int = 16,
                   seed: Optional[int] = None) -> bool:
    """
    Finite-scale test whether rho_B / rho_A stays bounded (far_only: outside the unit ball).

    The spread of the ratio over radius_decades is compared with the spread over growth_factor times as many
    decades. Step quasi-norms jump by whole powers of their determinants, so one quantization step
    max(|det A|, |det B|) on either side is tolerated. Ratios of polynomially diverging pairs drift like a power
    of the number of decades, which is why the default growth factor is large.
    """
    short = qn_compare(qA, qB, n_samples, radius_decades, seed)
    long = qn_compare(qA, qB, n_samples, growth_factor * radius_decades, seed)
    quantum = max(qA.det_abs, qB.det_abs)
    short_spread, long_spread = _spread(short, far_only), _spread(long, far_only)
    bounded = long_spread <= short_spread * quantum ** 2 * 1.05
    logging.debug(f"Ratio spread {short_spread:.6g} over {radius_decades} decades, {long_spread:.6g} over "
                  f"{growth_factor * radius_decades}: {'bounded' if bounded else 'unbounded'}")
    return bounded


def quasi_triangle_constant(q: StepQuasiNorm, n_pairs: int = 10000, seed: Optional[int] = None) -> float:
    """Empirical C with rho(x + y) <= C (rho(x) + rho(y)) over random pairs spread across six decades"""
    rng = np.random.default_rng(settings.SEED if seed is None else seed)
    d = q.dim
    X = rng.standard_normal((d, n_pairs)) * 10.0 ** rng.uniform(-3, 3, n_pairs)
    Y = rng.standard_normal((d, n_pairs)) * 10.0 ** rng.uniform(-3, 3, n_pairs)
    S = X + Y
    keep = np.any(S, axis=0)
    constant = float(np.max(qn_eval(q, S[:, keep]) / (qn_eval(q, X[:, keep]) + qn_eval(q, Y[:, keep]))))
    logging.debug(f"Empirical quasi-triangle constant {constant:.6g} over {n_pairs} pairs")
    return constant
