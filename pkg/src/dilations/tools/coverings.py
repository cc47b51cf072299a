"""
Induced coverings Q_j = A^j Q_0 at finite scale.

Q_0 = {a <= rho_A <= b} is an annulus of the step quasi-norm, so every member of an induced covering is a range of
integer shell indices of rho_A and intersections, neighbourhoods and the admissibility gap reduce to integer
arithmetic. Sampling only appears where a covering meets the quasi-norm of another matrix.
"""
import logging
import math
from typing import Optional

import numpy as np

from django.conf import settings
from .linalg_core import require_expansive, real_jordan_form, coupling_matrix, normalized_powers, log_product_norms
from .quasinorm import build_ellipsoid, shell_indices, eigen_directions, sample_directions, common_frame
from .equivalence import same_dimension
from ..errors import InvalidInput, KindMismatch, DimensionMismatch, CertificationFailed
from ..models import CoveringKind, InducedCovering, StepQuasiNorm, WeakEquivalenceTable, ProbeSide

INHOMOGENEOUS_OVERLAP = 1.5
BOUNDARY_MARGIN = 1e-6
CENTRAL_DEPTH = 5
MIN_COUNT_RANGE = 50


def _guarded_ceil(value: float) -> int:
    nearest = round(value)
    return nearest if abs(value - nearest) < 1e-9 else math.ceil(value)


def _power(q: StepQuasiNorm, n: int) -> np.ndarray:
    """A^n for the matrix of q, negative n included"""
    return np.linalg.matrix_power(q.matrix if n >= 0 else q.inverse, abs(int(n)))


def induced_covering(A, kind: CoveringKind = CoveringKind.HOMOGENEOUS, a: float = 1.0, b: Optional[float] = None,
                     index_range: Optional[tuple] = None,
                     quasi_norm: Optional[StepQuasiNorm] = None) -> InducedCovering:
    """
    Covering induced by A with base annulus {a <= rho_A <= b}.

    b defaults to a |det A| (a * |det A| * 1.5 for inhomogeneous coverings, so that the central set overlaps
    Q_1). The index range defaults to [-range, range], or [0, range] for inhomogeneous coverings.
    """
    A = require_expansive(A)
    kind = CoveringKind(kind)
    quasi_norm = build_ellipsoid(A) if quasi_norm is None else quasi_norm
    if b is None:
        b = a * quasi_norm.det_abs * (INHOMOGENEOUS_OVERLAP if kind == CoveringKind.INHOMOGENEOUS else 1.0)
    if not 0 < a < b:
        raise InvalidInput(f"Base annulus needs 0 < a < b, got a={a}, b={b}")
    if index_range is None:
        lower = 0 if kind == CoveringKind.INHOMOGENEOUS else -settings.COVERING_RANGE
        index_range = (lower, settings.COVERING_RANGE)
    first, last = index_range
    if first > last or (kind == CoveringKind.INHOMOGENEOUS and first < 0):
        raise InvalidInput(f"Index range {index_range} is not valid for a {kind.value} covering")
    covering = InducedCovering(matrix=quasi_norm.matrix, kind=kind, base_annulus=(a, b), quasi_norm=quasi_norm,
                               index_range=(int(first), int(last)))
    lo, hi = covering.shell_bounds
    if lo > hi:
        raise InvalidInput(f"Annulus [{a}, {b}] contains no value of rho_A, which jumps by |det A| = "
                           f"{quasi_norm.det_abs:.6g}")
    return covering


def _shell_zero_points(q: StepQuasiNorm, directions: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One point of A Delta minus Delta on each direction's ray, with a random radial position"""
    U = directions * np.sqrt(q.scale / q.form(directions))
    # t u stays in A Delta while t < sqrt(s / q(A^-1 u))
    outer = np.sqrt(q.scale / q.form(q.inverse @ U))
    t = rng.uniform(1 + BOUNDARY_MARGIN, outer * (1 - BOUNDARY_MARGIN))
    return U * t


def base_sample(covering: InducedCovering, n: int = 200, seed: Optional[int] = None,
                central: bool = False) -> np.ndarray:
    """
    Points of the annulus {a <= rho_A <= b} on random directions and on the Jordan basis directions of A.

    With central=True the points come from the central set {rho_A <= b} instead, down to CENTRAL_DEPTH shells
    below b. Points of Q_j are A^j times the annulus sample (except the central set of inhomogeneous coverings).
    """
    seed = settings.SEED if seed is None else seed
    rng = np.random.default_rng(seed)
    q = covering.quasi_norm
    directions = np.column_stack([sample_directions(q.dim, n, seed), eigen_directions(q.matrix)])
    lo, hi = covering.shell_bounds
    if central:
        lo = hi - CENTRAL_DEPTH
    shells = rng.integers(lo, hi + 1, size=directions.shape[1])
    points = _shell_zero_points(q, directions, rng)
    for shell in np.unique(shells):
        columns = shells == shell
        points[:, columns] = _power(q, shell) @ points[:, columns]
    return points


def _is_central(covering: InducedCovering, j: int) -> bool:
    return covering.kind == CoveringKind.INHOMOGENEOUS and j == 0


def sample_members(covering: InducedCovering, j: int, n: int = 200, seed: Optional[int] = None) -> np.ndarray:
    """Sample points of Q_j"""
    if _is_central(covering, j):
        return base_sample(covering, n, seed, central=True)
    return _power(covering.quasi_norm, j) @ base_sample(covering, n, seed)


def covers(covering: InducedCovering, X: np.ndarray) -> np.ndarray:
    """Whether each column of X lies in some member Q_j of the truncated covering"""
    shells = shell_indices(covering.quasi_norm, X)
    hit = np.zeros(X.shape[1], dtype=bool)
    for j in covering.indices:
        hit |= covering.contains(j, shells)
    return hit


def admissibility_gap(covering: InducedCovering, n: int = 200, seed: Optional[int] = None) -> int:
    """
    Smallest j0 with Q_i and Q_j disjoint whenever |i - j| > j0, taken as ceil(log_|det A| (b / a)).

    Sampled members of the first, middle and last Q_i are checked against every Q_j beyond the gap.
    """
    a, b = covering.base_annulus
    q = covering.quasi_norm
    gap = _guarded_ceil(math.log(b / a) / math.log(q.det_abs))
    first, last = covering.index_range
    for i in sorted({first, min(max(0, first), last), last}):
        members = sample_members(covering, i, n, seed)
        shells = shell_indices(q, members, i)
        for j in covering.indices:
            if abs(i - j) > gap and np.any(covering.contains(j, shells)):
                raise CertificationFailed(f"Q_{i} meets Q_{j} although |{i} - {j}| > {gap}")
    logging.debug(f"Admissibility gap {gap} certified for {covering}")
    return gap


def _row(powers: tuple, row: int) -> tuple:
    stack, logs = powers
    return stack[row:row + 1], logs[row:row + 1]


def weak_equivalence_counts(A, B, R: float, range: Optional[int] = None, side: ProbeSide = ProbeSide.TWO_SIDED,
                            cluster_tol: Optional[float] = None,
                            reconstruction_tol: Optional[float] = None) -> WeakEquivalenceTable:
    """
    For every i, the indices j with ||A^-j B^i|| >= 1/R and ||B^-i A^j|| >= 1/R.

    Indices run over [-range, range] (two_sided) or [0, range] (positive_only). The table rows are
    (i, |J_i|, J_i); the maxima of |J_i| over i and of |I_j| = |{i : j in J_i}| over j stay bounded for all R
    exactly when the induced coverings are weakly equivalent. The norms are taken in the real Jordan coordinates
    of A and B, one row of j at a time.
    """
    A = require_expansive(A, "A")
    B = require_expansive(B, "B")
    same_dimension(A, B)
    range = settings.COVERING_RANGE if range is None else range
    if R <= 1 or range < MIN_COUNT_RANGE:
        raise InvalidInput(f"Need R > 1 and range >= {MIN_COUNT_RANGE}, got R={R}, range={range}")
    side = ProbeSide(side)
    indices = np.arange(0 if side == ProbeSide.POSITIVE_ONLY else -range, range + 1)
    threshold = -math.log(R)

    jordan_A = real_jordan_form(A, cluster_tol, reconstruction_tol=reconstruction_tol)
    jordan_B = real_jordan_form(B, cluster_tol, reconstruction_tol=reconstruction_tol)
    A_to_B, B_to_A = coupling_matrix(jordan_A, jordan_B), coupling_matrix(jordan_B, jordan_A)
    A_powers, A_inverse_powers = normalized_powers(jordan_A, indices), normalized_powers(jordan_A, -indices)
    B_powers, B_inverse_powers = normalized_powers(jordan_B, indices), normalized_powers(jordan_B, -indices)

    rows = []
    incidence = np.zeros((len(indices), len(indices)), dtype=bool)
    for row, i in enumerate(indices):
        forward = log_product_norms(jordan_A, A_inverse_powers, A_to_B, jordan_B, _row(B_powers, row))
        backward = log_product_norms(jordan_B, _row(B_inverse_powers, row), B_to_A, jordan_A, A_powers)
        incidence[row] = (forward >= threshold) & (backward >= threshold)
        witnesses = indices[incidence[row]]
        rows.append((int(i), len(witnesses), tuple(int(j) for j in witnesses)))
    table = WeakEquivalenceTable(max_J_count=int(incidence.sum(axis=1).max()),
                                 max_I_count=int(incidence.sum(axis=0).max()), rows=tuple(rows))
    logging.debug(f"Weak equivalence counts for R={R}, range={range}, {side.value}: {table}")
    return table


def weakly_equivalent(A, B, R: Optional[float] = None, range: Optional[int] = None,
                      side: ProbeSide = ProbeSide.TWO_SIDED, growth_factor: Optional[int] = None,
                      slack: Optional[int] = None, cluster_tol: Optional[float] = None,
                      reconstruction_tol: Optional[float] = None) -> bool:
    """
    Finite-scale weak equivalence: for every R of the ladder (or the given R) the maximal counts over
    growth_factor * range exceed those over range by at most slack.
    """
    ladder = settings.R_LADDER if R is None else [R]
    range = settings.COVERING_RANGE if range is None else range
    growth_factor = settings.COVERING_GROWTH_FACTOR if growth_factor is None else growth_factor
    slack = settings.COVERING_SLACK if slack is None else slack
    for radius in ladder:
        short = weak_equivalence_counts(A, B, radius, range, side, cluster_tol, reconstruction_tol)
        long = weak_equivalence_counts(A, B, radius, growth_factor * range, side, cluster_tol, reconstruction_tol)
        if long.max_J_count - short.max_J_count > slack or long.max_I_count - short.max_I_count > slack:
            logging.info(f"Counts grow from ({short}) to ({long}) at R={radius}")
            return False
    return True


def neighbourhood(covering: InducedCovering, j: int, k: int) -> tuple:
    """
    Shell span of P_j^{k*}.

    P_l meets P_j iff |l - j| <= width, so every step of the chain widens the span by width shells. In an
    inhomogeneous covering a chain from P_j reaches the central set once j <= k * width.
    """
    lo, hi = covering.shells(j)
    width = covering.width
    if covering.kind == CoveringKind.INHOMOGENEOUS and j <= k * width:
        return -math.inf, hi + k * width
    return lo - k * width, hi + k * width


def required_order(covering: InducedCovering, low: int, high: int, k_max: int) -> Optional[int]:
    """Smallest k <= k_max such that some P_j^{k*} spans the shells low..high, or None"""
    lo, hi = covering.shell_bounds
    width = covering.width
    for k in range(k_max + 1):
        # the smallest j reaching high has the lowest lower end
        j = high - hi - k * width
        if covering.kind == CoveringKind.INHOMOGENEOUS:
            j = max(j, 0)
        if neighbourhood(covering, j, k)[0] <= low:
            return k
        if width == 0:
            return None
    return None


def subordination_index(covQ: InducedCovering, covP: InducedCovering, k_max: Optional[int] = None,
                        n: int = 200, seed: Optional[int] = None) -> Optional[int]:
    """
    Smallest k <= k_max with every sampled Q_i (i in the index range of covQ) inside some P_j^{k*}, or None.

    P is taken as the full infinite covering; only Q is truncated to its index range. Q_i is sampled as
    B^o (B^-o A^i) applied to one annulus sample, with the shell offset o following the median shell so that
    B^-o A^i stays moderate. Both dilations act in the real Jordan coordinates of A, see common_frame.
    """
    if covQ.kind != covP.kind:
        raise KindMismatch(f"Cannot compare a {covQ.kind.value} with a {covP.kind.value} covering")
    if covQ.quasi_norm.dim != covP.quasi_norm.dim:
        raise DimensionMismatch("Coverings live in different dimensions")
    k_max = settings.SUBORDINATION_K_MAX if k_max is None else k_max
    q, p, to_frame = common_frame(covQ.quasi_norm, covP.quasi_norm)
    annulus = to_frame @ base_sample(covQ, n, seed)
    first, last = covQ.index_range

    required = 0
    forward = range(max(first, 0), last + 1)
    backward = range(min(last, -1), first - 1, -1)
    for indices, step in ((forward, q.matrix), (backward, q.inverse)):
        if not indices:
            continue
        transfer, offset = _power(q, indices.start), 0
        for count, i in enumerate(indices):
            if count:
                transfer = transfer @ step
            if _is_central(covQ, i):
                shells = shell_indices(p, to_frame @ base_sample(covQ, n, seed, central=True))
            else:
                shells = shell_indices(p, transfer @ annulus) + offset
            order = required_order(covP, int(shells.min()), int(shells.max()), k_max)
            if order is None:
                logging.info(f"Q_{i} is not inside any P_j^(k*) with k <= {k_max}")
                return None
            required = max(required, order)
            if not _is_central(covQ, i):
                shift = int(np.median(shells)) - offset
                transfer = _power(p, -shift) @ transfer
                offset += shift
    logging.debug(f"Subordination index {required} over indices {covQ.index_range}")
    return required


def subordinated(A, B, kind: CoveringKind = CoveringKind.HOMOGENEOUS, range: Optional[int] = None,
                 growth_factor: Optional[int] = None, k_max: Optional[int] = None, slack: int = 1,
                 seed: Optional[int] = None) -> bool:
    """
    Finite-scale equivalence of the coverings induced by A and B: each is almost subordinate to the other, with
    an index that grows by at most slack when the index range grows by growth_factor.
    """
    range = settings.COVERING_RANGE if range is None else range
    growth_factor = settings.COVERING_GROWTH_FACTOR if growth_factor is None else growth_factor
    kind = CoveringKind(kind)
    A = require_expansive(A, "A")
    B = require_expansive(B, "B")
    same_dimension(A, B)
    qA, qB = build_ellipsoid(A, seed=seed), build_ellipsoid(B, seed=seed)

    for first, second in ((qA, qB), (qB, qA)):
        covP = induced_covering(second.matrix, kind, quasi_norm=second)
        orders = []
        for extent in (range, growth_factor * range):
            lower = 0 if kind == CoveringKind.INHOMOGENEOUS else -extent
            covQ = induced_covering(first.matrix, kind, index_range=(lower, extent), quasi_norm=first)
            orders.append(subordination_index(covQ, covP, k_max, seed=seed))
        if None in orders or orders[1] - orders[0] > slack:
            logging.info(f"Subordination indices {orders} over ranges {range} and {growth_factor * range}")
            return False
    return True
