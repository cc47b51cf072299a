"""
Dense real linear algebra for expansive matrices: spectra, real Jordan normal form, structured exponential and
logarithm, operator norms.

Public functions only take and return real arrays; complex arithmetic stays inside the eigenvalue and kernel
computations.
"""
import logging
import math
from typing import Optional

import numpy as np
import scipy.linalg

from django.conf import settings
from ..errors import InvalidMatrix, SingularMatrix, NotExpansive, NotUnipotent, IllConditionedBasis, \
    UnresolvedSpectrum, ReconstructionFailed
from ..models import Spectrum, RealJordanBlock, RealJordanDecomposition, frozen_array

SINGULAR_MODULUS = 1e-12


def as_matrix(A) -> np.ndarray:
    """Validate A as a finite square real matrix of dimension >= 1"""
    try:
        matrix = np.array(A, dtype=float)
    except (TypeError, ValueError) as e:
        raise InvalidMatrix(f"Not a real matrix: {e}")
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] < 1:
        raise InvalidMatrix(f"Expected a square matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise InvalidMatrix("Matrix entries must be finite")
    return matrix


def operator_norm(A) -> float:
    """Largest singular value, sup_{|x|=1} |Ax|"""
    return float(np.linalg.norm(as_matrix(A), 2))


def _kernel(M: np.ndarray, rank_tol: float) -> np.ndarray:
    """Orthonormal kernel basis; singular values below rank_tol * max(1, sigma_max) count as zero"""
    _, sigma, Vh = scipy.linalg.svd(M)
    rank = int(np.sum(sigma > rank_tol * max(1.0, float(sigma[0]))))
    return Vh[rank:].conj().T


def generalized_kernel(A: np.ndarray, value: complex, power: int, rank_tol: Optional[float] = None) -> np.ndarray:
    """Orthonormal basis of Ker (A - value I)^power, complex whenever value is"""
    rank_tol = settings.KERNEL_RANK_TOL if rank_tol is None else rank_tol
    d = A.shape[0]
    if power == 0:
        return np.zeros((d, 0))
    dtype = complex if value.imag != 0 else float
    shifted = A.astype(dtype) - (value if dtype is complex else value.real) * np.eye(d)
    return _kernel(np.linalg.matrix_power(shifted, power), rank_tol)


def _single_linkage(points: list, threshold: float) -> list:
    """Connected components of points under the relation |p - q| <= threshold"""
    parent = list(range(len(points)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            if abs(points[i] - points[j]) <= threshold:
                parent[find(i)] = find(j)
    components = {}
    for i in range(len(points)):
        components.setdefault(find(i), []).append(i)
    return list(components.values())


def _is_defective_cluster(A: np.ndarray, center: complex, multiplicity: int) -> bool:
    """
    Whether eigenvalues merged at center form one defective eigenvalue: Ker (A - center I)^m has dimension m and A
    compressed to it is center I plus a nilpotent.
    """
    kernel = generalized_kernel(A, center, multiplicity)
    if kernel.shape[1] < multiplicity:
        return False
    V = kernel[:, -multiplicity:]
    Y = V.conj().T @ A @ V - center * np.eye(multiplicity)
    return is_nilpotent(Y)


def _order_key(value: complex) -> tuple:
    return -abs(value), -value.real, -np.sign(value.imag)


def spectrum(A, tol: Optional[float] = None) -> Spectrum:
    """
    Cluster the eigenvalues of A.

    Eigenvalues closer than tol * max(1, |A|) are merged right away. A defective eigenvalue of multiplicity m is
    smeared by rounding over a radius of order tol^(1/m), so coarser groupings are accepted too, but only when the
    generalized kernel at the merged center has the full multiplicity.
    """
    A = as_matrix(A)
    tol = settings.EIGENVALUE_CLUSTER_TOL if tol is None else tol
    d = A.shape[0]
    scale = max(1.0, operator_norm(A))
    values = [complex(v) for v in scipy.linalg.eigvals(A)]

    clusters = [[values[i] for i in component] for component in _single_linkage(values, tol * scale)]
    for level in range(2, d + 1):
        centers = [np.mean(cluster) for cluster in clusters]
        merged = []
        for component in _single_linkage(centers, tol ** (1 / level) * scale):
            members = [v for i in component for v in clusters[i]]
            if len(component) == 1:
                merged.append(members)
                continue
            center = complex(np.mean(members))
            if abs(center.imag) <= tol * scale:
                center = complex(center.real, 0)
            if _is_defective_cluster(A, center, len(members)):
                logging.debug(f"Merged {len(component)} eigenvalue clusters at {center:.6g} (level {level})")
                merged.append(members)
            else:
                merged.extend(clusters[i] for i in component)
        clusters = merged

    result = []
    for cluster in clusters:
        center = complex(np.mean(cluster))
        if abs(center.imag) <= tol * scale:
            center = complex(center.real, 0)
        result.append((center, len(cluster)))

    upper = [(center, multiplicity) for center, multiplicity in result if center.imag >= 0]
    lower = [(center, multiplicity) for center, multiplicity in result if center.imag < 0]
    if sum(m for c, m in upper if c.imag > 0) != sum(m for _, m in lower):
        raise UnresolvedSpectrum("Complex eigenvalue clusters do not come in conjugate pairs")
    for center, multiplicity in upper:
        if center.imag == 0:
            continue
        distance, partner = min((abs(c - center.conjugate()), m) for c, m in lower)
        if partner != multiplicity or distance > tol ** (1 / d) * scale:
            raise UnresolvedSpectrum(f"Eigenvalue {center:.6g} has no conjugate partner of equal multiplicity")

    # conjugate clusters are stored as exact conjugates of the upper half plane representative
    clusters = []
    for center, multiplicity in sorted(upper, key=lambda item: _order_key(item[0])):
        clusters.append((center, multiplicity))
        if center.imag > 0:
            clusters.append((center.conjugate(), multiplicity))
    return Spectrum(clusters=tuple(clusters), cluster_tolerance=tol)


def is_expansive(A, tol: float = 0.0) -> bool:
    """True iff every eigenvalue has modulus > 1 + tol"""
    moduli = np.abs(scipy.linalg.eigvals(as_matrix(A)))
    if np.min(moduli) < SINGULAR_MODULUS:
        raise SingularMatrix("Matrix is numerically singular")
    return bool(np.all(moduli > 1 + tol))


def require_expansive(A, name: str = "A") -> np.ndarray:
    """Validated copy of A; NotExpansive unless every eigenvalue has modulus above 1"""
    A = as_matrix(A)
    if not is_expansive(A):
        raise NotExpansive(f"{name} is not expansive")
    return A


def _jordan_chains(A: np.ndarray, value: complex, multiplicity: int, rank_tol: float) -> list:
    """
    Jordan chains [N^(k-1) v, ..., N v, v] of N = A - value I, longest first.

    Chains are grown greedily from the highest nilpotency order downward: at order k, new chain tops are taken
    from Ker N^k outside of Ker N^(k-1) plus the vectors that existing chains already occupy at that order.
    """
    d = A.shape[0]
    dtype = complex if value.imag != 0 else float
    N = A.astype(dtype) - (value if dtype is complex else value.real) * np.eye(d)
    kernels = [np.zeros((d, 0), dtype=dtype)]
    while kernels[-1].shape[1] < multiplicity:
        if len(kernels) > multiplicity:
            raise UnresolvedSpectrum(f"Generalized eigenspace of {value:.6g} does not reach multiplicity "
                                     f"{multiplicity} (dimensions {[k.shape[1] for k in kernels]})")
        kernels.append(generalized_kernel(A, value, len(kernels), rank_tol).astype(dtype))
    if kernels[-1].shape[1] != multiplicity:
        raise UnresolvedSpectrum(f"Generalized eigenspace of {value:.6g} has dimension {kernels[-1].shape[1]}, "
                                 f"expected {multiplicity}")
    dims = [k.shape[1] for k in kernels]
    index = len(kernels) - 1

    chains = []
    for order in range(index, 0, -1):
        occupied = [chain[order - 1] for chain in chains]
        needed = (dims[order] - dims[order - 1]) - len(occupied)
        if needed <= 0:
            continue
        span = np.column_stack([kernels[order - 1]] + occupied) if occupied or dims[order - 1] else None
        candidates = kernels[order]
        if span is not None and span.shape[1] > 0:
            Q = scipy.linalg.orth(span)
            candidates = candidates - Q @ (Q.conj().T @ candidates)
        U, sigma, _ = scipy.linalg.svd(candidates, full_matrices=False)
        if len(sigma) < needed or sigma[needed - 1] <= rank_tol * max(1.0, sigma[0]):
            raise UnresolvedSpectrum(f"Cannot extend Jordan chains of {value:.6g} at order {order}")
        for top in U[:, :needed].T:
            chain = [top]
            for _ in range(order - 1):
                chain.insert(0, N @ chain[0])
            chains.append(chain)
    chains.sort(key=len, reverse=True)
    return chains


def real_jordan_form(A, tol: Optional[float] = None, condition_cap: Optional[float] = None,
                     reconstruction_tol: Optional[float] = None) -> RealJordanDecomposition:
    """
    Real Jordan normal form A = C J C^-1.

    Blocks are ordered by decreasing eigenvalue modulus, then decreasing real part, then positive imaginary part
    first. Within one eigenvalue the elementary Jordan blocks are ordered by decreasing size and merged into one
    aggregate block whose superdiagonal flags mark the boundaries.
    """
    A = as_matrix(A)
    condition_cap = settings.CONDITION_CAP if condition_cap is None else condition_cap
    reconstruction_tol = settings.JORDAN_RECONSTRUCTION_TOL if reconstruction_tol is None else reconstruction_tol
    rank_tol = settings.KERNEL_RANK_TOL
    eigen = spectrum(A, tol)

    columns = []
    blocks = []
    for value, multiplicity in eigen.clusters:
        if value.imag < 0:
            continue
        chains = _jordan_chains(A, value, multiplicity, rank_tol)
        flags = []
        for chain in chains:
            flags.extend([1] * (len(chain) - 1) + [0])
            for vector in chain:
                if value.imag == 0:
                    columns.append(np.real(vector))
                else:
                    columns.extend([np.real(vector), np.imag(vector)])
        modulus = abs(value)
        rotation = complex(math.copysign(1.0, value.real), 0) if value.imag == 0 else value / modulus
        blocks.append(RealJordanBlock(modulus=modulus, rotation=rotation, size=multiplicity,
                                      superdiagonal=tuple(flags[:-1])))

    C = np.column_stack(columns)
    condition = np.linalg.cond(C)
    if not np.isfinite(condition) or condition > condition_cap:
        raise IllConditionedBasis(f"Jordan basis has condition number {condition:.3g} > {condition_cap:.3g}; "
                                  f"increase the clustering tolerance or preprocess the input exactly")
    decomposition = RealJordanDecomposition(basis=frozen_array(C), blocks=tuple(blocks), reconstruction_error=0.0,
                                            cluster_tolerance=eigen.cluster_tolerance)
    error = float(np.linalg.norm(decomposition.reconstruct() - A, 2))
    if error > reconstruction_tol * max(1.0, operator_norm(A)):
        raise ReconstructionFailed(f"Jordan reconstruction error {error:.3g} exceeds "
                                   f"{reconstruction_tol:.3g} * |A|")
    logging.debug(f"Real Jordan form {decomposition} (cond {condition:.3g}, error {error:.3g})")
    return RealJordanDecomposition(basis=frozen_array(C), blocks=tuple(blocks), reconstruction_error=error,
                                   cluster_tolerance=eigen.cluster_tolerance)


def jordan_matrix(decomposition: RealJordanDecomposition) -> np.ndarray:
    return decomposition.jordan_matrix()


def group_extents(decomposition: RealJordanDecomposition) -> list:
    return [extent for _, extent in decomposition.group_extents()]


def _nilpotency_scale(Y: np.ndarray) -> float:
    return max(1.0, float(np.linalg.norm(Y, 2))) ** Y.shape[0]


def is_nilpotent(Y: np.ndarray, threshold: float = 1e-9) -> bool:
    d = Y.shape[0]
    return float(np.max(np.abs(np.linalg.matrix_power(Y, d)))) <= threshold * _nilpotency_scale(Y)


def nilpotent_log(U) -> np.ndarray:
    """
    Logarithm of a unipotent matrix.

    The series sum_{n>=1} (-1)^(n+1) (U - I)^n / n breaks off after d - 1 terms because U - I is nilpotent.
    """
    U = as_matrix(U)
    d = U.shape[0]
    Y = U - np.eye(d)
    if not is_nilpotent(Y):
        raise NotUnipotent("U - I is not nilpotent")
    result = np.zeros((d, d))
    power = np.eye(d)
    for n in range(1, d):
        power = power @ Y
        result += (-1) ** (n + 1) * power / n
    return result


def nilpotent_exp(N: np.ndarray) -> np.ndarray:
    """exp(N) for nilpotent N, a finite series"""
    d = N.shape[0]
    result = np.eye(d)
    term = np.eye(d)
    for k in range(1, d):
        term = term @ N / k
        result += term
    return result


def structured_exp(X, jordan_hint: Optional[RealJordanDecomposition] = None) -> np.ndarray:
    """
    Matrix exponential.

    With a Jordan hint, X is brought into the hint's coordinates and every block group s I + N is exponentiated
    as e^s exp(N) with the finite nilpotent series. Without a hint (or when X does not fit the hint's block
    structure) scipy's scaling-and-squaring is used.
    """
    X = as_matrix(X)
    if jordan_hint is None:
        return scipy.linalg.expm(X)

    Y = jordan_hint.inverse_basis @ X @ jordan_hint.basis
    extents = group_extents(jordan_hint)
    outside = Y.copy()
    for start, stop in extents:
        outside[start:stop, start:stop] = 0
    if np.max(np.abs(outside)) > 1e-9 * max(1.0, float(np.max(np.abs(Y)))):
        logging.warning("Exponent does not fit the Jordan hint's block structure, falling back to expm")
        return scipy.linalg.expm(X)

    blocks = []
    for start, stop in extents:
        block = Y[start:stop, start:stop]
        shift = np.trace(block) / (stop - start)
        nilpotent = block - shift * np.eye(stop - start)
        if is_nilpotent(nilpotent):
            blocks.append(math.exp(shift) * nilpotent_exp(nilpotent))
        else:
            logging.debug(f"Block {start}:{stop} is not scalar plus nilpotent, using expm")
            blocks.append(scipy.linalg.expm(block))
    return jordan_hint.basis @ scipy.linalg.block_diag(*blocks) @ jordan_hint.inverse_basis


def coupling_matrix(left: RealJordanDecomposition, right: RealJordanDecomposition,
                    tol: Optional[float] = None) -> np.ndarray:
    """
    K = C_left^-1 C_right, the change from the Jordan basis of right to the one of left.

    An entry below tol times the norms of the row of C_left^-1 and the column of C_right it combines is rounding
    noise and set to zero. Powers of the two matrices amplify such entries by ratios of eigenvalue moduli, so two
    matrices with the same generalized eigenspaces would otherwise drift apart.
    """
    tol = settings.COUPLING_TOL if tol is None else tol
    K = left.inverse_basis @ right.basis
    bound = np.outer(np.linalg.norm(left.inverse_basis, axis=1), np.linalg.norm(right.basis, axis=0))
    return np.where(np.abs(K) <= tol * bound, 0.0, K)


def _power_stack(M: np.ndarray, n: int) -> np.ndarray:
    stack = np.empty((n + 1,) + M.shape)
    stack[0] = np.eye(M.shape[0])
    for k in range(1, n + 1):
        stack[k] = M @ stack[k - 1]
    return stack


def normalized_powers(decomposition: RealJordanDecomposition, exponents) -> tuple:
    """
    (J / r)^n and n ln(r) per coordinate for every n in exponents, with J the real Jordan matrix and r the modulus
    of the block a coordinate belongs to.

    J / r has unimodular eigenvalues, so the stacked powers grow at most polynomially in n.
    """
    exponents = np.asarray(exponents, dtype=int).reshape(-1)
    blocks = [block.matrix() / block.modulus for block in decomposition.blocks]
    unit = scipy.linalg.block_diag(*blocks)
    unit_inverse = scipy.linalg.block_diag(*[np.linalg.inv(block) for block in blocks])
    log_moduli = np.concatenate([np.full(block.dim, math.log(block.modulus)) for block in decomposition.blocks])

    forward = _power_stack(unit, int(max(exponents.max(), 0)))
    backward = _power_stack(unit_inverse, int(max(-exponents.min(), 0)))
    stack = np.array([forward[n] if n >= 0 else backward[-n] for n in exponents])
    return stack, exponents[:, None] * log_moduli[None, :]


def jordan_products(left: RealJordanDecomposition, left_powers: tuple, coupling: np.ndarray,
                    right: RealJordanDecomposition, right_powers: tuple) -> tuple:
    """
    X^a Y^b = exp(s) M for stacks of exponents a and b, returned as (M, s).

    The product is C_X (J_X^a K J_Y^b) C_Y^-1 with K the coupling matrix. Every entry of the inner factor is kept
    as a sign and a log modulus until the largest one is known, so neither huge nor tiny eigenvalue powers leave
    floating point range. Stacks of length one broadcast against longer ones.
    """
    PX, lx = left_powers
    PY, ly = right_powers
    inner = PX @ coupling @ PY
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(inner)) + lx[:, :, None] + ly[:, None, :]
    s = logs.max(axis=(1, 2))
    scaled = np.sign(inner) * np.exp(logs - s[:, None, None])
    return left.basis @ scaled @ right.inverse_basis, s


def log_product_norms(left: RealJordanDecomposition, left_powers: tuple, coupling: np.ndarray,
                      right: RealJordanDecomposition, right_powers: tuple) -> np.ndarray:
    """log ||X^a Y^b|| for stacks of exponents, see jordan_products"""
    M, s = jordan_products(left, left_powers, coupling, right, right_powers)
    return s + np.log(np.linalg.norm(M, 2, axis=(1, 2)))
