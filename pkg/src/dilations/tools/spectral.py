import logging
import math
from typing import Optional

import numpy as np
import scipy.linalg

from django.conf import settings
from .linalg_core import as_matrix, spectrum, generalized_kernel
from ..errors import ZeroVector, NotExpansive, InvalidInput
from ..models import EigenFiltrationSpace, GrowthEstimate, EigenBounds, frozen_array


def _realify(vectors: list, d: int) -> np.ndarray:
    """Orthonormal real basis of the span of the real and imaginary parts of complex kernel vectors"""
    columns = []
    for kernel in vectors:
        if np.iscomplexobj(kernel):
            columns.extend([np.real(kernel), np.imag(kernel)])
        else:
            columns.append(kernel)
    columns = [c for c in columns if c.shape[1] > 0]
    if not columns:
        return np.zeros((d, 0))
    return scipy.linalg.orth(np.column_stack(columns), rcond=settings.KERNEL_RANK_TOL)


def _modulus_kernels(A: np.ndarray, r: float, m: int, tol: float, lower: bool) -> list:
    radius_tol = tol * max(1.0, r)
    kernels = []
    for value, multiplicity in spectrum(A, tol).clusters:
        if value.imag < 0:
            continue
        modulus = abs(value)
        if abs(modulus - r) <= radius_tol:
            power = min(m, multiplicity)
        elif modulus < r and lower:
            power = multiplicity
        else:
            continue
        if power:
            kernels.append(generalized_kernel(A, value, power))
    return kernels


def _check_filtration_args(A: np.ndarray, r: float, m: int):
    d = A.shape[0]
    if r <= 0 or not 0 <= m <= d:
        raise InvalidInput(f"E(A, r, m) needs r > 0 and 0 <= m <= {d}, got r={r}, m={m}")


def generalized_eigenspace(A, r: float, m: int, tol: Optional[float] = None) -> EigenFiltrationSpace:
    """
    E(A, r, m): kernels of (A - lambda I)^m for |lambda| = r together with the full generalized eigenspaces of all
    eigenvalues of modulus below r, realified.
    """
    A = as_matrix(A)
    tol = settings.EIGENVALUE_CLUSTER_TOL if tol is None else tol
    _check_filtration_args(A, r, m)
    basis = _realify(_modulus_kernels(A, r, m, tol, lower=True), A.shape[0])
    logging.debug(f"E(A, {r:.6g}, {m}) has dimension {basis.shape[1]}")
    return EigenFiltrationSpace(matrix=frozen_array(A), modulus=r, order=m, basis=frozen_array(basis))


def modulus_span(A, r: float, m: int, tol: Optional[float] = None) -> EigenFiltrationSpace:
    """Span of the kernels of (A - lambda I)^m over the eigenvalues with |lambda| = r only"""
    A = as_matrix(A)
    tol = settings.EIGENVALUE_CLUSTER_TOL if tol is None else tol
    _check_filtration_args(A, r, m)
    basis = _realify(_modulus_kernels(A, r, m, tol, lower=False), A.shape[0])
    return EigenFiltrationSpace(matrix=frozen_array(A), modulus=r, order=m, basis=frozen_array(basis))


def log_norm_orbit(A: np.ndarray, z: np.ndarray, k_max: int) -> np.ndarray:
    """log |A^k z| for k = 0..k_max, renormalizing at every step"""
    norm = np.linalg.norm(z)
    if norm == 0:
        raise ZeroVector("Cannot follow the orbit of the zero vector")
    logs = np.empty(k_max + 1)
    logs[0] = math.log(norm)
    v = z / norm
    for k in range(1, k_max + 1):
        v = A @ v
        step = np.linalg.norm(v)
        logs[k] = logs[k - 1] + math.log(step)
        v = v / step
    return logs


def growth_exponents(A, z, k_min: int = 10, k_max: int = 80) -> GrowthEstimate:
    """
    Fit |A^k z| ~ c k^m r^k over k_min <= k <= k_max.

    For every integer m in 0..d-1 the remaining two parameters are fitted by least squares in log space; the m
    with the smallest maximal relative deviation wins, ties going to the smaller m.
    """
    A = as_matrix(A)
    z = np.asarray(z, dtype=float).reshape(-1)
    if not np.any(z):
        raise ZeroVector("Growth of the zero vector is undefined")
    if k_min < 1 or k_max - k_min < 20:
        raise InvalidInput(f"Need 1 <= k_min and k_max - k_min >= 20, got [{k_min}, {k_max}]")
    d = A.shape[0]
    ks = np.arange(k_min, k_max + 1, dtype=float)
    y = log_norm_orbit(A, z, k_max)[k_min:]
    design = np.column_stack([np.ones_like(ks), ks])

    best = None
    for m in range(d):
        target = y - m * np.log(ks)
        (log_c, log_r), *_ = np.linalg.lstsq(design, target, rcond=None)
        residual = float(np.max(np.abs(np.expm1(target - log_c - log_r * ks))))
        logging.debug(f"Growth fit m={m}: r={math.exp(log_r):.6g}, residual={residual:.3g}")
        if best is None or residual < best[2] * (1 - 1e-9) - 1e-12:
            best = (m, math.exp(log_r), residual)

    full_design = np.column_stack([np.ones_like(ks), np.log(ks), ks])
    (_, continuous_degree, _), *_ = np.linalg.lstsq(full_design, y, rcond=None)
    m, rate, residual = best
    return GrowthEstimate(rate=rate, polynomial_degree=m, fit_residual=residual, k_range=(k_min, k_max),
                          continuous_degree=float(continuous_degree))


def _sandwich_violation(A: np.ndarray, X: np.ndarray, j_max: int, lambda_minus: float,
                        lambda_plus: float) -> float:
    """Smallest log c for which (1/c) lambda_-^j <= |A^j x| <= c lambda_+^j holds on the unit columns of X"""
    worst = 0.0
    log_norms = np.zeros(X.shape[1])
    V = X.copy()
    for j in range(j_max + 1):
        if j:
            V = A @ V
            steps = np.linalg.norm(V, axis=0)
            log_norms += np.log(steps)
            V = V / steps
        worst = max(worst, float(np.max(j * math.log(lambda_minus) - log_norms)),
                    float(np.max(log_norms - j * math.log(lambda_plus))))
    return worst


def _unit_vectors(rng: np.random.Generator, d: int, n: int) -> np.ndarray:
    X = rng.standard_normal((d, n))
    return X / np.linalg.norm(X, axis=0)


def eigen_bounds(A, margin: float, n_samples: int = 100, j_max: int = 40,
                 seed: Optional[int] = None) -> EigenBounds:
    """
    Constants with (1/c) lambda_-^j |x| <= |A^j x| <= c lambda_+^j |x| for j >= 0.

    c is fitted on one random sample of unit vectors and then certified on a fresh one, growing if the fresh
    sample needs it.
    """
    A = as_matrix(A)
    seed = settings.SEED if seed is None else seed
    moduli = [abs(value) for value, _ in spectrum(A).clusters]
    lowest, highest = min(moduli), max(moduli)
    if lowest <= 1:
        raise NotExpansive(f"Smallest eigenvalue modulus {lowest:.6g} is not above 1")
    lambda_minus = lowest * (1 - margin)
    lambda_plus = highest * (1 + margin)
    if margin <= 0 or margin >= lowest - 1 or lambda_minus <= 1:
        raise NotExpansive(f"Margin {margin} leaves no room between 1 and the smallest eigenvalue modulus "
                           f"{lowest:.6g}")

    rng = np.random.default_rng(seed)
    d = A.shape[0]
    log_c = _sandwich_violation(A, _unit_vectors(rng, d, n_samples), j_max, lambda_minus, lambda_plus)
    certified = _sandwich_violation(A, _unit_vectors(rng, d, n_samples), j_max, lambda_minus, lambda_plus)
    if certified > log_c:
        logging.info(f"Fresh sample enlarged the sandwich constant from {math.exp(log_c):.6g} "
                     f"to {math.exp(certified):.6g}")
        log_c = certified
    return EigenBounds(lambda_minus=lambda_minus, lambda_plus=lambda_plus, c=math.exp(log_c))
