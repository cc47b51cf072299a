import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.linalg


def frozen_array(values, dtype=float) -> np.ndarray:
    """Copy values into a read-only array so that frozen dataclasses stay immutable"""
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


class ProbeSide(str, Enum):
    TWO_SIDED = "two_sided"
    POSITIVE_ONLY = "positive_only"


class CoveringKind(str, Enum):
    HOMOGENEOUS = "homogeneous"
    INHOMOGENEOUS = "inhomogeneous"


class GrowthClass(str, Enum):
    BOUNDED = "bounded"
    POLYNOMIAL = "polynomial"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalue clusters of a real matrix, each with its algebraic multiplicity"""
    clusters: tuple
    cluster_tolerance: float

    def __str__(self):
        return ", ".join(f"{value:.6g} (x{multiplicity})" for value, multiplicity in self.clusters)

    @property
    def dim(self) -> int:
        return sum(multiplicity for _, multiplicity in self.clusters)

    @property
    def values(self) -> list:
        """All eigenvalues, repeated according to multiplicity"""
        return [value for value, multiplicity in self.clusters for _ in range(multiplicity)]

    @property
    def moduli(self) -> list:
        return sorted({abs(value) for value, _ in self.clusters}, reverse=True)

    @property
    def min_modulus(self) -> float:
        return min(abs(value) for value, _ in self.clusters)

    @property
    def max_modulus(self) -> float:
        return max(abs(value) for value, _ in self.clusters)


@dataclass(frozen=True)
class RealJordanBlock:
    """
    Aggregate real Jordan block of one eigenvalue r*w.

    size counts cells: scalars for real eigenvalues, 2x2 cells M_z for complex ones. superdiagonal holds the
    size - 1 flags z_i in {0, 1}; a zero flag separates two elementary Jordan blocks.
    """
    modulus: float
    rotation: complex
    size: int
    superdiagonal: tuple

    def __str__(self):
        return f"J({self.eigenvalue:.6g}, size={self.size}, flags={list(self.superdiagonal)})"

    @property
    def is_real(self) -> bool:
        return self.rotation.imag == 0

    @property
    def eigenvalue(self) -> complex:
        return self.modulus * self.rotation

    @property
    def cell(self) -> int:
        return 1 if self.is_real else 2

    @property
    def dim(self) -> int:
        return self.size * self.cell

    @staticmethod
    def complex_cell(z: complex) -> np.ndarray:
        """The 2x2 real matrix M_z = [[Re z, Im z], [-Im z, Re z]]"""
        return np.array([[z.real, z.imag], [-z.imag, z.real]])

    def _assemble(self, diagonal: complex, upper: complex) -> np.ndarray:
        n = self.cell
        block = np.zeros((self.dim, self.dim))
        for i in range(self.size):
            if self.is_real:
                block[i, i] = diagonal.real
            else:
                block[n * i:n * i + n, n * i:n * i + n] = self.complex_cell(diagonal)
        for i, flag in enumerate(self.superdiagonal):
            if not flag:
                continue
            if self.is_real:
                block[i, i + 1] = upper.real
            else:
                block[n * i:n * i + n, n * (i + 1):n * (i + 1) + n] = self.complex_cell(upper)
        return block

    def matrix(self) -> np.ndarray:
        return self._assemble(self.eigenvalue, 1)

    def rotation_part(self) -> np.ndarray:
        """Orthogonal factor D1 = diag(M_w) of the block"""
        return self._assemble(self.rotation, 0)

    def positive_part(self) -> np.ndarray:
        """Factor D2 with D1 * D2 = block, having the single eigenvalue r"""
        return self._assemble(self.modulus, self.rotation.conjugate())


@dataclass(frozen=True)
class RealJordanDecomposition:
    """A = C J C^-1 with J block diagonal made of real Jordan blocks, ordered by decreasing modulus"""
    basis: np.ndarray
    blocks: tuple
    reconstruction_error: float
    cluster_tolerance: float

    def __str__(self):
        return " + ".join(str(block) for block in self.blocks)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @cached_property
    def inverse_basis(self) -> np.ndarray:
        return frozen_array(np.linalg.inv(self.basis))

    @property
    def condition(self) -> float:
        return float(np.linalg.cond(self.basis))

    def jordan_matrix(self) -> np.ndarray:
        return scipy.linalg.block_diag(*[block.matrix() for block in self.blocks])

    def inverse_jordan_matrix(self) -> np.ndarray:
        return scipy.linalg.block_diag(*[np.linalg.inv(block.matrix()) for block in self.blocks])

    def reconstruct(self, inner: Optional[np.ndarray] = None) -> np.ndarray:
        """C X C^-1 for X = J (default) or any matrix given in Jordan coordinates"""
        inner = self.jordan_matrix() if inner is None else inner
        return self.basis @ inner @ self.inverse_basis

    def block_extents(self) -> list:
        extents = []
        start = 0
        for block in self.blocks:
            extents.append((start, start + block.dim))
            start += block.dim
        return extents

    def group_extents(self) -> list:
        """
        Index ranges of the aggregate blocks belonging to one eigenvalue modulus.

        Blocks are ordered by decreasing modulus, so every group is a contiguous range.
        """
        groups = []
        for block, (start, stop) in zip(self.blocks, self.block_extents()):
            if groups and math.isclose(groups[-1][0], block.modulus, rel_tol=self.cluster_tolerance):
                groups[-1] = (groups[-1][0], (groups[-1][1][0], stop))
            else:
                groups.append((block.modulus, (start, stop)))
        return groups


@dataclass(frozen=True)
class EigenFiltrationSpace:
    """Realified E(A, r, m) with an orthonormal basis stored column-wise"""
    matrix: np.ndarray
    modulus: float
    order: int
    basis: np.ndarray

    def __str__(self):
        return f"E(A, {self.modulus:.6g}, {self.order}) of dimension {self.dim}"

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class GrowthEstimate:
    rate: float
    polynomial_degree: int
    fit_residual: float
    k_range: tuple
    continuous_degree: float = float("nan")

    def __str__(self):
        return f"|A^k z| ~ k^{self.polynomial_degree} {self.rate:.6g}^k (residual {self.fit_residual:.3g})"


@dataclass(frozen=True)
class EigenBounds:
    lambda_minus: float
    lambda_plus: float
    c: float


@dataclass(frozen=True)
class StepQuasiNorm:
    """
    Step homogeneous quasi-norm rho_A built from the ellipsoid {x : x^T P x < scale} of volume one
    """
    matrix: np.ndarray
    inverse: np.ndarray
    P: np.ndarray
    scale: float
    det_abs: float
    nesting_ratio: float
    delta: float

    def __str__(self):
        return f"rho_A with |det A| = {self.det_abs:.6g}, nesting ratio {self.nesting_ratio:.6g}"

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def form(self, points: np.ndarray) -> np.ndarray:
        """x^T P x for every column x of points"""
        return np.einsum("in,ij,jn->n", points, self.P, points)


@dataclass(frozen=True)
class QuasiNormComparison:
    """Ratios rho_B / rho_A sampled over directions (columns) and log-spaced radii (rows)"""
    ratio_low: float
    ratio_high: float
    ratio_low_far: float
    ratio_high_far: float
    radii: np.ndarray
    ratios: np.ndarray

    @property
    def spread(self) -> float:
        return self.ratio_high / self.ratio_low

    @property
    def spread_far(self) -> float:
        return self.ratio_high_far / self.ratio_low_far

    def rows(self):
        for radius, ratios in zip(self.radii, self.ratios):
            for direction, ratio in enumerate(ratios):
                yield radius, direction, ratio


@dataclass(frozen=True)
class NormalForm:
    """The unique equivalent matrix with positive eigenvalues and determinant 2"""
    matrix: np.ndarray
    basis: np.ndarray
    block_pattern: tuple
    t_scale: float
    provenance: str

    def __str__(self):
        return f"NormalForm({self.matrix.tolist()})"

    @property
    def eigenvalues(self) -> list:
        """Eigenvalue of every block group, repeated by the group's dimension"""
        return [value for value, (start, stop) in self.block_pattern for _ in range(stop - start)]

    def to_dict(self) -> dict:
        return {
            "matrix": self.matrix.tolist(),
            "basis": self.basis.tolist(),
            "block_pattern": [{"eigenvalue": value, "start": start, "stop": stop}
                              for value, (start, stop) in self.block_pattern],
            "t_scale": self.t_scale,
            "provenance": self.provenance,
        }


@dataclass(frozen=True)
class ProbeSeries:
    """Samples k -> log ||A^-k B^floor(eps k)|| with a growth classification"""
    ks: tuple
    log_norms: tuple
    classification: GrowthClass
    side: ProbeSide
    degree: Optional[int] = None
    rate: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)

    def __str__(self):
        if self.classification == GrowthClass.POLYNOMIAL:
            return f"polynomial(degree={self.degree})"
        if self.classification == GrowthClass.EXPONENTIAL:
            return f"exponential(rate={self.rate:.6g})"
        return self.classification.value

    @property
    def is_bounded(self) -> bool:
        return self.classification == GrowthClass.BOUNDED

    def summary(self) -> dict:
        return {"side": self.side.value, "classification": str(self), "k_max": max(abs(k) for k in self.ks),
                **self.diagnostics}


@dataclass(frozen=True)
class EquivalenceDecision:
    """A normal-form verdict together with its margin and the probe oracle"""
    equal: bool
    margin: float
    oracle: ProbeSeries

    def __bool__(self):
        return self.equal

    @property
    def agrees(self) -> bool:
        return self.equal == self.oracle.is_bounded


@dataclass(frozen=True)
class EigenspaceReport:
    coarse: bool
    max_distance: float
    distances: tuple

    def to_dict(self) -> dict:
        return {"mode": "coarse" if self.coarse else "full", "max_distance": self.max_distance,
                "distances": [{"kind": kind, "r": r, "m": m, "distance": distance}
                              for kind, r, m, distance in self.distances]}


@dataclass(frozen=True)
class Verdict:
    hom_besov_equal: bool
    inhom_besov_equal: bool
    hardy_equal: bool
    epsilon: float
    normal_form_A: NormalForm
    normal_form_B: NormalForm
    probes: dict
    eigenspaces: EigenspaceReport
    margins: dict
    tolerances: dict
    quasi_norms: Optional[dict] = None
    warnings: tuple = ()

    def __str__(self):
        return (f"hom_besov_equal={self.hom_besov_equal}, inhom_besov_equal={self.inhom_besov_equal}, "
                f"hardy_equal={self.hardy_equal}")

    def to_dict(self) -> dict:
        report = {
            "schema": 1,
            "hom_besov_equal": self.hom_besov_equal,
            "inhom_besov_equal": self.inhom_besov_equal,
            "hardy_equal": self.hardy_equal,
            "epsilon": self.epsilon,
            "normal_form_A": self.normal_form_A.to_dict(),
            "normal_form_B": self.normal_form_B.to_dict(),
            "probe_summary": {name: probe.summary() for name, probe in self.probes.items()},
            "eigenspaces": self.eigenspaces.to_dict(),
            "margins": self.margins,
            "tolerances": self.tolerances,
            "warnings": list(self.warnings),
        }
        if self.quasi_norms is not None:
            report["quasi_norms"] = self.quasi_norms
        return report


@dataclass(frozen=True)
class InducedCovering:
    """
    Q_j = A^j Q_0 with Q_0 = {x : a <= rho_A(x) <= b}, realized through integer shell indices of rho_A
    """
    matrix: np.ndarray
    kind: CoveringKind
    base_annulus: tuple
    quasi_norm: StepQuasiNorm
    index_range: tuple

    def __str__(self):
        a, b = self.base_annulus
        return f"{self.kind.value} covering with Q_0 = {{{a:.6g} <= rho <= {b:.6g}}} on {self.index_range}"

    @staticmethod
    def _log(value: float, base: float) -> float:
        return math.log(value) / math.log(base)

    @cached_property
    def shell_bounds(self) -> tuple:
        """Shell indices lo..hi with a <= |det A|^i <= b"""
        a, b = self.base_annulus
        base = self.quasi_norm.det_abs
        lo, hi = self._log(a, base), self._log(b, base)
        lo = round(lo) if abs(lo - round(lo)) < 1e-9 else math.ceil(lo)
        hi = round(hi) if abs(hi - round(hi)) < 1e-9 else math.floor(hi)
        return lo, hi

    @property
    def width(self) -> int:
        lo, hi = self.shell_bounds
        return hi - lo

    @property
    def indices(self) -> range:
        return range(self.index_range[0], self.index_range[1] + 1)

    def shells(self, j: int) -> tuple:
        """Shell index interval covered by Q_j; the central set of an inhomogeneous covering is unbounded below"""
        lo, hi = self.shell_bounds
        if self.kind == CoveringKind.INHOMOGENEOUS and j == 0:
            return -math.inf, hi
        return j + lo, j + hi

    def contains(self, j: int, shell_indices: np.ndarray) -> np.ndarray:
        lo, hi = self.shells(j)
        return (shell_indices >= lo) & (shell_indices <= hi)


@dataclass(frozen=True)
class WeakEquivalenceTable:
    max_J_count: int
    max_I_count: int
    rows: tuple

    def __str__(self):
        return f"max |J_i| = {self.max_J_count}, max |I_j| = {self.max_I_count}"


@dataclass
class JobConfig:
    command: str
    matrices: dict
    tol_eig: float
    tol_jordan: float
    tol_verdict: float
    k_max: int
    seed: int
    r_ladder: list
    covering_range: int
    side: ProbeSide = ProbeSide.POSITIVE_ONLY
    out: Optional[str] = None
    compare_quasi_norms: bool = False
