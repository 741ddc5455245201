"""
Dense operator value types for small open quantum systems.

All types are immutable after construction. Units: hbar = k_B = 1.
Superoperators act on column-stacked operators, vec(A X B) = (B^T kron A) vec(X).
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from app.utils.errors import DimensionMismatch, InvalidOperator, NonPositiveState

HERMITIAN_ATOL = 1e-12
TRACE_ATOL = 1e-12
POSITIVITY_ATOL = 1e-10
BLOCH_ATOL = 1e-10


def vec(operator):
    """Column-stack an operator into a vector"""
    return np.asarray(operator, dtype=complex).reshape(-1, order='F')


def unvec(vector, dim):
    """Inverse of vec"""
    return np.asarray(vector, dtype=complex).reshape(dim, dim, order='F')


def as_matrix(operator):
    """Accept a typed operator or a raw array and return a complex matrix"""
    entries = getattr(operator, 'entries', operator)
    return np.asarray(entries, dtype=complex)


def _hermitian_tolerance(entries):
    scale = float(np.max(np.abs(entries))) if entries.size else 0.0
    return HERMITIAN_ATOL * max(1.0, scale)


def _square(entries, name):
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        raise DimensionMismatch(f"{name} must be a square matrix, got shape {entries.shape}")
    if entries.shape[0] < 1:
        raise DimensionMismatch(f"{name} must have positive dimension")


@dataclass(frozen=True)
class HermitianOperator:
    """Hermitian matrix such as H(lambda) or one of its generators dH/dlambda^i."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        _square(entries, "HermitianOperator")
        if np.max(np.abs(entries - entries.conj().T)) > _hermitian_tolerance(entries):
            raise InvalidOperator("operator is not Hermitian")
        entries.setflags(write=False)
        object.__setattr__(self, 'entries', entries)

    @property
    def dim(self):
        return self.entries.shape[0]

    @staticmethod
    def zeros(dim):
        return HermitianOperator(np.zeros((dim, dim), dtype=complex))

    def eigh(self):
        return np.linalg.eigh(self.entries)

    def __add__(self, other):
        return HermitianOperator(self.entries + as_matrix(other))

    def __sub__(self, other):
        return HermitianOperator(self.entries - as_matrix(other))

    def scaled(self, factor):
        return HermitianOperator(self.entries * float(factor))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite state."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        _square(entries, "DensityMatrix")
        if np.max(np.abs(entries - entries.conj().T)) > HERMITIAN_ATOL:
            raise InvalidOperator("density matrix is not Hermitian")
        if abs(np.trace(entries) - 1.0) > TRACE_ATOL:
            raise InvalidOperator(f"density matrix trace is {np.trace(entries).real!r}, expected 1")
        min_eig = float(np.min(np.linalg.eigvalsh(entries)))
        if min_eig < -POSITIVITY_ATOL:
            raise NonPositiveState(f"density matrix has eigenvalue {min_eig:.3e}")
        entries.setflags(write=False)
        object.__setattr__(self, 'entries', entries)

    @property
    def dim(self):
        return self.entries.shape[0]

    def expectation(self, operator):
        """Real part of Tr[rho O]"""
        return float(np.real(np.trace(self.entries @ as_matrix(operator))))

    @staticmethod
    def maximally_mixed(dim):
        return DensityMatrix(np.eye(dim, dtype=complex) / dim)


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ('x', 'y', 'z'):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.norm() ** 2 > 1.0 + BLOCH_ATOL:
            raise InvalidOperator(f"Bloch vector norm {self.norm():.12f} exceeds 1")

    def norm(self):
        return float(np.sqrt(self.x ** 2 + self.y ** 2 + self.z ** 2))

    def as_array(self):
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class LindbladTerm:
    """Jump operator L with a nonnegative rate, contributing rate * D_L[rho]."""

    jump: np.ndarray
    rate: float

    def __post_init__(self):
        jump = np.array(self.jump, dtype=complex)
        _square(jump, "jump operator")
        if not np.isfinite(self.rate) or self.rate < 0:
            raise ValueError(f"Lindblad rate must be nonnegative, got {self.rate}")
        jump.setflags(write=False)
        object.__setattr__(self, 'jump', jump)
        object.__setattr__(self, 'rate', float(self.rate))

    @property
    def dim(self):
        return self.jump.shape[0]


@dataclass(frozen=True)
class Superoperator:
    """Matrix of a linear map on column-stacked dim x dim operators."""

    matrix: np.ndarray
    dim: int = field(default=0)

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatch(f"superoperator must be square, got {matrix.shape}")
        dim = int(round(np.sqrt(matrix.shape[0])))
        if dim * dim != matrix.shape[0]:
            raise DimensionMismatch(f"superoperator size {matrix.shape[0]} is not a square")
        if self.dim and self.dim != dim:
            raise DimensionMismatch(f"declared dim {self.dim} does not match matrix size")
        matrix.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)
        object.__setattr__(self, 'dim', dim)

    def apply(self, operator):
        """Image L[X] as a dim x dim matrix"""
        entries = as_matrix(operator)
        if entries.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"operator shape {entries.shape} does not match dim {self.dim}")
        return unvec(self.matrix @ vec(entries), self.dim)

    @cached_property
    def scale(self):
        """Rate scale used to normalize singular-value thresholds"""
        return float(np.max(np.abs(self.matrix))) if self.matrix.size else 0.0

    @cached_property
    def spectrum(self):
        """Eigenvalues sorted by modulus, cached"""
        values = np.linalg.eigvals(self.matrix)
        return values[np.argsort(np.abs(values), kind='stable')]

    def scaled(self, factor):
        return Superoperator(self.matrix * factor)
