"""
Geometric objects on the control manifold: work one-form, curvature density
on a coordinate plane, and the dissipation metric.
"""
from dataclasses import dataclass, field
from typing import Callable, ClassVar

import numpy as np

from app.utils.errors import DimensionMismatch, NonPositiveState

METRIC_PSD_ATOL = 1e-9


@dataclass(frozen=True)
class WorkOneForm:
    """Components A_i = Tr[rho* dH/dlambda^i] at one point"""

    point: np.ndarray
    components: np.ndarray
    coordinates: tuple = ()

    def __post_init__(self):
        components = np.asarray(self.components, dtype=float).reshape(-1)
        point = np.asarray(self.point, dtype=float).reshape(-1)
        if components.shape != point.shape:
            raise DimensionMismatch("one-form needs one component per coordinate")
        object.__setattr__(self, 'components', components)
        object.__setattr__(self, 'point', point)

    def __getitem__(self, index):
        return float(self.components[index])

    def contract(self, tangent):
        """A_i dlambda^i for a tangent vector"""
        return float(np.dot(self.components, np.asarray(tangent, dtype=float)))


@dataclass(frozen=True)
class CurvatureField:
    """
    Scalar density Omega_ij on the (i, j) coordinate plane.

    The density callable takes two coordinate arrays of equal shape and is
    expected to broadcast. Swapping the plane orientation negates it.
    """

    MODE_FD: ClassVar[str] = "fd-generic"
    MODE_COHERENT: ClassVar[str] = "coherent-closed-form"
    MODE_BASELINE: ClassVar[str] = "thermal-baseline"
    MODE_ZERO: ClassVar[str] = "zero"
    MODES: ClassVar[tuple] = ("fd-generic", "coherent-closed-form", "thermal-baseline", "zero")

    density: Callable
    mode: str
    plane: tuple = (0, 1)
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in self.MODES:
            raise ValueError(f"unknown curvature mode {self.mode!r}")
        if len(self.plane) != 2 or self.plane[0] == self.plane[1]:
            raise ValueError(f"plane must name two distinct coordinates, got {self.plane}")
        object.__setattr__(self, 'plane', tuple(int(i) for i in self.plane))

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.asarray(self.density(x, y), dtype=float) * np.ones(np.broadcast(x, y).shape)

    def transposed(self):
        """The same two-form expressed on the (j, i) plane"""
        density = self.density
        return CurvatureField(
            density=lambda x, y: -np.asarray(density(y, x), dtype=float),
            mode=self.mode,
            plane=(self.plane[1], self.plane[0]),
            parameters=dict(self.parameters),
        )

    @staticmethod
    def zero(plane=(0, 1)):
        return CurvatureField(density=lambda x, y: np.zeros(np.broadcast(x, y).shape), mode="zero", plane=plane)


@dataclass(frozen=True)
class DissipationMetric:
    """Symmetrized metric g_ij with the raw asymmetry kept as a diagnostic"""

    matrix: np.ndarray
    asymmetry: float = 0.0
    point: np.ndarray = None

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatch(f"metric must be square, got {matrix.shape}")
        matrix = 0.5 * (matrix + matrix.T)
        scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
        if matrix.size and self.min_eigenvalue_of(matrix) < -METRIC_PSD_ATOL * scale:
            raise NonPositiveState(f"metric eigenvalue {self.min_eigenvalue_of(matrix):.3e} is negative")
        object.__setattr__(self, 'matrix', matrix)
        object.__setattr__(self, 'asymmetry', float(self.asymmetry))

    @staticmethod
    def min_eigenvalue_of(matrix):
        return float(np.min(np.linalg.eigvalsh(matrix)))

    @property
    def min_eigenvalue(self):
        return self.min_eigenvalue_of(self.matrix)

    def quadratic(self, velocity):
        """g_ij v^i v^j"""
        v = np.asarray(velocity, dtype=float)
        return float(v @ self.matrix @ v)
