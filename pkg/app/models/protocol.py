"""
Protocols lambda(theta) on the control manifold and the planar regions they bound.
"""
from dataclasses import dataclass, field, replace
from typing import ClassVar, Optional

import numpy as np

from app.utils.errors import DimensionMismatch

TWO_PI = 2.0 * np.pi
CLOSURE_ATOL = 1e-12


@dataclass(frozen=True)
class Disk:
    center: tuple
    radius: float
    orientation: int = 1

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"disk radius must be positive, got {self.radius}")

    @property
    def area(self):
        return np.pi * self.radius ** 2


@dataclass(frozen=True)
class Ellipse:
    center: tuple
    a: float
    b: float
    orientation: int = 1

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"ellipse semi-axes must be positive, got {self.a}, {self.b}")

    @property
    def area(self):
        return np.pi * self.a * self.b


@dataclass(frozen=True)
class Polygon:
    """Simple polygon; the vertex order carries the orientation"""

    vertices: np.ndarray

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2 or vertices.shape[0] < 3:
            raise ValueError("polygon needs at least three planar vertices")
        if np.allclose(vertices[0], vertices[-1]):
            vertices = vertices[:-1]
        object.__setattr__(self, 'vertices', vertices)

    @property
    def signed_area(self):
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @property
    def area(self):
        return abs(self.signed_area)

    @property
    def orientation(self):
        return 1 if self.signed_area >= 0 else -1


@dataclass(frozen=True)
class Protocol:
    """
    Parameterized path lambda(theta), theta in [0, 2 pi].

    Smooth families carry analytic velocities. Coordinates listed in `tail`
    are appended as constants, so a planar loop can live on a larger chart.
    """

    CIRCLE: ClassVar[str] = "circle"
    ELLIPSE: ClassVar[str] = "offset-ellipse"
    TEMPERATURE: ClassVar[str] = "temperature-modulated"
    POLYLINE: ClassVar[str] = "piecewise-linear"
    FAMILIES: ClassVar[tuple] = ("circle", "offset-ellipse", "temperature-modulated", "piecewise-linear")

    family: str
    closed: bool = True
    center: tuple = (0.0, 0.0)
    a: float = 1.0
    b: float = 1.0
    T0: Optional[float] = None
    delta_T: float = 0.0
    phase: float = 0.0
    vertices: Optional[np.ndarray] = None
    tail: tuple = ()
    reverse: bool = False
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in self.FAMILIES:
            raise ValueError(f"unknown protocol family {self.family!r}")
        object.__setattr__(self, 'center', tuple(float(c) for c in self.center))
        object.__setattr__(self, 'tail', tuple(float(c) for c in self.tail))

        if self.family == self.POLYLINE:
            vertices = np.asarray(self.vertices, dtype=float)
            if vertices.ndim != 2 or vertices.shape[0] < 2:
                raise ValueError("piecewise-linear protocol needs at least two vertices")
            if self.closed and not np.allclose(vertices[0], vertices[-1], atol=CLOSURE_ATOL):
                vertices = np.vstack([vertices, vertices[:1]])
            vertices.setflags(write=False)
            object.__setattr__(self, 'vertices', vertices)
        else:
            if not self.closed:
                raise ValueError(f"{self.family} protocols are closed loops")
            if not (self.a > 0 and self.b > 0):
                raise ValueError("loop radii must be positive")

        if self.family == self.TEMPERATURE:
            if self.T0 is None or not self.T0 > self.delta_T >= 0:
                raise ValueError(f"temperature trace needs T0 > delta_T >= 0, got T0={self.T0}, delta_T={self.delta_T}")

    @staticmethod
    def circle(center, radius, tail=()):
        return Protocol(family=Protocol.CIRCLE, center=center, a=radius, b=radius, tail=tail)

    @staticmethod
    def ellipse(center, a, b, tail=()):
        return Protocol(family=Protocol.ELLIPSE, center=center, a=a, b=b, tail=tail)

    @staticmethod
    def temperature_modulated(center, a, b, T0, delta_T, phase):
        return Protocol(
            family=Protocol.TEMPERATURE, center=center, a=a, b=b,
            T0=T0, delta_T=delta_T, phase=phase,
        )

    @staticmethod
    def polyline(vertices, closed=False, tail=()):
        return Protocol(family=Protocol.POLYLINE, vertices=np.asarray(vertices, dtype=float), closed=closed, tail=tail)

    @property
    def ndim(self):
        if self.family == self.POLYLINE:
            base = self.vertices.shape[1]
        elif self.family == self.TEMPERATURE:
            base = 3
        else:
            base = 2
        return base + len(self.tail)

    @property
    def is_planar(self):
        """True when the loop stays in the (0, 1) coordinate plane with every other coordinate fixed"""
        if self.family == self.TEMPERATURE:
            return self.delta_T == 0.0
        if self.family == self.POLYLINE:
            return self.vertices.shape[1] == 2 or np.allclose(self.vertices[:, 2:], self.vertices[0, 2:])
        return True

    def reversed(self):
        return replace(self, reverse=not self.reverse)

    def _smooth(self, theta):
        cos, sin = np.cos(theta), np.sin(theta)
        columns = [self.center[0] + self.a * cos, self.center[1] + self.b * sin]
        if self.family == self.TEMPERATURE:
            columns.append(self.T0 + self.delta_T * np.cos(theta + self.phase))
        return np.column_stack(columns)

    def _smooth_velocity(self, theta):
        columns = [-self.a * np.sin(theta), self.b * np.cos(theta)]
        if self.family == self.TEMPERATURE:
            columns.append(-self.delta_T * np.sin(theta + self.phase))
        return np.column_stack(columns)

    @property
    def segment_count(self):
        return self.vertices.shape[0] - 1 if self.family == self.POLYLINE else 0

    def _polyline(self, theta, velocity=False):
        segments = self.segment_count
        u = np.clip(theta / TWO_PI * segments, 0.0, segments)
        index = np.minimum(np.floor(u).astype(int), segments - 1)
        frac = (u - index)[:, None]
        start = self.vertices[index]
        delta = self.vertices[index + 1] - start
        if velocity:
            return delta * (segments / TWO_PI)
        return start + frac * delta

    def _append_tail(self, points, zeros=False):
        if not self.tail:
            return points
        tail = np.zeros(len(self.tail)) if zeros else np.asarray(self.tail)
        return np.hstack([points, np.tile(tail, (points.shape[0], 1))])

    def path(self, theta):
        """lambda(theta) as an (n, ndim) array"""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if self.reverse:
            theta = TWO_PI - theta
        if self.family == self.POLYLINE:
            points = self._polyline(theta)
        else:
            points = self._smooth(theta)
        return self._append_tail(points)

    def velocity(self, theta):
        """d lambda / d theta as an (n, ndim) array"""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        sign = 1.0
        if self.reverse:
            theta = TWO_PI - theta
            sign = -1.0
        if self.family == self.POLYLINE:
            velocity = self._polyline(theta, velocity=True)
        else:
            velocity = self._smooth_velocity(theta)
        return sign * self._append_tail(velocity, zeros=True)

    def segments(self):
        """(start, end) vertex pairs in traversal order, tails appended"""
        if self.family != self.POLYLINE:
            raise ValueError("only piecewise-linear protocols have segments")
        vertices = self.vertices[::-1] if self.reverse else self.vertices
        vertices = self._append_tail(np.asarray(vertices))
        return [(vertices[k], vertices[k + 1]) for k in range(vertices.shape[0] - 1)]

    @property
    def start(self):
        return self.path(0.0)[0]

    @property
    def end(self):
        return self.path(TWO_PI)[0]

    def region(self):
        """Planar region bounded by a closed loop in the (0, 1) plane"""
        if not self.closed:
            raise ValueError("open protocols do not bound a region")
        orientation = -1 if self.reverse else 1
        if self.family == self.POLYLINE:
            vertices = self.vertices[:, :2]
            return Polygon(vertices[::-1] if self.reverse else vertices)
        if self.family == self.CIRCLE:
            return Disk(self.center, self.a, orientation)
        return Ellipse(self.center, self.a, self.b, orientation)

    def check_closure(self):
        if not self.closed:
            return True
        gap = np.max(np.abs(self.path(0.0) - self.path(TWO_PI)))
        if gap > CLOSURE_ATOL * max(1.0, float(np.max(np.abs(self.path(0.0))))):
            raise DimensionMismatch(f"closed protocol does not close, gap {gap:.3e}")
        return True
