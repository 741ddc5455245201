"""
Result records produced by the cycle computations
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

ETA_CONSISTENCY_ATOL = 1e-10


@dataclass(frozen=True)
class LineIntegral:
    value: float
    n_nodes: int
    residual: float
    theta: np.ndarray = field(default=None, repr=False)
    trace: np.ndarray = field(default=None, repr=False)


@dataclass(frozen=True)
class SurfaceIntegral:
    value: float
    error: float
    resolution: tuple


@dataclass(frozen=True)
class CycleResult:
    """Line and surface evaluations of the same cycle work"""

    w_line: float
    n_nodes: int
    residual: float
    w_surface: Optional[float] = None
    surface_error: Optional[float] = None
    field_mode: str = ""
    theta: np.ndarray = field(default=None, repr=False)
    trace: np.ndarray = field(default=None, repr=False)

    @property
    def stokes_gap(self):
        if self.w_surface is None:
            return None
        return abs(self.w_line - self.w_surface)

    def agrees(self, tolerance):
        gap = self.stokes_gap
        return gap is not None and gap < tolerance * max(1.0, abs(self.w_line))


@dataclass(frozen=True)
class EtaReport:
    w_coh: float
    w_pop: float
    eta: float
    local_eta: Optional[float] = None

    def __post_init__(self):
        if self.w_pop != 0 and abs(self.eta * self.w_pop - self.w_coh) > ETA_CONSISTENCY_ATOL * max(1.0, abs(self.w_coh)):
            raise ValueError("eta is inconsistent with W_coh / W_pop")


@dataclass(frozen=True)
class SignedFlux:
    positive: float
    negative: float

    @property
    def net(self):
        return self.positive + self.negative

    @property
    def cancellation(self):
        """Fraction of the gross flux removed by sign cancellation"""
        gross = self.positive - self.negative
        return 0.0 if gross == 0 else 1.0 - abs(self.net) / gross


@dataclass(frozen=True)
class FirstLawTrace:
    """Per-step dU = dW + dQ along a discretized protocol"""

    theta: np.ndarray
    d_u: np.ndarray
    d_w: np.ndarray
    d_q: np.ndarray

    @property
    def total_u(self):
        return float(np.sum(self.d_u))

    @property
    def total_w(self):
        return float(np.sum(self.d_w))

    @property
    def total_q(self):
        return float(np.sum(self.d_q))

    @property
    def max_step_residual(self):
        return float(np.max(np.abs(self.d_u - self.d_w - self.d_q))) if len(self.d_u) else 0.0


@dataclass(frozen=True)
class RadiusSweep:
    beta: float
    radii: np.ndarray
    work: np.ndarray
    w_inf: float

    @property
    def normalized(self):
        return self.work / self.w_inf

    def saturation_radius(self, level=0.9):
        """Smallest listed radius whose normalized work reaches level, or None"""
        hits = np.nonzero(self.normalized >= level)[0]
        return float(self.radii[hits[0]]) if len(hits) else None


@dataclass(frozen=True)
class PhaseSweep:
    """W(phi) with the least-squares fit W0 + A cos(phi + delta)"""

    phases: np.ndarray
    work: np.ndarray
    w0: float
    amplitude: float
    delta: float
    residual: float

    def fitted(self, phases=None):
        phases = self.phases if phases is None else np.asarray(phases, dtype=float)
        return self.w0 + self.amplitude * np.cos(phases + self.delta)


@dataclass(frozen=True)
class FiniteRateResult:
    period: float
    w_geometric: float
    w_excess: float
    metric_length: float

    @property
    def w_total(self):
        return self.w_geometric + self.w_excess

    @property
    def ratio(self):
        return float('nan') if self.metric_length == 0 else self.w_excess / self.metric_length
