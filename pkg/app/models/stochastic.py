"""
Records for fluctuating geometric work: the control-space SDE, sampled
trajectories and ensembles, and grid densities from the PDE solvers.
"""
from dataclasses import dataclass, field
from typing import Callable, ClassVar, Optional

import numpy as np
from scipy import stats

from app.utils.errors import DimensionMismatch


def _zero_drift(lam, t):
    return np.zeros_like(lam)


@dataclass(frozen=True)
class ControlSDE:
    """
    d lambda^i = v^i(lambda, t) dt + sigma^ij(lambda) dW_j

    drift takes a batch (n, m) of points and a time; noise returns either a
    constant (m, k) matrix or a batch (n, m, k). An isotropic SDE has
    D^ij = sigma sigma^T = 2 D delta^ij with constant D.
    """

    REFLECT: ClassVar[str] = "reflect"
    REJECT: ClassVar[str] = "reject"

    start: np.ndarray
    drift: Callable = _zero_drift
    noise: Optional[Callable] = None
    diffusion: Optional[float] = None
    bounds: Optional[tuple] = None
    boundary: str = "reflect"
    terminal: Optional[np.ndarray] = None
    label: str = ""
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        start = np.asarray(self.start, dtype=float).reshape(-1)
        object.__setattr__(self, 'start', start)
        if self.boundary not in (self.REFLECT, self.REJECT):
            raise ValueError(f"boundary must be 'reflect' or 'reject', got {self.boundary!r}")
        if self.diffusion is not None and self.diffusion < 0:
            raise ValueError("diffusion constant must be nonnegative")
        if self.noise is None and self.diffusion is None:
            raise ValueError("give a noise matrix or an isotropic diffusion constant")
        if self.terminal is not None:
            terminal = np.asarray(self.terminal, dtype=float).reshape(-1)
            if terminal.shape != start.shape:
                raise DimensionMismatch("terminal point must match the start dimension")
            object.__setattr__(self, 'terminal', terminal)
        if self.bounds is not None:
            lower, upper = (np.asarray(b, dtype=float).reshape(-1) for b in self.bounds)
            if lower.shape != start.shape or upper.shape != start.shape or np.any(lower >= upper):
                raise ValueError("bounds must be (lower, upper) arrays with lower < upper")
            if np.any(start < lower) or np.any(start > upper):
                raise ValueError("start point lies outside the bounds")
            object.__setattr__(self, 'bounds', (lower, upper))

    @classmethod
    def isotropic(cls, diffusion, start, drift=None, bounds=None, boundary="reflect"):
        return cls(
            start=start,
            drift=drift if drift is not None else _zero_drift,
            diffusion=float(diffusion),
            bounds=bounds,
            boundary=boundary,
            label="isotropic",
        )

    @classmethod
    def bridge(cls, diffusion, start, end, t_final, bounds=None):
        """Brownian bridge pinned to end at t_final: drift (end - lambda) / (t_final - t)"""
        end = np.asarray(end, dtype=float).reshape(-1)
        t_final = float(t_final)

        def drift(lam, t):
            return (end - lam) / max(t_final - t, 1e-300)

        return cls(
            start=start,
            drift=drift,
            diffusion=float(diffusion),
            bounds=bounds,
            terminal=end,
            label="bridge",
            parameters={"t_final": t_final},
        )

    @property
    def ndim(self):
        return self.start.shape[0]

    @property
    def is_isotropic(self):
        return self.noise is None

    def noise_matrix(self, lam):
        """sigma at a batch of points, shape (n, m, k)"""
        lam = np.atleast_2d(lam)
        if self.noise is None:
            sigma = np.sqrt(2.0 * self.diffusion) * np.eye(self.ndim)
        else:
            sigma = np.asarray(self.noise(lam), dtype=float)
        if sigma.ndim == 2:
            sigma = np.broadcast_to(sigma, (lam.shape[0],) + sigma.shape)
        return sigma

    def diffusion_tensor(self, lam):
        """D^ij = sigma^ik sigma^jk, shape (n, m, m)"""
        sigma = self.noise_matrix(lam)
        return np.einsum('nik,njk->nij', sigma, sigma)

    @property
    def noise_dim(self):
        return self.noise_matrix(self.start).shape[2]


@dataclass(frozen=True)
class WorkTrajectory:
    times: np.ndarray
    path: np.ndarray
    work: np.ndarray
    seed: int

    @property
    def final_work(self):
        return float(self.work[-1])

    @property
    def end(self):
        return self.path[-1]


@dataclass(frozen=True)
class WorkEnsemble:
    """Final work of N trajectories with their seeds and endpoints"""

    work: np.ndarray
    seeds: np.ndarray
    base_seed: int
    dt: float
    t_final: float
    starts: np.ndarray
    ends: np.ndarray
    rejected: int = 0

    def __len__(self):
        return len(self.work)

    @property
    def mean(self):
        return float(np.mean(self.work))

    @property
    def variance(self):
        return float(np.var(self.work, ddof=1)) if len(self.work) > 1 else 0.0

    @property
    def skewness(self):
        if len(self.work) < 3 or self.variance == 0.0:
            return 0.0
        return float(stats.skew(self.work, bias=False))

    @property
    def mean_error(self):
        return float(np.sqrt(self.variance / len(self.work))) if len(self.work) > 1 else 0.0

    @property
    def variance_error(self):
        """Standard error of the sample variance from the fourth central moment"""
        n = len(self.work)
        if n < 4:
            return 0.0
        centered = self.work - np.mean(self.work)
        m4 = float(np.mean(centered ** 4))
        m2 = float(np.mean(centered ** 2))
        return float(np.sqrt(max(m4 - (n - 3.0) / (n - 1.0) * m2 ** 2, 0.0) / n))

    def histogram(self, bins=60):
        """(bin centers, probability density)"""
        density, edges = np.histogram(self.work, bins=bins, density=True)
        return 0.5 * (edges[:-1] + edges[1:]), density


@dataclass(frozen=True)
class JointDensity:
    """
    P(lambda1, lambda2, W) on a cell-centered grid plus its moment trace.

    mass[k] + leaked[k] stays 1 up to round-off; artificial_diffusion is the extra
    W diffusion coefficient left by interpolating the mixed stencils between W cells.
    """

    lam1: np.ndarray
    lam2: np.ndarray
    w: np.ndarray
    density: np.ndarray
    times: np.ndarray
    mass: np.ndarray
    leaked: np.ndarray
    mean_w: np.ndarray
    var_w: np.ndarray
    mean_drift_w: np.ndarray
    artificial_diffusion: float = 0.0
    dt: float = 0.0

    @property
    def cell_volume(self):
        return (self.lam1[1] - self.lam1[0]) * (self.lam2[1] - self.lam2[0]) * (self.w[1] - self.w[0])

    @property
    def leakage(self):
        return float(self.leaked[-1])

    def w_marginal(self):
        """Density of W alone on the W grid"""
        dl = (self.lam1[1] - self.lam1[0]) * (self.lam2[1] - self.lam2[0])
        return self.density.sum(axis=(0, 1)) * dl

    def lambda_marginal(self):
        return self.density.sum(axis=2) * (self.w[1] - self.w[0])


@dataclass(frozen=True)
class TiltedField:
    lam1: np.ndarray
    lam2: np.ndarray
    chi: float
    values: np.ndarray
    times: np.ndarray
    integral: np.ndarray
    dt: float = 0.0

    @property
    def final_integral(self):
        return float(self.integral[-1])


@dataclass(frozen=True)
class JarzynskiReport:
    """standard_error is statistical only; bias is the time-step part, reported beside it"""

    estimate: float
    target: float
    standard_error: float
    z_score: float
    samples: int
    beta: float
    allowance: float = 0.0
    bias: float = 0.0
    half_step_bias: float = float('nan')
    conditioned: bool = False

    def passes(self, limit=3.0):
        return abs(self.z_score) < limit


@dataclass(frozen=True)
class GaugeReport:
    """Work shifts produced by adding d(phi) to the connection"""

    closed_max_shift: float
    open_mean_shift: float
    open_expected_shift: float
    open_max_deviation: float
    dt: float
