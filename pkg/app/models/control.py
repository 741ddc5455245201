"""
ControlModel: the chart lambda -> (H(lambda), dissipators(lambda)) plus the
choice of how the stationary state is obtained.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, ClassVar, Optional

import numpy as np

from app.models.operators import HermitianOperator, as_matrix
from app.utils.errors import DimensionMismatch, DomainExit, InvalidOperator

logger = logging.getLogger(__name__)

FD_RELATIVE_STEP = 1e-4
MASK_ATOL = 1e-10


@dataclass(frozen=True)
class ControlModel:
    """
    Parameterized open system on a control manifold

    Parameters:
    - coordinates: names of lambda^1..lambda^n
    - hamiltonian: lambda -> HermitianOperator
    - dissipators: lambda -> list of LindbladTerm
    - work_mask: which coordinates enter H (work-conjugate)
    - mode: how rho*(lambda) is obtained (generic, thermal, analytic)
    - beta: lambda -> inverse temperature, required in thermal mode
    - bloch: lambda -> BlochVector, required in analytic mode
    - hamiltonian_gradient: optional lambda -> list of dH/dlambda^i
    - domain: optional lambda -> bool, False outside the valid chart
    """

    MODE_GENERIC: ClassVar[str] = "generic"
    MODE_THERMAL: ClassVar[str] = "thermal"
    MODE_ANALYTIC: ClassVar[str] = "analytic"
    MODES: ClassVar[tuple] = ("generic", "thermal", "analytic")

    coordinates: tuple
    hamiltonian: Callable
    dissipators: Callable
    work_mask: tuple
    mode: str = "generic"
    beta: Optional[Callable] = None
    bloch: Optional[Callable] = None
    hamiltonian_gradient: Optional[Callable] = None
    domain: Optional[Callable] = None
    label: str = ""
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'coordinates', tuple(self.coordinates))
        object.__setattr__(self, 'work_mask', tuple(bool(m) for m in self.work_mask))
        if len(self.work_mask) != len(self.coordinates):
            raise DimensionMismatch("work mask length must match the number of coordinates")
        if self.mode not in self.MODES:
            raise ValueError(f"unknown stationary-state mode {self.mode!r}")
        if self.mode == self.MODE_THERMAL and self.beta is None:
            raise ValueError("thermal mode needs a beta map")
        if self.mode == self.MODE_ANALYTIC and self.bloch is None:
            raise ValueError("analytic mode needs a closed-form Bloch map")

    @property
    def ndim(self):
        return len(self.coordinates)

    @property
    def work_indices(self):
        return [i for i, masked in enumerate(self.work_mask) if masked]

    def point(self, lam):
        lam = np.asarray(lam, dtype=float).reshape(-1)
        if lam.shape[0] != self.ndim:
            raise DimensionMismatch(f"expected {self.ndim} coordinates {self.coordinates}, got {lam.shape[0]}")
        if self.domain is not None and not self.domain(lam):
            raise DomainExit(f"point {lam.tolist()} outside the model domain")
        return lam

    def contains(self, lam):
        return self.domain is None or bool(self.domain(np.asarray(lam, dtype=float)))

    def fd_step(self, lam, index):
        return FD_RELATIVE_STEP * max(1.0, abs(float(lam[index])))

    def hamiltonian_at(self, lam):
        return self.hamiltonian(self.point(lam))

    def liouvillian(self, lam):
        from app.physics.quantum_core import build_liouvillian

        lam = self.point(lam)
        return build_liouvillian(self.hamiltonian(lam), self.dissipators(lam))

    def stationary_state(self, lam):
        from app.physics import quantum_core

        lam = self.point(lam)
        if self.mode == self.MODE_THERMAL:
            return quantum_core.gibbs_state(self.hamiltonian(lam), self.beta(lam))
        if self.mode == self.MODE_ANALYTIC:
            return quantum_core.density_from_bloch(self.bloch(lam))
        return quantum_core.stationary_state(self.liouvillian(lam))

    def generators(self, lam):
        """dH/dlambda^i for every coordinate; zero for coordinates outside the work mask"""
        lam = self.point(lam)
        dim = as_matrix(self.hamiltonian(lam)).shape[0]
        if self.hamiltonian_gradient is not None:
            gradient = [as_matrix(op) for op in self.hamiltonian_gradient(lam)]
        else:
            gradient = [self._fd_hamiltonian(lam, i) for i in range(self.ndim)]
        return [
            HermitianOperator(op if masked else np.zeros((dim, dim)))
            for op, masked in zip(gradient, self.work_mask)
        ]

    def _fd_hamiltonian(self, lam, index):
        h = self.fd_step(lam, index)
        shift = np.zeros(self.ndim)
        shift[index] = h
        upper = as_matrix(self.hamiltonian(lam + shift))
        lower = as_matrix(self.hamiltonian(lam - shift))
        return (upper - lower) / (2.0 * h)

    def state_derivatives(self, lam, step=None):
        """Central differences d rho*/d lambda^i, one matrix per coordinate"""
        lam = self.point(lam)
        derivatives = []
        for i in range(self.ndim):
            h = step if step is not None else self.fd_step(lam, i)
            shift = np.zeros(self.ndim)
            shift[i] = h
            upper = self.stationary_state(lam + shift).entries
            lower = self.stationary_state(lam - shift).entries
            derivatives.append((upper - lower) / (2.0 * h))
        return derivatives

    def check_work_mask(self, lam):
        """Raise when a coordinate outside the mask changes H"""
        lam = self.point(lam)
        for i, masked in enumerate(self.work_mask):
            if masked:
                continue
            derivative = self._fd_hamiltonian(lam, i)
            if np.max(np.abs(derivative)) > MASK_ATOL:
                raise InvalidOperator(
                    f"coordinate {self.coordinates[i]!r} changes H but is excluded from the work mask"
                )
        return True


def _qubit_gradient(ndim):
    from app.physics.quantum_core import SIGMA_X, SIGMA_Z

    def gradient(lam):
        ops = [0.5 * SIGMA_Z, 0.5 * SIGMA_X]
        return ops + [np.zeros((2, 2), dtype=complex)] * (ndim - 2)

    return gradient


def qubit_thermal_model(beta=None, gamma=1.0):
    """
    Thermal qubit in Gibbs mode.

    With a fixed beta the chart is (omega, g). Without one the chart is
    (omega, g, T) and T enters only through the state.
    """
    from app.physics.quantum_core import build_hamiltonian, eigenbasis_thermal_terms

    if beta is not None:
        beta = float(beta)
        if beta < 0 or not np.isfinite(beta):
            raise ValueError(f"beta must be finite and nonnegative, got {beta}")

        def hamiltonian(lam):
            return build_hamiltonian(lam[0], lam[1])

        return ControlModel(
            coordinates=("omega", "g"),
            hamiltonian=hamiltonian,
            dissipators=lambda lam: eigenbasis_thermal_terms(hamiltonian(lam), beta, gamma),
            work_mask=(True, True),
            mode=ControlModel.MODE_THERMAL,
            beta=lambda lam: beta,
            hamiltonian_gradient=_qubit_gradient(2),
            label="thermal",
            parameters={"beta": beta, "gamma": gamma},
        )

    def hamiltonian(lam):
        return build_hamiltonian(lam[0], lam[1])

    return ControlModel(
        coordinates=("omega", "g", "T"),
        hamiltonian=hamiltonian,
        dissipators=lambda lam: eigenbasis_thermal_terms(hamiltonian(lam), 1.0 / lam[2], gamma),
        work_mask=(True, True, False),
        mode=ControlModel.MODE_THERMAL,
        beta=lambda lam: 1.0 / lam[2],
        hamiltonian_gradient=_qubit_gradient(3),
        domain=lambda lam: lam[2] > 0,
        label="thermal",
        parameters={"gamma": gamma},
    )


def qubit_coherent_model(gamma_down=1.0, gamma_up=0.0, analytic=False, beta=None, gamma=None):
    """
    Qubit with dissipation fixed in the laboratory sigma_z basis.

    Rates are either the fixed pair (gamma_down, gamma_up) or, when beta is
    given, the detailed-balance pair for total rate gamma with
    p = tanh(beta epsilon / 2) evaluated pointwise.
    """
    from app.physics import quantum_core
    from app.physics.geometry import rate_pair_from_p, thermal_bias_p

    if beta is not None:
        total = float(gamma if gamma is not None else gamma_down + gamma_up)

        def rates(lam):
            p = thermal_bias_p(beta, float(np.hypot(lam[0], lam[1])))
            return rate_pair_from_p(total, p)
    else:
        if gamma_down < 0 or gamma_up < 0:
            raise ValueError("rates must be nonnegative")

        def rates(lam):
            return gamma_down, gamma_up

    def hamiltonian(lam):
        return quantum_core.build_hamiltonian(lam[0], lam[1])

    def dissipators(lam):
        return quantum_core.fixed_basis_terms(*rates(lam))

    def bloch(lam):
        return quantum_core.analytic_ness_bloch(lam[0], lam[1], *rates(lam))

    return ControlModel(
        coordinates=("omega", "g"),
        hamiltonian=hamiltonian,
        dissipators=dissipators,
        work_mask=(True, True),
        mode=ControlModel.MODE_ANALYTIC if analytic else ControlModel.MODE_GENERIC,
        bloch=bloch,
        hamiltonian_gradient=_qubit_gradient(2),
        label="coherent",
        parameters={"gamma_down": gamma_down, "gamma_up": gamma_up, "beta": beta, "gamma": gamma},
    )
