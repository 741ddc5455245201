"""
Connections A_i(lambda) on a control plane, vectorized over batches of points.

A batch is an (n, m) array; every connection returns an (n, m) array of
components. Exact connections also expose their potential.
"""
import numpy as np

from app.physics.geometry import coherent_forces, free_energy, thermal_forces, work_one_form
from app.utils.errors import DimensionMismatch, InvalidParameter

GRADIENT_STEP = 1e-5


class Connection:
    """Base class: subclasses implement __call__ on a batch of points"""

    label = "connection"
    exact = False

    def __call__(self, lam):
        raise NotImplementedError

    def potential(self, lam):
        raise NotImplementedError(f"{self.label} connection has no potential")

    def components(self, lam):
        """A at a single point"""
        return self(np.atleast_2d(np.asarray(lam, dtype=float)))[0]

    def gradient(self, lam):
        """d_i A_j by central differences, shape (n, m, m) with index order [n, i, j]"""
        lam = np.atleast_2d(np.asarray(lam, dtype=float))
        n, m = lam.shape
        result = np.zeros((n, m, m))
        for i in range(m):
            h = GRADIENT_STEP * np.maximum(1.0, np.abs(lam[:, i]))
            shift = np.zeros_like(lam)
            shift[:, i] = h
            result[:, i, :] = (self(lam + shift) - self(lam - shift)) / (2.0 * h[:, None])
        return result

    def divergence(self, lam):
        grad = self.gradient(lam)
        return np.trace(grad, axis1=1, axis2=2)

    def max_norm(self, points):
        values = self(np.atleast_2d(points))
        return float(np.max(np.sqrt(np.sum(values ** 2, axis=1))))


class ConstantConnection(Connection):
    label = "constant"
    exact = True

    def __init__(self, vector):
        self.vector = np.asarray(vector, dtype=float).reshape(-1)

    def __call__(self, lam):
        lam = np.atleast_2d(lam)
        if lam.shape[1] != self.vector.shape[0]:
            raise DimensionMismatch(f"constant connection has {self.vector.shape[0]} components, points have {lam.shape[1]}")
        return np.broadcast_to(self.vector, lam.shape).copy()

    def gradient(self, lam):
        lam = np.atleast_2d(lam)
        return np.zeros((lam.shape[0], lam.shape[1], lam.shape[1]))

    def potential(self, lam):
        return np.atleast_2d(lam) @ self.vector


class ThermalConnection(Connection):
    """
    A = (<sigma_z>, <sigma_x>) / 2 of the Gibbs state at fixed beta; exact, A = dF.

    beta = 0 is the infinite-temperature limit: A vanishes and F is constant.
    """

    label = "thermal"
    exact = True

    def __init__(self, beta):
        if not beta >= 0:
            raise InvalidParameter(f"beta must be nonnegative, got {beta}")
        self.beta = float(beta)

    def __call__(self, lam):
        lam = np.atleast_2d(lam)
        z, x = thermal_forces(lam[:, 0], lam[:, 1], self.beta)
        return 0.5 * np.column_stack([z, x])

    def potential(self, lam):
        lam = np.atleast_2d(lam)
        if self.beta == 0.0:
            return np.zeros(lam.shape[0])
        return free_energy(lam[:, 0], lam[:, 1], self.beta)


class CoherentConnection(Connection):
    """A = (z*, x*) / 2 of the fixed-basis steady state"""

    label = "coherent"

    def __init__(self, gamma, p):
        self.gamma = float(gamma)
        self.p = float(p)

    def __call__(self, lam):
        lam = np.atleast_2d(lam)
        z, x = coherent_forces(lam[:, 0], lam[:, 1], self.gamma, self.p)
        return 0.5 * np.column_stack([z, x])


class ModelConnection(Connection):
    """A_i from the stationary state of an arbitrary ControlModel, point by point"""

    label = "model"

    def __init__(self, model):
        self.model = model

    def __call__(self, lam):
        lam = np.atleast_2d(lam)
        return np.array([work_one_form(self.model, point).components for point in lam])

    def contains(self, lam):
        return self.model.contains(lam)


class GaugeShiftedConnection(Connection):
    """A + d(phi); the potential shifts by phi"""

    label = "gauge-shifted"

    def __init__(self, base, phi, grad_phi=None):
        self.base = base
        self.phi = phi
        self.grad_phi = grad_phi
        self.exact = base.exact

    def _grad(self, lam):
        if self.grad_phi is not None:
            return np.asarray(self.grad_phi(lam), dtype=float)
        n, m = lam.shape
        result = np.zeros((n, m))
        for i in range(m):
            h = GRADIENT_STEP * np.maximum(1.0, np.abs(lam[:, i]))
            shift = np.zeros_like(lam)
            shift[:, i] = h
            result[:, i] = (self.phi(lam + shift) - self.phi(lam - shift)) / (2.0 * h)
        return result

    def __call__(self, lam):
        lam = np.atleast_2d(lam)
        return self.base(lam) + self._grad(lam)

    def potential(self, lam):
        return self.base.potential(lam) + self.phi(np.atleast_2d(lam))


def product_potential(lam):
    """phi = lambda1 lambda2"""
    lam = np.atleast_2d(lam)
    return lam[:, 0] * lam[:, 1]


def product_potential_gradient(lam):
    lam = np.atleast_2d(lam)
    return np.column_stack([lam[:, 1], lam[:, 0]])
