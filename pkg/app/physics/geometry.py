"""
Work one-form, curvature and dissipation metric on the control manifold.

Generic evaluations go through the stationary-state solver with central
differences. Qubit closed forms are vectorized over numpy arrays.
"""
import logging

import numpy as np

from app.models.fields import CurvatureField, DissipationMetric, WorkOneForm
from app.physics.quantum_core import analytic_ness_components, reduced_pseudoinverse_apply
from app.utils.errors import StepUnderflow

logger = logging.getLogger(__name__)

MIN_STEP = 1e-9
RICHARDSON_TOLERANCE = 1e-6
ASYMMETRY_REPORT = 1e-8


def work_one_form(model, lam):
    """A_i = Tr[rho*(lambda) dH/dlambda^i]; zero for coordinates outside the work mask"""
    lam = model.point(lam)
    rho = model.stationary_state(lam)
    components = [rho.expectation(generator) for generator in model.generators(lam)]
    return WorkOneForm(point=lam, components=components, coordinates=model.coordinates)


def _partial(model, lam, along, component, h):
    shift = np.zeros(model.ndim)
    shift[along] = h
    upper = work_one_form(model, lam + shift)[component]
    lower = work_one_form(model, lam - shift)[component]
    return (upper - lower) / (2.0 * h)


def _curl(model, lam, i, j, h_i, h_j):
    return _partial(model, lam, i, j, h_i) - _partial(model, lam, j, i, h_j)


def curvature_fd(model, lam, i=0, j=1, h=None, richardson=False, tolerance=None):
    """
    Central-difference dA_j/dlambda^i - dA_i/dlambda^j.

    Parameters:
    - h: step, default 1e-4 max(1, |lambda^k|) per coordinate
    - richardson: combine steps h and h/2 to cancel the O(h^2) term;
      switched on automatically when tolerance < 1e-6
    """
    lam = model.point(lam)
    if i == j:
        return 0.0
    h_i = float(h) if h is not None else model.fd_step(lam, i)
    h_j = float(h) if h is not None else model.fd_step(lam, j)
    if min(h_i, h_j) < MIN_STEP:
        raise StepUnderflow(f"finite-difference step {min(h_i, h_j):.3e} below {MIN_STEP}")

    coarse = _curl(model, lam, i, j, h_i, h_j)
    if not (richardson or (tolerance is not None and tolerance < RICHARDSON_TOLERANCE)):
        return float(coarse)
    fine = _curl(model, lam, i, j, 0.5 * h_i, 0.5 * h_j)
    return float((4.0 * fine - coarse) / 3.0)


def coherent_curvature_density(omega, g, gamma, p):
    """Omega_coh = p g (g^2 + gamma^2) / (2 omega^2 + g^2 + gamma^2 / 2)^2"""
    gamma = np.asarray(gamma, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(gamma <= 0):
        raise ValueError("gamma must be positive")
    if np.any(np.abs(p) > 1.0):
        raise ValueError("bias p must lie in [-1, 1]")
    omega = np.asarray(omega, dtype=float)
    g = np.asarray(g, dtype=float)
    denom = 2.0 * omega ** 2 + g ** 2 + 0.5 * gamma ** 2
    return p * g * (g ** 2 + gamma ** 2) / denom ** 2


def sech_squared(x):
    """sech^2 without overflow for large |x|"""
    decay = np.exp(-np.abs(np.asarray(x, dtype=float)))
    return (2.0 * decay / (1.0 + decay ** 2)) ** 2


def thermal_baseline_density(omega, g, beta):
    """Population baseline (beta / 4) sech^2(beta epsilon / 2); isotropic in (omega, g)"""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    eps = np.hypot(omega, g)
    return 0.25 * beta * sech_squared(0.5 * beta * eps)


def dissipation_metric(model, lam):
    """
    g_ij = -Re Tr[(d_i rho*) L_perp^-1 (d_j rho*)], symmetrized.

    With this sign the metric is positive semidefinite for the generators used
    here, whose reduced inverse has spectrum in the left half-plane.
    """
    lam = model.point(lam)
    liouvillian = model.liouvillian(lam)
    rho = model.stationary_state(lam)
    dim = rho.dim

    derivatives = []
    for d in model.state_derivatives(lam):
        d = 0.5 * (d + d.conj().T)
        derivatives.append(d - np.trace(d) * np.eye(dim) / dim)

    responses = [reduced_pseudoinverse_apply(liouvillian, rho, d).entries for d in derivatives]
    n = model.ndim
    raw = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            raw[i, j] = -np.real(np.trace(derivatives[i] @ responses[j]))

    asymmetry = float(np.max(np.abs(raw - raw.T))) if n else 0.0
    if asymmetry > ASYMMETRY_REPORT * max(1.0, float(np.max(np.abs(raw)))):
        logger.info(f"Metric asymmetry {asymmetry:.3e} at {lam.tolist()} removed by symmetrization")
    return DissipationMetric(matrix=raw, asymmetry=asymmetry, point=lam)


def free_energy(omega, g, beta):
    """F = -(1/beta) ln(2 cosh(beta epsilon / 2)), evaluated as -eps/2 - log1p(e^(-beta eps))/beta"""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    eps = np.hypot(omega, g)
    return -0.5 * eps - np.log1p(np.exp(-beta * eps)) / beta


def thermal_bias_p(beta, eps):
    """p = tanh(beta epsilon / 2); beta = inf gives 1 for epsilon > 0"""
    eps = np.asarray(eps, dtype=float)
    with np.errstate(invalid='ignore'):
        p = np.where(eps == 0.0, 0.0, np.tanh(0.5 * beta * eps))
    return float(p) if p.ndim == 0 else p


def rate_pair_from_p(gamma, p):
    """(gamma_down, gamma_up) with total gamma and bias p"""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if abs(p) > 1.0:
        raise ValueError(f"bias p must lie in [-1, 1], got {p}")
    return 0.5 * gamma * (1.0 + p), 0.5 * gamma * (1.0 - p)


def bias_from_rates(gamma_down, gamma_up):
    total = gamma_down + gamma_up
    if total <= 0:
        raise ValueError("gamma_down + gamma_up must be positive")
    return total, (gamma_down - gamma_up) / total


def thermal_forces(omega, g, beta):
    """(<sigma_z>, <sigma_x>) of the Gibbs state, zero at epsilon = 0 by continuity"""
    omega = np.asarray(omega, dtype=float)
    g = np.asarray(g, dtype=float)
    eps = np.hypot(omega, g)
    safe = np.where(eps == 0.0, 1.0, eps)
    scale = np.where(eps == 0.0, 0.0, np.tanh(0.5 * beta * eps) / safe)
    return -omega * scale, -g * scale


def coherent_forces(omega, g, gamma, p):
    """(z*, x*) of the fixed-basis steady state"""
    x, _, z = analytic_ness_components(omega, g, gamma, p)
    return z, x


def coherent_field(gamma, p=None, beta=None):
    """
    Closed-form coherent curvature field.

    Fixed-bias mode uses the given p; with beta the bias is tanh(beta eps / 2)
    at each point (detailed balance).
    """
    if (p is None) == (beta is None):
        raise ValueError("give exactly one of p or beta")
    if beta is not None:
        def density(x, y):
            return coherent_curvature_density(x, y, gamma, thermal_bias_p(beta, np.hypot(x, y)))
        parameters = {"gamma": gamma, "beta": beta}
    else:
        def density(x, y):
            return coherent_curvature_density(x, y, gamma, p)
        parameters = {"gamma": gamma, "p": p}
    return CurvatureField(density=density, mode=CurvatureField.MODE_COHERENT, parameters=parameters)


def baseline_field(beta):
    return CurvatureField(
        density=lambda x, y: thermal_baseline_density(x, y, beta),
        mode=CurvatureField.MODE_BASELINE,
        parameters={"beta": beta},
    )


def fd_field(model, base=None, plane=(0, 1), h=None):
    """Curvature of an arbitrary model on a coordinate plane, other coordinates held at base"""
    base = np.zeros(model.ndim) if base is None else np.asarray(base, dtype=float)
    i, j = plane

    def evaluate(x, y):
        lam = base.copy()
        lam[i], lam[j] = x, y
        return curvature_fd(model, lam, i, j, h=h)

    vectorized = np.vectorize(evaluate, otypes=[float])
    return CurvatureField(
        density=lambda x, y: vectorized(x, y),
        mode=CurvatureField.MODE_FD,
        plane=plane,
        parameters={"model": model.label},
    )
