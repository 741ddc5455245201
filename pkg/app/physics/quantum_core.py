"""
Liouvillian assembly and stationary / spectral solves for small open systems.

Basis convention: sigma_z = diag(1, -1), so |0> is the z = +1 state. The
fixed-basis jump for gamma_down is |0><1| and drives the Bloch vector toward
z = +1, which is the sign the closed-form steady state carries.
"""
import logging

import numpy as np
from scipy import linalg

from app.models.operators import (
    BlochVector,
    DensityMatrix,
    HermitianOperator,
    LindbladTerm,
    Superoperator,
    as_matrix,
    unvec,
    vec,
)
from app.utils.errors import (
    DegenerateSteadyState,
    DimensionMismatch,
    NonPositiveState,
    SingularSolve,
)

logger = logging.getLogger(__name__)

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
JUMP_DOWN = np.array([[0, 1], [0, 0]], dtype=complex)
JUMP_UP = np.array([[0, 0], [1, 0]], dtype=complex)

DEGENERACY_GAP = 1e-8
NEGATIVITY_LIMIT = 1e-8
RESIDUAL_TARGET = 1e-10
SINGULAR_GAP = 1e-10
BACKSUBSTITUTION_LIMIT = 1e-9
TRACELESS_ATOL = 1e-10


def build_hamiltonian(omega, g):
    """H(omega, g) = (omega sigma_z + g sigma_x) / 2"""
    return HermitianOperator(0.5 * (float(omega) * SIGMA_Z + float(g) * SIGMA_X))


def gibbs_state(hamiltonian, beta):
    """
    Thermal state exp(-beta H) / Z

    Parameters:
    - hamiltonian: HermitianOperator or Hermitian array
    - beta: inverse temperature, finite and nonnegative
    """
    beta = float(beta)
    if not np.isfinite(beta) or beta < 0:
        raise ValueError(f"beta must be finite and nonnegative, got {beta}")

    matrix = as_matrix(hamiltonian)
    if beta == 0.0:
        return DensityMatrix.maximally_mixed(matrix.shape[0])
    energies, vectors = np.linalg.eigh(matrix)
    weights = np.exp(-beta * (energies - energies.min()))
    weights /= weights.sum()
    rho = (vectors * weights) @ vectors.conj().T
    return DensityMatrix(0.5 * (rho + rho.conj().T))


def _dissipator(jump):
    dim = jump.shape[0]
    eye = np.eye(dim, dtype=complex)
    jdj = jump.conj().T @ jump
    return np.kron(jump.conj(), jump) - 0.5 * np.kron(eye, jdj) - 0.5 * np.kron(jdj.T, eye)


def build_liouvillian(hamiltonian, terms=()):
    """Column-stacked matrix of rho -> -i[H, rho] + sum_k rate_k D[L_k](rho)"""
    h = as_matrix(hamiltonian)
    dim = h.shape[0]
    eye = np.eye(dim, dtype=complex)
    matrix = -1j * (np.kron(eye, h) - np.kron(h.T, eye))

    for term in terms:
        if not isinstance(term, LindbladTerm):
            term = LindbladTerm(*term)
        if term.dim != dim:
            raise DimensionMismatch(f"jump operator dim {term.dim} does not match Hamiltonian dim {dim}")
        if term.rate == 0.0:
            continue
        matrix = matrix + term.rate * _dissipator(term.jump)

    return Superoperator(matrix)


def fixed_basis_terms(gamma_down, gamma_up):
    """Dissipators acting in the laboratory sigma_z basis"""
    return [LindbladTerm(JUMP_DOWN, gamma_down), LindbladTerm(JUMP_UP, gamma_up)]


def eigenbasis_thermal_terms(hamiltonian, beta, gamma):
    """
    Jumps between eigenstates of H with detailed-balance rates.

    For every pair of levels with splitting delta the downward jump carries
    gamma (1 + tanh(beta delta / 2)) / 2 and the upward one gamma (1 - tanh) / 2,
    so the unique stationary state is the Gibbs state at beta.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if beta < 0 or not np.isfinite(beta):
        raise ValueError(f"beta must be finite and nonnegative, got {beta}")

    energies, vectors = np.linalg.eigh(as_matrix(hamiltonian))
    terms = []
    for low in range(len(energies)):
        for high in range(low + 1, len(energies)):
            bias = np.tanh(0.5 * beta * (energies[high] - energies[low]))
            down = np.outer(vectors[:, low], vectors[:, high].conj())
            terms.append(LindbladTerm(down, 0.5 * gamma * (1.0 + bias)))
            terms.append(LindbladTerm(down.conj().T, 0.5 * gamma * (1.0 - bias)))
    return terms


def _null_vector(liouvillian):
    """Right singular vector of the smallest singular value, after the uniqueness check"""
    if liouvillian.dim == 1:
        return np.ones(1, dtype=complex)

    scale = liouvillian.scale
    if scale == 0.0:
        raise DegenerateSteadyState("Liouvillian is zero; every state is stationary")

    _, singular, vh = linalg.svd(liouvillian.matrix / scale)
    if singular[-2] - singular[-1] < DEGENERACY_GAP:
        raise DegenerateSteadyState(
            f"two smallest singular values {singular[-2]:.3e} and {singular[-1]:.3e} are not separated"
        )
    return vh[-1].conj()


def stationary_state(liouvillian):
    """Unique density matrix annihilated by L"""
    null = _null_vector(liouvillian)
    rho = unvec(null, liouvillian.dim)
    trace = np.trace(rho)
    if abs(trace) < 1e-14:
        raise DegenerateSteadyState("null vector is traceless; generator is not trace preserving")

    rho = rho / trace
    rho = 0.5 * (rho + rho.conj().T)

    eigenvalues, vectors = np.linalg.eigh(rho)
    if eigenvalues.min() < -NEGATIVITY_LIMIT:
        raise NonPositiveState(f"stationary state has eigenvalue {eigenvalues.min():.3e}")
    if eigenvalues.min() < 0:
        eigenvalues = np.clip(eigenvalues, 0.0, None)
        rho = (vectors * (eigenvalues / eigenvalues.sum())) @ vectors.conj().T
        rho = 0.5 * (rho + rho.conj().T)

    residual = np.linalg.norm(liouvillian.apply(rho))
    if residual > RESIDUAL_TARGET * max(1.0, liouvillian.scale):
        logger.warning(f"Stationary residual {residual:.3e} above target")

    return DensityMatrix(rho)


def spectral_gap(liouvillian):
    """Smallest decay rate |Re lambda| among the nonzero eigenvalues of L"""
    _null_vector(liouvillian)
    spectrum = liouvillian.spectrum
    if len(spectrum) < 2:
        return 0.0
    return float(np.min(np.abs(spectrum[1:].real)))


def reduced_pseudoinverse_apply(liouvillian, rho_star, operator):
    """
    Solve L[Y] = X on the traceless subspace, with P[Y] = rho* Tr[Y] = 0.

    The bordered matrix L - |rho*>><<I| is invertible whenever the stationary
    state is unique, and maps traceless X to traceless Y.
    """
    x = as_matrix(operator)
    dim = liouvillian.dim
    if x.shape != (dim, dim):
        raise DimensionMismatch(f"operator shape {x.shape} does not match dim {dim}")

    x_norm = float(np.linalg.norm(x))
    if abs(np.trace(x)) > TRACELESS_ATOL * max(1.0, x_norm):
        raise ValueError(f"operator must be traceless, trace is {np.trace(x)!r}")
    if x_norm == 0.0:
        return HermitianOperator.zeros(dim)

    gap = spectral_gap(liouvillian)
    if gap < SINGULAR_GAP:
        raise SingularSolve(f"spectral gap {gap:.3e} too small for the reduced inverse")

    bordered = liouvillian.matrix - np.outer(vec(as_matrix(rho_star)), vec(np.eye(dim)))
    try:
        y = unvec(linalg.solve(bordered, vec(x)), dim)
    except linalg.LinAlgError as err:
        raise SingularSolve(f"bordered Liouvillian is singular: {err}") from err

    residual = np.linalg.norm(liouvillian.apply(y) - x)
    if residual > BACKSUBSTITUTION_LIMIT * max(1.0, x_norm):
        raise SingularSolve(f"back-substitution residual {residual:.3e}")

    return HermitianOperator(0.5 * (y + y.conj().T))


def bloch_from_density(rho):
    entries = as_matrix(rho)
    if entries.shape != (2, 2):
        raise DimensionMismatch(f"Bloch representation needs dim 2, got {entries.shape}")
    return BlochVector(
        np.real(np.trace(entries @ SIGMA_X)),
        np.real(np.trace(entries @ SIGMA_Y)),
        np.real(np.trace(entries @ SIGMA_Z)),
    )


def density_from_bloch(bloch):
    return DensityMatrix(0.5 * (IDENTITY + bloch.x * SIGMA_X + bloch.y * SIGMA_Y + bloch.z * SIGMA_Z))


def analytic_ness_components(omega, g, gamma, p):
    """
    Vectorized closed-form steady state of the fixed-basis qubit.

    Accepts arrays; returns (x, y, z) with D = 2 omega^2 + g^2 + gamma^2 / 2 and
    s = gamma p = gamma_down - gamma_up.
    """
    omega = np.asarray(omega, dtype=float)
    g = np.asarray(g, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma <= 0):
        raise ValueError("total rate gamma must be positive")

    s = gamma * np.asarray(p, dtype=float)
    denom = 2.0 * omega ** 2 + g ** 2 + 0.5 * gamma ** 2
    x = 2.0 * s * omega * g / (gamma * denom)
    y = -s * g / denom
    z = s * (4.0 * omega ** 2 + gamma ** 2) / (2.0 * gamma * denom)
    return x, y, z


def analytic_ness_bloch(omega, g, gamma_down, gamma_up):
    if gamma_down < 0 or gamma_up < 0:
        raise ValueError("rates must be nonnegative")
    gamma = gamma_down + gamma_up
    if gamma <= 0:
        raise ValueError("gamma_down + gamma_up must be positive")
    x, y, z = analytic_ness_components(omega, g, gamma, (gamma_down - gamma_up) / gamma)
    return BlochVector(x, y, z)
