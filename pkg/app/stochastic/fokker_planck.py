"""
Finite-volume solvers for the joint density P(lambda, W, t) and the tilted
field Z(lambda, chi, t) of an isotropic control SDE on two coordinates.

Joint density, with D^ij = 2 D delta^ij, M_i = 2 D A_i, N = 2 D |A|^2 and
b_W = A.v + D div A:

    dP/dt = -d_i(v_i P) - d_W(b_W P) + D lap_lambda P + d_i d_W(M_i P) + 1/2 d_W^2(N P)

The second-order part is D sum_i (u_i . grad)^2 with u_i = e_i + A_i e_W, a
sum of two rank-one diffusions. Each is discretized along its own direction:
one cell in lambda_i and A_i h / h_w cells in W, split between the two nearest
W offsets when that is not an integer.

Cells outside the grid are empty, so outflow through the boundary leaves the
grid and is booked as leakage.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from app.models.stochastic import JointDensity, TiltedField
from app.utils.errors import InstabilityDetected, UnresolvedGrid

logger = logging.getLogger(__name__)

CFL_SAFETY = 0.9
NEGATIVE_MASS_LIMIT = 1e-8
BLOWUP_LIMIT = 1e-6
MIN_W_CELLS = 4
# extra W diffusion allowed from offset interpolation, relative to D max|A|^2
W_DIFFUSION_TOLERANCE = 0.01
MAX_W_REFINEMENT = 12
OFFSET_SNAP = 1e-9


def _w_offsets(a_component, h, h_w):
    """Lower W offset k and upper weight theta with k + theta = A_i h / h_w"""
    s = np.asarray(a_component, dtype=float) * h / h_w
    nearest = np.round(s)
    s = np.where(np.abs(s - nearest) < OFFSET_SNAP, nearest, s)
    k = np.floor(s)
    return k.astype(int), s - k


def _interpolation_diffusion(a, h, h_w):
    """Pointwise sum_i theta_i (1 - theta_i) (h_w / h)^2, the extra W diffusion per unit D"""
    extra = 0.0
    for i in range(a.shape[-1]):
        _, theta = _w_offsets(a[..., i], h, h_w)
        extra = extra + theta * (1.0 - theta)
    return np.asarray(extra) * (h_w / h) ** 2


def _work_spacing(a, h, a_max, tolerance):
    """Widest h_w = a_max h / k whose interpolation diffusion stays within tolerance"""
    for refine in range(1, MAX_W_REFINEMENT + 1):
        h_w = a_max * h / refine
        if float(np.max(_interpolation_diffusion(a, h, h_w))) <= tolerance * a_max ** 2:
            return h_w
    raise UnresolvedGrid(f"no work spacing down to h |A| / {MAX_W_REFINEMENT} meets tolerance {tolerance:g}")


@dataclass(frozen=True)
class GridSpec:
    """Cell-centered grid: n x n cells of width h around center, n_w cells of width h_w around W = 0"""

    center: tuple
    h: float
    n: int
    h_w: float
    n_w: int

    def __post_init__(self):
        if not (self.h > 0 and self.h_w > 0):
            raise ValueError("grid spacings must be positive")
        if self.n < 3 or self.n_w < 3:
            raise ValueError("grids need at least three cells per axis")
        object.__setattr__(self, 'center', tuple(float(c) for c in self.center))
        object.__setattr__(self, 'n', int(self.n) | 1)
        object.__setattr__(self, 'n_w', int(self.n_w) | 1)

    def axes(self):
        offsets = self.h * (np.arange(self.n) - self.n // 2)
        w = self.h_w * (np.arange(self.n_w) - self.n_w // 2)
        return self.center[0] + offsets, self.center[1] + offsets, w

    @property
    def shape(self):
        return (self.n, self.n, self.n_w)

    @classmethod
    def auto(cls, sde, connection, t_final, h=0.2, chi=0.0, sigmas=6.0, w_tolerance=W_DIFFUSION_TOLERANCE):
        """
        Cover sigmas standard deviations of the lambda diffusion plus the drift
        excursion, and of the predicted W spread plus the mean work drift.
        W cells are |A|_max h / k wide, with the smallest k that puts every
        mixed stencil close enough to whole W offsets.
        """
        start = sde.start
        diffusion = sde.diffusion
        drift = np.linalg.norm(sde.drift(np.atleast_2d(start), 0.0)[0])
        pull = 2.0 * diffusion * abs(chi) * np.linalg.norm(connection.components(start))
        half = sigmas * math.sqrt(2.0 * diffusion * t_final) + (drift + pull) * t_final
        cells = max(1, math.ceil(half / h - 1e-9))
        n = 2 * cells + 1

        offsets = h * (np.arange(n) - cells)
        x1, x2 = np.meshgrid(start[0] + offsets, start[1] + offsets, indexing='ij')
        points = np.column_stack([x1.ravel(), x2.ravel()])
        a_max = connection.max_norm(points)
        if a_max == 0.0:
            return cls(center=tuple(start), h=h, n=n, h_w=h, n_w=2 * MIN_W_CELLS + 1)

        a = connection(points)
        velocity = sde.drift(points, 0.0)
        b_max = float(np.max(np.abs(np.sum(a * velocity, axis=1) + diffusion * connection.divergence(points))))
        h_w = _work_spacing(a, h, a_max, w_tolerance)
        half_w = sigmas * math.sqrt(2.0 * diffusion * a_max ** 2 * t_final) + b_max * t_final
        cells_w = max(MIN_W_CELLS, math.ceil(half_w / h_w - 1e-9))
        return cls(center=tuple(start), h=h, n=n, h_w=h_w, n_w=2 * cells_w + 1)


def _shift(a, axis, offset):
    """b[j] = a[j + offset] along axis, zero where j + offset leaves the grid"""
    if offset == 0:
        return a.copy()
    out = np.zeros_like(a)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if offset > 0:
        src[axis] = slice(offset, None)
        dst[axis] = slice(None, -offset)
    else:
        src[axis] = slice(None, offset)
        dst[axis] = slice(-offset, None)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _second_difference(a, axis):
    return _shift(a, axis, 1) - 2.0 * a + _shift(a, axis, -1)


def _stencil_difference(a, axis, w_offset):
    """a(+1 along axis, +w_offset in W) + a(-1, -w_offset) - 2a"""
    forward = _shift(_shift(a, axis, 1), 2, w_offset)
    backward = _shift(_shift(a, axis, -1), 2, -w_offset)
    return forward + backward - 2.0 * a


def _upwind(p, velocity, axis, h, dt):
    """Donor-cell flux-form advection with empty ghost cells"""
    velocity = np.broadcast_to(velocity, p.shape)
    n = p.shape[axis]
    first = np.take(velocity, [0], axis=axis)
    last = np.take(velocity, [n - 1], axis=axis)
    padded_v = np.concatenate([first, velocity, last], axis=axis)
    face_v = 0.5 * (np.take(padded_v, range(0, n + 1), axis=axis) + np.take(padded_v, range(1, n + 2), axis=axis))

    pad = [(0, 0)] * p.ndim
    pad[axis] = (1, 1)
    padded_p = np.pad(p, pad)
    flux = (np.maximum(face_v, 0.0) * np.take(padded_p, range(0, n + 1), axis=axis)
            + np.minimum(face_v, 0.0) * np.take(padded_p, range(1, n + 2), axis=axis))
    return p - dt / h * (np.take(flux, range(1, n + 1), axis=axis) - np.take(flux, range(0, n), axis=axis))


def _fields(sde, connection, grid):
    if not sde.is_isotropic:
        raise ValueError("the grid solvers need isotropic constant diffusion")
    if sde.terminal is not None:
        raise ValueError("the grid solvers need a time-independent drift")
    x1, x2, _ = grid.axes()
    g1, g2 = np.meshgrid(x1, x2, indexing='ij')
    points = np.column_stack([g1.ravel(), g2.ravel()])
    shape = (grid.n, grid.n)

    velocity = sde.drift(points, 0.0)
    a = connection(points)
    diffusion = sde.diffusion
    b = np.sum(a * velocity, axis=1) + diffusion * connection.divergence(points)
    return {
        "v": [velocity[:, i].reshape(shape) for i in range(2)],
        "A": [a[:, i].reshape(shape) for i in range(2)],
        "M": [2.0 * diffusion * a[:, i].reshape(shape) for i in range(2)],
        "N": (2.0 * diffusion * np.sum(a ** 2, axis=1)).reshape(shape),
        "b": b.reshape(shape),
    }


def _time_steps(t_final, dt, dt_max):
    if dt is None or dt > dt_max:
        if dt is not None:
            logger.info(f"Time step {dt:.3e} above the stability limit, shrinking to {dt_max:.3e}")
        dt = dt_max
    steps = max(1, math.ceil(t_final / dt - 1e-12))
    return steps, t_final / steps


def _mixed_stencils(a_fields, h, h_w):
    """(axis, W offset, weight) per stencil; the weights of one axis sum to 1 in every cell"""
    stencils = []
    for i, a in enumerate(a_fields):
        k, theta = _w_offsets(a, h, h_w)
        for offset in np.unique(np.concatenate([k.ravel(), k.ravel() + 1])):
            weight = np.where(k == offset, 1.0 - theta, 0.0) + np.where(k + 1 == offset, theta, 0.0)
            if np.any(weight > 0.0):
                stencils.append((i, int(offset), weight[..., None]))
    return stencils


def fokker_planck_solve(sde, connection, grid, t_final, dt=None, w_tolerance=W_DIFFUSION_TOLERANCE):
    """
    Explicit split steps: lambda advection, W advection, then one monotone
    diffusion step along the two noise directions e_i + A_i e_W.

    Splitting a fractional W offset between its neighbours adds
    D theta (1 - theta) (h_w / h)^2 of W diffusion. Grids where that exceeds
    w_tolerance D max|A|^2 raise UnresolvedGrid; pass w_tolerance=None to
    accept them, the amount is reported either way.
    """
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    f = _fields(sde, connection, grid)
    h, hw = grid.h, grid.h_w
    diffusion = sde.diffusion

    a = np.stack(f["A"], axis=-1)
    a_max = float(np.max(np.sqrt(np.sum(a ** 2, axis=-1))))
    artificial = diffusion * float(np.max(_interpolation_diffusion(a, h, hw)))
    if w_tolerance is not None and artificial > w_tolerance * diffusion * a_max ** 2:
        raise UnresolvedGrid(
            f"work cells of {hw:.3e} add W diffusion {artificial:.3e}, above {w_tolerance:g} D |A|^2; "
            "use GridSpec.auto or a finer h_w"
        )
    if artificial > 0.0:
        logger.info(f"Offset interpolation adds W diffusion {artificial:.3e}")

    stencils = _mixed_stencils(f["A"], h, hw)
    velocity = [f["v"][i][..., None] for i in range(2)]
    b = f["b"][..., None]

    rate = (sum(float(np.max(np.abs(v))) for v in velocity) / h + float(np.max(np.abs(b))) / hw
            + 4.0 * diffusion / h ** 2)
    dt_max = CFL_SAFETY / rate if rate > 0 else t_final
    steps, dt = _time_steps(t_final, dt, dt_max)

    x1, x2, w = grid.axes()
    volume = h * h * hw
    p = np.zeros(grid.shape)
    p[grid.n // 2, grid.n // 2, grid.n_w // 2] = 1.0 / volume
    w_axis = w[None, None, :]

    times, mass, leaked, mean_w, var_w, mean_b = [0.0], [1.0], [0.0], [0.0], [0.0], [float(f["b"][grid.n // 2, grid.n // 2])]
    for step in range(steps):
        for i in range(2):
            p = _upwind(p, velocity[i], i, h, dt)
        p = _upwind(p, b, 2, hw, dt)

        update = np.zeros_like(p)
        for axis, offset, share in stencils:
            update = update + _stencil_difference(share * p, axis, offset)
        p = p + dt * diffusion / h ** 2 * update

        if not np.all(np.isfinite(p)):
            raise InstabilityDetected(f"non-finite density at step {step}")
        negative = float(np.sum(np.minimum(p, 0.0))) * volume
        if negative < -NEGATIVE_MASS_LIMIT:
            raise InstabilityDetected(f"negative mass {negative:.3e} at step {step}")
        total = float(np.sum(p)) * volume
        if total > 1.0 + BLOWUP_LIMIT:
            raise InstabilityDetected(f"mass grew to {total:.9f} at step {step}")

        weight = p * volume
        first = float(np.sum(weight * w_axis)) / total
        times.append((step + 1) * dt)
        mass.append(total)
        leaked.append(1.0 - total)
        mean_w.append(first)
        var_w.append(float(np.sum(weight * (w_axis - first) ** 2)) / total)
        mean_b.append(float(np.sum(weight * b)) / total)

    if leaked[-1] > BLOWUP_LIMIT:
        logger.warning(f"Fokker-Planck leakage {leaked[-1]:.3e}; widen the grid")

    return JointDensity(
        lam1=x1, lam2=x2, w=w, density=p, times=np.array(times), mass=np.array(mass),
        leaked=np.array(leaked), mean_w=np.array(mean_w), var_w=np.array(var_w),
        mean_drift_w=np.array(mean_b), artificial_diffusion=artificial, dt=dt,
    )


def tilted_evolve(sde, connection, chi, grid, t_final, dt=None):
    """
    Evolve Z(lambda, chi, t) = int dW e^(-chi W) P under the tilted generator

        L_chi Z = -d_i((v_i - chi M_i) Z) + D lap Z + (-chi b_W + chi^2 N / 2) Z

    The lambda integral of Z at chi = beta estimates <exp(-beta W)>.
    """
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    f = _fields(sde, connection, grid)
    h = grid.h
    chi = float(chi)
    diffusion = sde.diffusion

    velocity = [f["v"][i] - chi * f["M"][i] for i in range(2)]
    growth = -chi * f["b"] + 0.5 * chi ** 2 * f["N"]

    rate = sum(float(np.max(np.abs(v))) for v in velocity) / h + 4.0 * diffusion / h ** 2
    dt_max = CFL_SAFETY / rate if rate > 0 else t_final
    steps, dt = _time_steps(t_final, dt, dt_max)
    factor = np.exp(dt * growth)

    x1, x2, _ = grid.axes()
    area = h * h
    z = np.zeros((grid.n, grid.n))
    z[grid.n // 2, grid.n // 2] = 1.0 / area

    times, integral = [0.0], [1.0]
    for step in range(steps):
        for i in range(2):
            z = _upwind(z, velocity[i], i, h, dt)
        z = z + dt * diffusion * (_second_difference(z, 0) + _second_difference(z, 1)) / h ** 2
        z = z * factor

        if not np.all(np.isfinite(z)):
            raise InstabilityDetected(f"non-finite tilted field at step {step}")
        total = float(np.sum(z)) * area
        negative = float(np.sum(np.minimum(z, 0.0))) * area
        if negative < -NEGATIVE_MASS_LIMIT * max(1.0, abs(total)):
            raise InstabilityDetected(f"negative tilted mass {negative:.3e} at step {step}")
        times.append((step + 1) * dt)
        integral.append(total)

    return TiltedField(lam1=x1, lam2=x2, chi=chi, values=z, times=np.array(times), integral=np.array(integral), dt=dt)
