"""
Heun (Stratonovich) integration of control-space SDEs with work accumulation,
and reproducible Monte Carlo ensembles.

Each trajectory owns a generator seeded from (base_seed, index), and draws its
whole increment path from it, so results do not depend on chunking or on the
number of threads.
"""
import logging

import numpy as np

from app.config import Config
from app.models.stochastic import ControlSDE, GaugeReport, WorkEnsemble, WorkTrajectory
from app.stochastic.connections import GaugeShiftedConnection
from app.utils.errors import DimensionMismatch, DomainExit
from app.utils.parallel import chunked, parallel_map

logger = logging.getLogger(__name__)


def derive_seed(base_seed, index):
    """64-bit seed of trajectory `index` under `base_seed`"""
    sequence = np.random.SeedSequence(int(base_seed), spawn_key=(int(index),))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def constant_drift(vector):
    vector = np.asarray(vector, dtype=float).reshape(-1)

    def drift(lam, t):
        return np.broadcast_to(vector, np.shape(lam)).copy()

    return drift


def rotation_drift(center, rate):
    """Counterclockwise circulation about center at angular rate"""
    center = np.asarray(center, dtype=float).reshape(-1)

    def drift(lam, t):
        lam = np.atleast_2d(lam)
        return rate * np.column_stack([-(lam[:, 1] - center[1]), lam[:, 0] - center[0]])

    return drift


def time_grid(t_final, dt):
    """(steps, dt) with steps * dt == t_final"""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_final < dt:
        raise ValueError(f"t_final {t_final} shorter than one step {dt}")
    steps = max(1, int(round(t_final / dt)))
    return steps, t_final / steps


def _reflect(lam, bounds):
    lower, upper = bounds
    width = upper - lower
    folded = np.mod(lam - lower, 2.0 * width)
    return lower + np.where(folded > width, 2.0 * width - folded, folded)


def _outside(lam, sde, connection):
    outside = np.zeros(lam.shape[0], dtype=bool)
    if sde.bounds is not None:
        lower, upper = sde.bounds
        outside |= np.any((lam < lower) | (lam > upper), axis=1)
    contains = getattr(connection, 'contains', None)
    if contains is not None:
        outside |= ~np.array([contains(point) for point in lam], dtype=bool)
    return outside


def _contract(sigma, increment):
    """sigma^ik dW_k written out so the result does not depend on the batch size"""
    out = np.zeros(sigma.shape[:2])
    for k in range(sigma.shape[2]):
        out += sigma[:, :, k] * increment[:, k][:, None]
    return out


def _dot(a, b):
    out = np.zeros(a.shape[0])
    for i in range(a.shape[1]):
        out += a[:, i] * b[:, i]
    return out


def _increments(seeds, steps, noise_dim, dt):
    """Wiener increments (n, steps, k), one generator per trajectory"""
    scale = np.sqrt(dt)
    return np.stack([
        np.random.default_rng(seed).standard_normal((steps, noise_dim)) * scale
        for seed in seeds
    ])


def _integrate(sde, connection, steps, dt, increments, keep_path=False):
    """
    Heun predictor-corrector on a batch. Both stages use the same increments;
    the work increment is A at the step midpoint contracted with the step.
    """
    n = increments.shape[0]
    lam = np.tile(sde.start, (n, 1))
    work = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    path = [lam.copy()] if keep_path else None
    works = [work.copy()] if keep_path else None

    for step in range(steps):
        t = step * dt
        dw = increments[:, step, :]
        last = step == steps - 1

        if last and sde.terminal is not None:
            nxt = np.tile(sde.terminal, (n, 1))
        else:
            drift0 = sde.drift(lam, t)
            sigma0 = sde.noise_matrix(lam)
            kick0 = _contract(sigma0, dw)
            predicted = lam + drift0 * dt + kick0
            drift1 = sde.drift(predicted, t + dt)
            kick1 = _contract(sde.noise_matrix(predicted), dw)
            nxt = lam + 0.5 * (drift0 + drift1) * dt + 0.5 * (kick0 + kick1)

        if sde.bounds is not None and sde.boundary == ControlSDE.REFLECT:
            nxt = _reflect(nxt, sde.bounds)

        outside = _outside(nxt, sde, connection)
        if np.any(outside):
            if sde.boundary == ControlSDE.REFLECT and sde.bounds is not None:
                raise DomainExit("reflected path still outside the connection's domain")
            alive &= ~outside
            nxt = np.where(outside[:, None], lam, nxt)

        midpoint = 0.5 * (lam + nxt)
        increment = _dot(connection(midpoint), nxt - lam)
        work = work + np.where(alive, increment, 0.0)
        lam = nxt
        if keep_path:
            path.append(lam.copy())
            works.append(work.copy())

    return lam, work, alive, (np.array(path) if keep_path else None), (np.array(works) if keep_path else None)


def simulate_trajectory(sde, connection, t_final, dt, seed):
    """One Stratonovich trajectory with its work path; rejection raises DomainExit"""
    if connection.components(sde.start).shape != sde.start.shape:
        raise DimensionMismatch("connection and SDE dimensions differ")
    steps, dt = time_grid(t_final, dt)
    increments = _increments([seed], steps, sde.noise_dim, dt)
    _, _, alive, path, works = _integrate(sde, connection, steps, dt, increments, keep_path=True)
    if not alive[0]:
        raise DomainExit(f"trajectory with seed {seed} left the domain")
    return WorkTrajectory(times=dt * np.arange(steps + 1), path=path[:, 0, :], work=works[:, 0], seed=int(seed))


def ensemble(sde, connection, t_final, dt, samples, base_seed, threads=1, chunk_size=Config.SDE_CHUNK_SIZE):
    """
    N trajectories with seeds derive_seed(base_seed, i), merged in index order.

    Rejected trajectories are dropped and counted.
    """
    if samples < 1:
        raise ValueError("an ensemble needs at least one trajectory")
    if connection.components(sde.start).shape != sde.start.shape:
        raise DimensionMismatch("connection and SDE dimensions differ")
    steps, dt = time_grid(t_final, dt)
    seeds = np.array([derive_seed(base_seed, i) for i in range(samples)], dtype=np.uint64)
    noise_dim = sde.noise_dim

    def run(bounds):
        start, stop = bounds
        increments = _increments([int(s) for s in seeds[start:stop]], steps, noise_dim, dt)
        lam, work, alive, _, _ = _integrate(sde, connection, steps, dt, increments)
        return lam, work, alive

    chunks = parallel_map(run, chunked(samples, chunk_size), threads)
    ends = np.concatenate([c[0] for c in chunks])
    work = np.concatenate([c[1] for c in chunks])
    alive = np.concatenate([c[2] for c in chunks])

    rejected = int(np.sum(~alive))
    if rejected:
        logger.warning(f"{rejected} of {samples} trajectories rejected at the domain boundary")
    if not np.any(alive):
        raise DomainExit("every trajectory left the domain")

    return WorkEnsemble(
        work=work[alive],
        seeds=seeds[alive],
        base_seed=int(base_seed),
        dt=dt,
        t_final=float(t_final),
        starts=np.tile(sde.start, (int(np.sum(alive)), 1)),
        ends=ends[alive],
        rejected=rejected,
    )


def path_independence_residuals(work_ensemble, potential):
    """W_k - (phi(end_k) - phi(start_k)) for an exact connection with potential phi"""
    return work_ensemble.work - (potential(work_ensemble.ends) - potential(work_ensemble.starts))


def gauge_shift_experiment(connection, phi, closed_sde, open_sde, t_final, dt, samples, base_seed,
                           grad_phi=None, threads=1):
    """
    Rerun the same seeded ensembles with A + d(phi).

    Closed loops keep their work path by path; open paths shift by
    phi(end) - phi(start).
    """
    shifted = GaugeShiftedConnection(connection, phi, grad_phi)

    closed_base = ensemble(closed_sde, connection, t_final, dt, samples, base_seed, threads)
    closed_shift = ensemble(closed_sde, shifted, t_final, dt, samples, base_seed, threads)
    open_base = ensemble(open_sde, connection, t_final, dt, samples, base_seed, threads)
    open_shift = ensemble(open_sde, shifted, t_final, dt, samples, base_seed, threads)

    open_delta = open_shift.work - open_base.work
    expected = phi(open_base.ends) - phi(open_base.starts)
    return GaugeReport(
        closed_max_shift=float(np.max(np.abs(closed_shift.work - closed_base.work))),
        open_mean_shift=float(np.mean(open_delta)),
        open_expected_shift=float(np.mean(expected)),
        open_max_deviation=float(np.max(np.abs(open_delta - expected))),
        dt=closed_base.dt,
    )
