"""
Cycle work by line and surface quadrature, first-law bookkeeping, sweeps and
the coherence-induced work-reduction factor.
"""
import logging

import numpy as np
from scipy.integrate import simpson
from scipy.special import roots_legendre

from app.config import Config
from app.models.control import qubit_thermal_model
from app.models.fields import CurvatureField
from app.models.protocol import TWO_PI, Disk, Ellipse, Polygon, Protocol
from app.models.results import (
    CycleResult,
    EtaReport,
    FiniteRateResult,
    FirstLawTrace,
    LineIntegral,
    PhaseSweep,
    RadiusSweep,
    SignedFlux,
    SurfaceIntegral,
)
from app.physics.geometry import baseline_field, work_one_form
from app.physics.quantum_core import reduced_pseudoinverse_apply
from app.utils.errors import DimensionMismatch, NonConvergence, UnresolvedIntegrand, ZeroBaseline
from app.utils.parallel import parallel_map

logger = logging.getLogger(__name__)

MIN_LINE_NODES = 16
SATURATION_RADIUS = 40.0
POLYGON_SUBDIVISIONS = 16


def _check_protocol(model, protocol):
    if protocol.ndim != model.ndim:
        raise DimensionMismatch(
            f"protocol lives in {protocol.ndim} coordinates, model {model.label!r} has {model.ndim}"
        )


def _forms(model, points, threads):
    return np.array(parallel_map(lambda lam: work_one_form(model, lam).components, points, threads))


def _periodic_integral(model, protocol, n, threads):
    theta = TWO_PI * np.arange(n) / n
    integrand = np.sum(_forms(model, protocol.path(theta), threads) * protocol.velocity(theta), axis=1)
    step = TWO_PI / n
    return float(np.sum(integrand) * step), theta, np.cumsum(integrand) * step


def _segment_integral(model, protocol, n, threads):
    """Simpson on every straight segment so corners sit on nodes"""
    m = n + 1 if n % 2 == 0 else n
    s = np.linspace(0.0, 1.0, m)
    total = 0.0
    trace = []
    for start, end in protocol.segments():
        points = start + s[:, None] * (end - start)
        integrand = _forms(model, points, threads) @ (end - start)
        value = float(simpson(integrand, x=s))
        total += value
        trace.append(total)
    theta = TWO_PI * np.arange(1, len(trace) + 1) / len(trace)
    return total, theta, np.array(trace)


def _line_integral(model, protocol, n, threads):
    if protocol.family == Protocol.POLYLINE:
        return _segment_integral(model, protocol, n, threads)
    return _periodic_integral(model, protocol, n, threads)


def line_integral_details(model, protocol, n=Config.LINE_NODES, tolerance=Config.DEFAULT_TOLERANCE,
                          max_nodes=Config.MAX_LINE_NODES, threads=1):
    """
    Converged line integral of A_i dlambda^i/dtheta.

    Closed smooth loops use the periodic trapezoid rule, piecewise-linear
    paths use Simpson per segment. The node count doubles until two
    successive values agree within tolerance * max(1, |W|).
    """
    if n < MIN_LINE_NODES:
        raise ValueError(f"line integrals need at least {MIN_LINE_NODES} nodes, got {n}")
    _check_protocol(model, protocol)

    coarse, _, _ = _line_integral(model, protocol, n, threads)
    while True:
        fine, theta, trace = _line_integral(model, protocol, 2 * n, threads)
        residual = abs(fine - coarse)
        if residual <= tolerance * max(1.0, abs(fine)):
            return LineIntegral(value=fine, n_nodes=2 * n, residual=residual, theta=theta, trace=trace)
        if 4 * n > max_nodes:
            raise NonConvergence(f"line integral changed by {residual:.3e} at {2 * n} nodes")
        logger.info(f"Line integral residual {residual:.3e} at {2 * n} nodes, refining")
        n, coarse = 2 * n, fine


def line_integral_work(model, protocol, n=Config.LINE_NODES, tolerance=Config.DEFAULT_TOLERANCE, threads=1):
    return line_integral_details(model, protocol, n=n, tolerance=tolerance, threads=threads).value


def _planar(field):
    if field.plane == (0, 1):
        return field
    if field.plane == (1, 0):
        return field.transposed()
    raise ValueError(f"surface integrals run on the (0, 1) plane, field lives on {field.plane}")


def _polar_quadrature(field, center, ax, by, orientation, radial, angular):
    nodes, weights = roots_legendre(radial)
    r = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    phi = TWO_PI * np.arange(angular) / angular
    rr, pp = np.meshgrid(r, phi, indexing='ij')
    values = field(center[0] + ax * rr * np.cos(pp), center[1] + by * rr * np.sin(pp))
    return orientation * ax * by * float(np.sum(w[:, None] * rr * values)) * TWO_PI / angular


def _triangle_centroids(m):
    """Barycentric (u, v) of the centroids of the m^2 subtriangles"""
    i, j = np.meshgrid(np.arange(m), np.arange(m), indexing='ij')
    up = (i + j) <= m - 1
    down = (i + j) <= m - 2
    u = np.concatenate([(i[up] + 1.0 / 3.0) / m, (i[down] + 2.0 / 3.0) / m])
    v = np.concatenate([(j[up] + 1.0 / 3.0) / m, (j[down] + 2.0 / 3.0) / m])
    return u, v


def _polygon_quadrature(field, polygon, m):
    """Signed fan triangulation with a subdivided centroid rule; orientation follows vertex order"""
    vertices = polygon.vertices
    u, v = _triangle_centroids(m)
    total = 0.0
    origin = vertices[0]
    for k in range(1, len(vertices) - 1):
        e1 = vertices[k] - origin
        e2 = vertices[k + 1] - origin
        signed_area = 0.5 * (e1[0] * e2[1] - e1[1] * e2[0])
        if signed_area == 0.0:
            continue
        x = origin[0] + u * e1[0] + v * e2[0]
        y = origin[1] + u * e1[1] + v * e2[1]
        total += signed_area * float(np.sum(field(x, y))) / (m * m)
    return total


def _quadrature(field, region, resolution):
    radial, angular = resolution
    if isinstance(region, Disk):
        return _polar_quadrature(field, region.center, region.radius, region.radius,
                                 region.orientation, radial, angular)
    if isinstance(region, Ellipse):
        return _polar_quadrature(field, region.center, region.a, region.b,
                                 region.orientation, radial, angular)
    if isinstance(region, Polygon):
        return _polygon_quadrature(field, region, radial)
    raise ValueError(f"unsupported region {type(region).__name__}")


def _polygon_estimate(field, polygon, tolerance, max_subdivisions):
    """Richardson-extrapolated centroid rule; the error is the change between two extrapolations"""
    m = POLYGON_SUBDIVISIONS
    levels = [_polygon_quadrature(field, polygon, m), _polygon_quadrature(field, polygon, 2 * m)]
    previous = (4.0 * levels[1] - levels[0]) / 3.0
    while True:
        m *= 2
        levels.append(_polygon_quadrature(field, polygon, 2 * m))
        value = (4.0 * levels[-1] - levels[-2]) / 3.0
        error = abs(value - previous)
        if error <= tolerance * max(1.0, abs(value)):
            return SurfaceIntegral(value=float(value), error=float(error), resolution=(2 * m, 0))
        if 4 * m > max_subdivisions:
            raise UnresolvedIntegrand(f"polygon flux error {error:.3e} at {2 * m} subdivisions")
        previous = value


def surface_integral_estimate(field, region, radial=Config.RADIAL_NODES, angular=Config.ANGULAR_NODES,
                              tolerance=Config.DEFAULT_TOLERANCE, max_radial=Config.MAX_RADIAL_NODES):
    """
    Flux of a curvature density through a disk, ellipse or polygon.

    Disks and ellipses use Gauss-Legendre in the radius times the periodic
    trapezoid in angle, with the error estimated by doubling both node
    counts. Polygons use fan triangles split into m^2 subtriangles and a
    Richardson step on the O(h^2) centroid rule.
    """
    field = _planar(field)
    if isinstance(region, Polygon):
        return _polygon_estimate(field, region, tolerance, max_radial)

    resolution = (radial, angular)
    coarse = _quadrature(field, region, resolution)
    while True:
        refined = (2 * resolution[0], 2 * resolution[1])
        fine = _quadrature(field, region, refined)
        error = abs(fine - coarse)
        if error <= tolerance * max(1.0, abs(fine)):
            return SurfaceIntegral(value=float(fine), error=float(error), resolution=refined)
        if 2 * refined[0] > max_radial:
            raise UnresolvedIntegrand(f"surface integral error {error:.3e} at resolution {refined}")
        resolution, coarse = refined, fine


def surface_integral_work(field, region, radial=Config.RADIAL_NODES, angular=Config.ANGULAR_NODES,
                          tolerance=Config.DEFAULT_TOLERANCE):
    return surface_integral_estimate(field, region, radial, angular, tolerance).value


def _check_field(model, field):
    if field.mode == CurvatureField.MODE_BASELINE:
        raise ValueError("the population baseline is not the curvature of any model's one-form")
    if field.mode == CurvatureField.MODE_COHERENT and model.label != "coherent":
        raise ValueError(f"coherent closed form does not describe model {model.label!r}")
    if field.mode == CurvatureField.MODE_COHERENT and field.parameters.get("beta") is not None:
        raise ValueError("with a pointwise thermal bias the coherent density is not a curl; use the finite-difference field")


def stokes_check(model, protocol, field, n=Config.LINE_NODES, tolerance=Config.DEFAULT_TOLERANCE,
                 radial=Config.RADIAL_NODES, angular=Config.ANGULAR_NODES, threads=1):
    """Line integral of A_W against the flux of Omega through the enclosed region"""
    if not protocol.closed or not protocol.is_planar:
        raise ValueError("Stokes comparison needs a closed loop in the (0, 1) plane")
    _check_field(model, field)

    line = line_integral_details(model, protocol, n=n, tolerance=tolerance, threads=threads)
    surface = surface_integral_estimate(field, protocol.region(), radial, angular, tolerance)
    result = CycleResult(
        w_line=line.value,
        n_nodes=line.n_nodes,
        residual=line.residual,
        w_surface=surface.value,
        surface_error=surface.error,
        field_mode=field.mode,
        theta=line.theta,
        trace=line.trace,
    )
    logger.info(f"Stokes check: line {result.w_line:.12g}, surface {result.w_surface:.12g}, gap {result.stokes_gap:.3e}")
    return result


def total_baseline_flux(beta, tolerance=Config.DEFAULT_TOLERANCE):
    """Flux of the population baseline through a disk large enough to hold all of it"""
    return surface_integral_work(baseline_field(beta), Disk((0.0, 0.0), SATURATION_RADIUS / beta), tolerance=tolerance)


def radius_sweep(beta, radii, tolerance=Config.DEFAULT_TOLERANCE, threads=1):
    """W_cyc(eps) of the population baseline over centered disks, normalized by the total flux"""
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0 or np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be positive and strictly ascending")
    field = baseline_field(beta)
    work = parallel_map(
        lambda eps: surface_integral_work(field, Disk((0.0, 0.0), eps), tolerance=tolerance), radii, threads
    )
    return RadiusSweep(beta=float(beta), radii=radii, work=np.array(work), w_inf=total_baseline_flux(beta, tolerance))


def fit_sinusoid(phases, work):
    """Least squares W0 + A cos(phi + delta) on the regressors (1, cos phi, sin phi)"""
    phases = np.asarray(phases, dtype=float)
    work = np.asarray(work, dtype=float)
    if phases.size < 3:
        raise ValueError("a sinusoid fit needs at least three phases")
    design = np.column_stack([np.ones_like(phases), np.cos(phases), np.sin(phases)])
    (w0, c, s), *_ = np.linalg.lstsq(design, work, rcond=None)
    amplitude = float(np.hypot(c, s))
    delta = float(np.arctan2(-s, c))
    residual = float(np.max(np.abs(work - design @ np.array([w0, c, s]))))
    return float(w0), amplitude, delta, residual


def phase_sweep(center, a, b, T0, delta_T, phases, n=Config.LINE_NODES, gamma=1.0,
                tolerance=Config.DEFAULT_TOLERANCE, threads=1):
    """Cycle work of temperature-modulated loops on the (omega, g, T) chart versus the modulation phase"""
    if not T0 > delta_T >= 0:
        raise ValueError(f"need T0 > delta_T >= 0, got T0={T0}, delta_T={delta_T}")
    model = qubit_thermal_model(beta=None, gamma=gamma)
    phases = np.asarray(phases, dtype=float)

    def cycle(phi):
        protocol = Protocol.temperature_modulated(center, a, b, T0, delta_T, phi)
        return line_integral_work(model, protocol, n=n, tolerance=tolerance)

    work = np.array(parallel_map(cycle, phases, threads))
    w0, amplitude, delta, residual = fit_sinusoid(phases, work)
    return PhaseSweep(phases=phases, work=work, w0=w0, amplitude=amplitude, delta=delta, residual=residual)


def _region_center(region):
    if isinstance(region, Polygon):
        return tuple(np.mean(region.vertices, axis=0))
    return tuple(region.center)


def local_eta(omega0, g0, coherent, baseline):
    """Ratio of the two densities at one point: the small-loop limit of eta"""
    denominator = float(baseline(omega0, g0))
    if denominator == 0.0:
        raise ZeroBaseline(f"baseline density vanishes at ({omega0}, {g0})")
    return float(coherent(omega0, g0)) / denominator


def eta_geom(loop, coherent, baseline, tolerance=Config.DEFAULT_TOLERANCE,
             radial=Config.RADIAL_NODES, angular=Config.ANGULAR_NODES):
    """
    eta = W_coh / W_pop over the region bounded by the loop.

    eta < 0 means the coherent work runs against the population work.
    """
    region = loop.region() if isinstance(loop, Protocol) else loop
    w_coh = surface_integral_work(coherent, region, radial, angular, tolerance)
    w_pop = surface_integral_work(baseline, region, radial, angular, tolerance)
    if abs(w_pop) < np.finfo(float).tiny:
        raise ZeroBaseline("population baseline flux through the loop is zero")

    center = _region_center(region)
    try:
        local = local_eta(center[0], center[1], coherent, baseline)
    except ZeroBaseline:
        local = None
    return EtaReport(w_coh=w_coh, w_pop=w_pop, eta=w_coh / w_pop, local_eta=local)


def small_cycle_eta(omega0, g0, gamma, beta):
    """2 g0 (g0^2 + gamma^2) sinh(beta eps0) / (beta D0^2) with D0 = 2 omega0^2 + g0^2 + gamma^2 / 2"""
    if beta <= 0 or gamma <= 0:
        raise ValueError("beta and gamma must be positive")
    eps = np.hypot(omega0, g0)
    denom = 2.0 * omega0 ** 2 + g0 ** 2 + 0.5 * gamma ** 2
    return 2.0 * g0 * (g0 ** 2 + gamma ** 2) * np.sinh(beta * eps) / (beta * denom ** 2)


def signed_flux(field, region, radial=Config.RADIAL_NODES, angular=Config.ANGULAR_NODES):
    """Positive and negative parts of the flux at fixed resolution"""
    field = _planar(field)
    positive = CurvatureField(lambda x, y: np.maximum(field(x, y), 0.0), field.mode)
    negative = CurvatureField(lambda x, y: np.minimum(field(x, y), 0.0), field.mode)
    resolution = (radial, angular)
    return SignedFlux(
        positive=_quadrature(positive, region, resolution),
        negative=_quadrature(negative, region, resolution),
    )


def first_law_trace(model, protocol, n=Config.LINE_NODES):
    """
    Split dU = d Tr[rho* H] into dW = Tr[rho_mid dH] and dQ = Tr[H_mid d rho].

    With midpoint products the split is exact step by step. Closed loops reuse
    the first node as the last, so the U sum telescopes to zero.
    """
    if n < MIN_LINE_NODES:
        raise ValueError(f"need at least {MIN_LINE_NODES} steps, got {n}")
    _check_protocol(model, protocol)

    theta = TWO_PI * np.arange(n + 1) / n
    points = protocol.path(theta)
    if protocol.closed:
        points[-1] = points[0]

    states = [model.stationary_state(lam).entries for lam in points]
    hamiltonians = [np.asarray(model.hamiltonian_at(lam).entries) for lam in points]

    d_u, d_w, d_q = np.zeros(n), np.zeros(n), np.zeros(n)
    for k in range(n):
        rho_a, rho_b = states[k], states[k + 1]
        h_a, h_b = hamiltonians[k], hamiltonians[k + 1]
        d_u[k] = np.real(np.trace(rho_b @ h_b) - np.trace(rho_a @ h_a))
        d_w[k] = np.real(np.trace(0.5 * (rho_a + rho_b) @ (h_b - h_a)))
        d_q[k] = np.real(np.trace(0.5 * (h_a + h_b) @ (rho_b - rho_a)))

    return FirstLawTrace(theta=theta[1:], d_u=d_u, d_w=d_w, d_q=d_q)


def _excess_integrands(model, lam, tangent):
    """(-Re Tr[L^-1(d_theta rho) d_theta H], -Re Tr[d_theta rho L^-1(d_theta rho)]) at one node"""
    liouvillian = model.liouvillian(lam)
    rho = model.stationary_state(lam)
    dim = rho.dim

    d_rho = sum(v * d for v, d in zip(tangent, model.state_derivatives(lam)))
    d_rho = 0.5 * (d_rho + d_rho.conj().T)
    d_rho = d_rho - np.trace(d_rho) * np.eye(dim) / dim
    d_h = sum(v * g.entries for v, g in zip(tangent, model.generators(lam)))

    response = reduced_pseudoinverse_apply(liouvillian, rho, d_rho).entries
    return -np.real(np.trace(response @ d_h)), -np.real(np.trace(d_rho @ response))


def finite_rate_sweep(model, protocol, periods, n=Config.LINE_NODES, threads=1):
    """
    Adiabatic-response work of a closed loop driven at constant speed over each period.

    The lag delta rho = -L_perp^-1(d rho*/dt) adds W_ex = int Tr[delta rho dH],
    reported next to the metric length int g_ij v^i v^j dt of the same schedule.
    Both scale as 1/period; no master-equation propagation is done.
    """
    if not protocol.closed:
        raise ValueError("finite-rate work is defined here for closed loops")
    periods = np.asarray(periods, dtype=float)
    if np.any(periods <= 0):
        raise ValueError("periods must be positive")
    _check_protocol(model, protocol)

    theta = TWO_PI * np.arange(n) / n
    points = protocol.path(theta)
    tangents = protocol.velocity(theta)
    values = np.array(parallel_map(lambda k: _excess_integrands(model, points[k], tangents[k]), range(n), threads))
    excess_theta = float(np.sum(values[:, 0])) * TWO_PI / n
    metric_theta = float(np.sum(values[:, 1])) * TWO_PI / n

    w_geometric = line_integral_work(model, protocol, n=n, threads=threads)
    return [
        FiniteRateResult(
            period=float(period),
            w_geometric=w_geometric,
            w_excess=TWO_PI / period * excess_theta,
            metric_length=TWO_PI / period * metric_theta,
        )
        for period in periods
    ]


def finite_rate_work(model, protocol, period, n=Config.LINE_NODES, threads=1):
    return finite_rate_sweep(model, protocol, [period], n=n, threads=threads)[0]
