import logging

import numpy as np

from app.commands.common import (
    Run,
    build_coherent_field,
    build_model,
    build_protocol,
    command,
    model_beta,
    model_gamma,
    values,
)
from app.models.fields import CurvatureField
from app.models.protocol import TWO_PI, Disk
from app.models.table import ResultTable
from app.physics import cycles
from app.physics.geometry import baseline_field, coherent_field, curvature_fd, work_one_form
from app.utils.errors import ConfigError, NumericalError, ZeroBaseline
from app.utils.output import write_map_script
from app.utils.parallel import parallel_map

logger = logging.getLogger(__name__)

NAN = float('nan')
DEFAULT_ETA_RADIUS = 0.05


def _map_plot(z):
    def plot(table, out_dir, stem):
        write_map_script(table, out_dir, 'omega', 'g', z, name=stem)
    return plot


@command('curvature-map')
def curvature_map(config_path, out_dir, seed, tolerance, threads):
    """Work one-form and curvature densities on an (omega, g) grid"""
    run = Run('curvature-map', config_path, out_dir, seed, tolerance, threads)
    model_cfg = run.config['model']
    model = build_model(model_cfg)
    if model.ndim != 2:
        raise NumericalError("curvature maps need a fixed-temperature (omega, g) chart")

    beta = model_beta(model_cfg)
    coherent = build_coherent_field(model_cfg) if model.label == 'coherent' else None
    baseline = baseline_field(beta) if beta is not None else None
    nodes = [(w, g) for w in values(model_cfg['omega']) for g in values(model_cfg['g'])]

    def row(node):
        lam = np.array(node)
        form = work_one_form(model, lam).components
        numeric = curvature_fd(model, lam, tolerance=run.numeric['tolerance'])
        return (
            node[0], node[1], form[0], form[1], numeric,
            float(coherent(*node)) if coherent is not None else NAN,
            float(baseline(*node)) if baseline is not None else NAN,
        )

    table = ResultTable(
        command='curvature-map',
        columns=['omega', 'g', 'A_omega', 'A_g', 'curvature_fd', 'curvature_coherent', 'curvature_baseline'],
        metadata={
            'model': model.label,
            'fields': ",".join(
                [CurvatureField.MODE_FD]
                + ([coherent.mode] if coherent is not None else [])
                + ([baseline.mode] if baseline is not None else [])
            ),
        },
    )
    for values_ in parallel_map(row, nodes, run.threads):
        table.add_row(*values_)
    run.emit(table, plot=_map_plot('curvature_coherent' if coherent is not None else 'curvature_fd'))


def _surface_field(model, model_cfg):
    """Curvature field whose flux should equal the loop work, or None when no cheap one exists"""
    if model.label == 'thermal':
        return CurvatureField.zero()
    if model_cfg.get('detailed_balance'):
        return None
    return build_coherent_field(model_cfg)


@command('cycle-work')
def cycle_work(config_path, out_dir, seed, tolerance, threads):
    """Line and surface cycle work, the first-law trace and eta when both fields exist"""
    run = Run('cycle-work', config_path, out_dir, seed, tolerance, threads)
    numeric = run.numeric
    model_cfg = run.config['model']
    model = build_model(model_cfg)
    protocol = build_protocol(run.config['protocol'])

    field = _surface_field(model, model_cfg) if protocol.closed and protocol.is_planar else None
    if field is not None:
        result = cycles.stokes_check(model, protocol, field, n=numeric['nodes'], tolerance=numeric['tolerance'],
                                     radial=numeric['radial'], angular=numeric['angular'], threads=run.threads)
        w_line, n_nodes, residual = result.w_line, result.n_nodes, result.residual
        w_surface, surface_error, gap = result.w_surface, result.surface_error, result.stokes_gap
        theta, trace = result.theta, result.trace
    else:
        line = cycles.line_integral_details(model, protocol, n=numeric['nodes'], tolerance=numeric['tolerance'],
                                            threads=run.threads)
        w_line, n_nodes, residual = line.value, line.n_nodes, line.residual
        w_surface = surface_error = gap = NAN
        theta, trace = line.theta, line.trace

    beta = model_beta(model_cfg)
    eta = w_coh = w_pop = NAN
    if model.label == 'coherent' and beta is not None and protocol.closed and protocol.is_planar:
        coherent = build_coherent_field(model_cfg)
        try:
            report = cycles.eta_geom(protocol, coherent, baseline_field(beta), tolerance=numeric['tolerance'],
                                     radial=numeric['radial'], angular=numeric['angular'])
            eta, w_coh, w_pop = report.eta, report.w_coh, report.w_pop
        except ZeroBaseline as err:
            logger.warning(f"eta undefined: {err}")

    first_law = cycles.first_law_trace(model, protocol, n=numeric['nodes'])

    table = ResultTable(
        command='cycle-work',
        columns=['w_line', 'n_nodes', 'line_residual', 'w_surface', 'surface_error', 'stokes_gap',
                 'eta', 'w_coh', 'w_pop', 'total_u', 'total_w', 'total_q', 'first_law_residual'],
        metadata={
            'model': model.label,
            'protocol': protocol.family + (' (reversed)' if protocol.reverse else ''),
            'surface_field': field.mode if field is not None else 'none',
        },
    )
    table.add_row(w_line, n_nodes, residual, w_surface, surface_error, gap, eta, w_coh, w_pop,
                  first_law.total_u, first_law.total_w, first_law.total_q, first_law.max_step_residual)
    run.emit(table)

    steps = ResultTable(
        command='cycle-work',
        columns=['theta', 'd_u', 'd_w', 'd_q', 'cumulative_w'],
        units=['rad', 'energy', 'energy', 'energy', 'energy'],
    )
    cumulative = np.cumsum(first_law.d_w)
    for k in range(len(first_law.theta)):
        steps.add_row(first_law.theta[k], first_law.d_u[k], first_law.d_w[k], first_law.d_q[k], cumulative[k])
    run.emit(steps, name='cycle-work-trace', plot=('theta', ['cumulative_w', 'd_q']))

    if theta is not None and trace is not None:
        line_trace = ResultTable(command='cycle-work', columns=['theta', 'line_work'], units=['rad', 'energy'])
        for t, w in zip(theta, trace):
            line_trace.add_row(t, w)
        run.emit(line_trace, name='cycle-work-line')

    if protocol.closed:
        finite = ResultTable(
            command='cycle-work',
            columns=['period', 'w_geometric', 'w_excess', 'w_total', 'metric_length', 'ratio'],
            units=['time', 'energy', 'energy', 'energy', 'energy', '-'],
        )
        for result in cycles.finite_rate_sweep(model, protocol, numeric['periods'], n=numeric['nodes'],
                                               threads=run.threads):
            finite.add_row(result.period, result.w_geometric, result.w_excess, result.w_total,
                           result.metric_length, result.ratio)
        run.emit(finite, name='cycle-work-finite-rate', plot=('period', ['w_excess', 'metric_length']))


@command('radius-sweep')
def radius_sweep(config_path, out_dir, seed, tolerance, threads):
    """Normalized baseline cycle work over centered disks, one curve per beta"""
    run = Run('radius-sweep', config_path, out_dir, seed, tolerance, threads)
    numeric = run.numeric
    radii = values(numeric['radii'])

    table = ResultTable(
        command='radius-sweep',
        columns=['beta', 'eps', 'work', 'normalized', 'w_inf', 'beta_w_inf'],
        metadata={'field': CurvatureField.MODE_BASELINE},
    )
    saturation = {}
    for beta in numeric['betas']:
        sweep = cycles.radius_sweep(beta, radii, tolerance=numeric['tolerance'], threads=run.threads)
        saturation[beta] = sweep.saturation_radius(0.9)
        for eps, work, normalized in zip(sweep.radii, sweep.work, sweep.normalized):
            table.add_row(beta, eps, work, normalized, sweep.w_inf, beta * sweep.w_inf)
    table.metadata['saturation_0.9'] = ";".join(f"beta={b}:{r}" for b, r in saturation.items())
    run.emit(table, plot=('eps', ['normalized'], 'points'))


@command('phase-sweep')
def phase_sweep(config_path, out_dir, seed, tolerance, threads):
    """Temperature-modulated cycle work against the modulation phase, with its sinusoid fit"""
    run = Run('phase-sweep', config_path, out_dir, seed, tolerance, threads)
    numeric = run.numeric
    protocol_cfg = run.config['protocol']
    model_cfg = run.config.get('model') or {}
    phases = TWO_PI * np.arange(numeric['phases']) / numeric['phases']

    sweep = cycles.phase_sweep(
        protocol_cfg['center'], protocol_cfg['a'], protocol_cfg['b'], protocol_cfg['T0'], protocol_cfg['delta_T'],
        phases, n=numeric['nodes'], gamma=model_gamma(model_cfg), tolerance=numeric['tolerance'],
        threads=run.threads,
    )
    table = ResultTable(
        command='phase-sweep',
        columns=['phase', 'work', 'fitted'],
        units=['rad', 'energy', 'energy'],
        metadata={
            'w0': repr(sweep.w0),
            'amplitude': repr(sweep.amplitude),
            'delta': repr(sweep.delta),
            'fit_residual': repr(sweep.residual),
        },
    )
    for phase, work, fitted in zip(sweep.phases, sweep.work, sweep.fitted()):
        table.add_row(phase, work, fitted)
    run.emit(table, plot=('phase', ['work', 'fitted']))


@command('eta-map')
def eta_map(config_path, out_dir, seed, tolerance, threads):
    """Direct, local and small-cycle eta over a grid of loop centers"""
    run = Run('eta-map', config_path, out_dir, seed, tolerance, threads)
    numeric = run.numeric
    model_cfg = run.config['model']
    beta = model_beta(model_cfg)
    gamma = model_gamma(model_cfg)
    protocol_cfg = run.config.get('protocol')
    radius = protocol_cfg['radius'] if protocol_cfg and protocol_cfg.get('radius') else DEFAULT_ETA_RADIUS
    if not beta > 0:
        raise ConfigError("eta-map needs a positive beta")

    coherent = coherent_field(gamma, beta=beta)
    baseline = baseline_field(beta)
    nodes = [(w, g) for w in values(model_cfg['omega']) for g in values(model_cfg['g'])]

    def row(node):
        omega0, g0 = node
        try:
            report = cycles.eta_geom(Disk(node, radius), coherent, baseline, tolerance=numeric['tolerance'],
                                     radial=numeric['radial'], angular=numeric['angular'])
            direct, w_coh, w_pop = report.eta, report.w_coh, report.w_pop
        except ZeroBaseline:
            direct = w_coh = w_pop = NAN
        try:
            local = cycles.local_eta(omega0, g0, coherent, baseline)
        except ZeroBaseline:
            local = NAN
        closed = cycles.small_cycle_eta(omega0, g0, gamma, beta) if gamma > 0 else NAN
        return omega0, g0, direct, local, float(closed), w_coh, w_pop

    table = ResultTable(
        command='eta-map',
        columns=['omega', 'g', 'eta_direct', 'eta_local', 'eta_small_cycle', 'w_coh', 'w_pop'],
        metadata={'radius': repr(float(radius)), 'fields': f"{coherent.mode},{baseline.mode}"},
    )
    for values_ in parallel_map(row, nodes, run.threads):
        table.add_row(*values_)
    run.emit(table, plot=_map_plot('eta_direct'))
