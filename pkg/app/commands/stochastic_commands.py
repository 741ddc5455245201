import logging

import numpy as np

from app.commands.common import Run, build_connection, build_sde, command, model_beta
from app.models.table import ResultTable
from app.stochastic.connections import ConstantConnection
from app.stochastic.fokker_planck import GridSpec, fokker_planck_solve, tilted_evolve
from app.stochastic.jarzynski import jarzynski_check
from app.stochastic.sde import ensemble, path_independence_residuals
from app.utils.errors import ConfigError

logger = logging.getLogger(__name__)

NAN = float('nan')


def _constant_benchmark(connection, stochastic_cfg, t_final):
    """(mean, variance) of W in closed form when A and the drift are constant and paths are free"""
    if not isinstance(connection, ConstantConnection) or stochastic_cfg['bridge'] or stochastic_cfg.get('bounds'):
        return NAN, NAN
    drift_cfg = stochastic_cfg['drift']
    if drift_cfg['kind'] == 'rotation':
        return NAN, NAN
    a = connection.vector
    v = np.asarray(drift_cfg['vector'], dtype=float) if drift_cfg['kind'] == 'constant' else np.zeros_like(a)
    return float(a @ v) * t_final, 2.0 * stochastic_cfg['diffusion'] * float(a @ a) * t_final


def _histogram_table(command, centers, density):
    table = ResultTable(command=command, columns=['w', 'density'], units=['energy', '1/energy'])
    for w, p in zip(centers, density):
        table.add_row(w, p)
    return table


def _potential(connection):
    return connection.potential if connection.exact else None


@command('sde-ensemble')
def sde_ensemble(config_path, out_dir, seed, tolerance, threads):
    """Monte Carlo work statistics of a control-space SDE"""
    run = Run('sde-ensemble', config_path, out_dir, seed, tolerance, threads)
    numeric = run.numeric
    stochastic_cfg = run.config['stochastic']
    t_final = numeric['t_final']
    connection = build_connection(stochastic_cfg, run.config.get('model'))
    sde = build_sde(stochastic_cfg, t_final)

    works = ensemble(sde, connection, t_final, numeric['dt'], numeric['samples'], run.seed, threads=run.threads)
    mean_cf, var_cf = _constant_benchmark(connection, stochastic_cfg, t_final)
    potential = _potential(connection)
    path_residual = NAN
    if potential is not None:
        path_residual = float(np.max(np.abs(path_independence_residuals(works, potential))))

    table = ResultTable(
        command='sde-ensemble',
        columns=['samples', 'rejected', 'mean_w', 'mean_error', 'var_w', 'var_error', 'skewness',
                 'mean_closed_form', 'var_closed_form', 'max_path_residual'],
        metadata={'connection': connection.label, 'sde': sde.label, 'dt': repr(works.dt)},
    )
    table.add_row(len(works), works.rejected, works.mean, works.mean_error, works.variance, works.variance_error,
                  works.skewness, mean_cf, var_cf, path_residual)
    run.emit(table)

    centers, density = works.histogram(run.config['output']['histogram_bins'])
    run.emit(_histogram_table('sde-ensemble', centers, density), name='sde-ensemble-histogram',
             plot=('w', ['density'], 'histeps'))


@command('fp-solve')
def fp_solve(config_path, out_dir, seed, tolerance, threads):
    """Joint (lambda, W) density on a grid, its moment trace and, for chi != 0, the tilted field"""
    run = Run('fp-solve', config_path, out_dir, seed, tolerance, threads)
    numeric = run.numeric
    stochastic_cfg = run.config['stochastic']
    t_final = numeric['t_final']
    if stochastic_cfg['bridge']:
        raise ConfigError("the grid solvers need a time-independent drift; bridges are Monte Carlo only")
    if len(stochastic_cfg['start']) != 2:
        raise ConfigError("the grid solvers run on two control coordinates")
    connection = build_connection(stochastic_cfg, run.config.get('model'))
    sde = build_sde(stochastic_cfg, t_final)
    grid_cfg = run.config['grid']

    grid = GridSpec.auto(sde, connection, t_final, h=grid_cfg['h'], sigmas=grid_cfg['sigmas'])
    density = fokker_planck_solve(sde, connection, grid, t_final)
    mean_cf, var_cf = _constant_benchmark(connection, stochastic_cfg, t_final)

    trace = ResultTable(
        command='fp-solve',
        columns=['t', 'mass', 'leaked', 'mean_w', 'var_w', 'mean_drift_w'],
        metadata={
            'connection': connection.label,
            'grid': f"{grid.n}x{grid.n}x{grid.n_w} h={grid.h!r} h_w={grid.h_w!r}",
            'dt': repr(density.dt),
            'artificial_diffusion': repr(density.artificial_diffusion),
            'mean_closed_form': repr(mean_cf),
            'var_closed_form': repr(var_cf),
        },
    )
    for row in zip(density.times, density.mass, density.leaked, density.mean_w, density.var_w, density.mean_drift_w):
        trace.add_row(*row)
    run.emit(trace, plot=('t', ['mean_w', 'var_w']))

    marginal = density.w_marginal()
    run.emit(_histogram_table('fp-solve', density.w, marginal), name='fp-solve-marginal', plot=('w', ['density']))

    chi = numeric['chi']
    if chi != 0.0:
        tilted_grid = GridSpec.auto(sde, connection, t_final, h=grid_cfg['h'], chi=chi, sigmas=grid_cfg['sigmas'])
        tilted = tilted_evolve(sde, connection, chi, tilted_grid, t_final)
        closed = NAN
        if not np.isnan(var_cf):
            closed = float(np.exp(-chi * mean_cf + 0.5 * chi ** 2 * var_cf))
        table = ResultTable(
            command='fp-solve',
            columns=['t', 'integral'],
            metadata={'chi': repr(chi), 'dt': repr(tilted.dt), 'closed_form_final': repr(closed)},
        )
        for t, value in zip(tilted.times, tilted.integral):
            table.add_row(t, value)
        run.emit(table, name='fp-solve-tilted', plot=('t', ['integral']))


@command('jarzynski')
def jarzynski(config_path, out_dir, seed, tolerance, threads):
    """Exponential work average against exp(-beta dF)"""
    run = Run('jarzynski', config_path, out_dir, seed, tolerance, threads)
    numeric = run.numeric
    stochastic_cfg = run.config['stochastic']
    model_cfg = run.config.get('model') or {}
    t_final = numeric['t_final']
    connection = build_connection(stochastic_cfg, model_cfg)
    sde = build_sde(stochastic_cfg, t_final)

    beta = model_beta(model_cfg)
    if beta is None:
        raise ConfigError("jarzynski needs model.beta or model.temperature")

    works = ensemble(sde, connection, t_final, numeric['dt'], numeric['samples'], run.seed, threads=run.threads)
    refined = None
    if stochastic_cfg['half_step'] and connection.exact and beta != 0.0:
        refined = ensemble(sde, connection, t_final, 0.5 * numeric['dt'], numeric['samples'], run.seed,
                           threads=run.threads)
    report = jarzynski_check(works, beta, potential=_potential(connection), conditioned=stochastic_cfg['conditioned'],
                             allowance=stochastic_cfg['allowance'], refined=refined)

    table = ResultTable(
        command='jarzynski',
        columns=['samples', 'beta', 'estimate', 'target', 'standard_error', 'bias', 'z_score', 'mean_w'],
        metadata={
            'connection': connection.label,
            'conditioned': str(report.conditioned).lower(),
            'allowance': repr(report.allowance),
            'half_step_bias': repr(report.half_step_bias),
            'passes': str(report.passes()).lower() if not np.isnan(report.z_score) else 'n/a',
        },
    )
    table.add_row(report.samples, report.beta, report.estimate, report.target, report.standard_error, report.bias,
                  report.z_score, works.mean)
    run.emit(table)

    centers, density = works.histogram(run.config['output']['histogram_bins'])
    run.emit(_histogram_table('jarzynski', centers, density), name='jarzynski-histogram',
             plot=('w', ['density'], 'histeps'))
