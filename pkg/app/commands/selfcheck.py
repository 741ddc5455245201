"""
End-to-end invariant suite: steady-state oracle, coherent curvature, Stokes,
symmetry cancellation, thermal exactness, and the stochastic checks
(path independence, Monte Carlo / Fokker-Planck / tilted agreement,
seed determinism).
"""
import logging
import time

import click
import numpy as np
from flask import current_app

from app.commands import bp
from app.models.control import qubit_coherent_model, qubit_thermal_model
from app.models.protocol import Protocol
from app.models.stochastic import ControlSDE
from app.models.table import ResultTable
from app.physics import cycles
from app.physics.geometry import baseline_field, coherent_curvature_density, coherent_field, curvature_fd, free_energy
from app.physics.quantum_core import (
    analytic_ness_bloch,
    bloch_from_density,
    build_hamiltonian,
    build_liouvillian,
    fixed_basis_terms,
    stationary_state,
)
from app.stochastic.connections import ConstantConnection, ThermalConnection
from app.stochastic.fokker_planck import GridSpec, fokker_planck_solve, tilted_evolve
from app.stochastic.sde import ensemble, path_independence_residuals
from app.utils.errors import SelfcheckFailed, handle_failures
from app.utils.output import config_hash, write_table

logger = logging.getLogger(__name__)

CHECK_SEED = 20240917
GRID = np.linspace(-2.0, 2.0, 41)


def check_ness_oracle():
    worst = 0.0
    for rates in ((1.0, 0.0), (1.0, 0.3)):
        for omega in GRID:
            for g in GRID:
                rho = stationary_state(build_liouvillian(build_hamiltonian(omega, g), fixed_basis_terms(*rates)))
                numeric = bloch_from_density(rho).as_array()
                exact = analytic_ness_bloch(omega, g, *rates).as_array()
                worst = max(worst, float(np.max(np.abs(numeric - exact))))
    return worst, 1e-10


def check_coherent_curvature():
    model = qubit_coherent_model(1.0, 0.0)
    worst = 0.0
    peak = float(np.max(np.abs(coherent_curvature_density(*np.meshgrid(GRID, GRID), 1.0, 1.0))))
    for omega in GRID:
        for g in GRID:
            exact = float(coherent_curvature_density(omega, g, 1.0, 1.0))
            numeric = curvature_fd(model, (omega, g), richardson=True)
            worst = max(worst, abs(numeric - exact) / max(abs(exact), 1e-3 * peak))
    return worst, 1e-4


def check_stokes():
    model = qubit_coherent_model(1.0, 0.0)
    result = cycles.stokes_check(model, Protocol.circle((1.0, 1.0), 0.5), coherent_field(1.0, p=1.0))
    return result.stokes_gap / max(1.0, abs(result.w_line)), 1e-6


def check_symmetry():
    model = qubit_coherent_model(1.0, 0.0)
    loop = Protocol.circle((1.0, 0.0), 0.5)
    w_line = cycles.line_integral_work(model, loop)
    report = cycles.eta_geom(loop, coherent_field(1.0, beta=1.0), baseline_field(1.0))
    return max(abs(w_line), abs(report.w_coh), abs(report.eta)), 1e-10


def check_thermal_exactness():
    beta = 1.0
    model = qubit_thermal_model(beta=beta)
    closed = abs(cycles.line_integral_work(model, Protocol.circle((1.0, 0.5), 0.5)))
    a, b = np.array([0.5, 0.2]), np.array([1.5, 1.0])
    open_work = cycles.line_integral_work(model, Protocol.polyline([a, (1.5, 0.2), b]))
    expected = free_energy(b[0], b[1], beta) - free_energy(a[0], a[1], beta)
    return max(closed, abs(open_work - expected)), 1e-8


def check_path_independence():
    connection = ThermalConnection(1.0)
    sde = ControlSDE.isotropic(0.1, (1.0, 0.5))
    works = ensemble(sde, connection, 0.5, 1e-3, 200, CHECK_SEED)
    return float(np.max(np.abs(path_independence_residuals(works, connection.potential)))), 1e-3


def check_stochastic_triangle():
    """
    Unit constant A along an axis and off it, D = 1/2, t = 1:
    Var W = 2 D |A|^2 t and Z(chi) = exp(chi^2 D |A|^2 t)
    """
    diffusion, t_final, chi = 0.5, 1.0, 0.5
    sde = ControlSDE.isotropic(diffusion, (0.0, 0.0))
    expected = 2.0 * diffusion * t_final

    worst = 0.0
    for vector in ((1.0, 0.0), (0.6, 0.8)):
        connection = ConstantConnection(vector)
        works = ensemble(sde, connection, t_final, 1e-2, 20000, CHECK_SEED)
        mc = abs(works.variance - expected) / works.variance_error / 3.0

        grid = GridSpec.auto(sde, connection, t_final, h=0.25)
        fp = abs(fokker_planck_solve(sde, connection, grid, t_final).var_w[-1] - expected) / expected / 0.02

        tilted_grid = GridSpec.auto(sde, connection, t_final, chi=chi)
        mgf = tilted_evolve(sde, connection, chi, tilted_grid, t_final).final_integral
        tilt = abs(mgf / np.exp(chi ** 2 * diffusion * t_final) - 1.0) / 0.02
        worst = max(worst, mc, fp, tilt)
    return worst, 1.0


def check_determinism():
    connection = ConstantConnection((1.0, -0.5))
    sde = ControlSDE.isotropic(0.3, (0.0, 0.0))
    one = ensemble(sde, connection, 0.2, 1e-2, 300, CHECK_SEED, threads=1, chunk_size=300)
    two = ensemble(sde, connection, 0.2, 1e-2, 300, CHECK_SEED, threads=2, chunk_size=37)
    return float(np.max(np.abs(one.work - two.work))), 0.0


CHECKS = (
    ("ness_oracle", check_ness_oracle),
    ("coherent_curvature", check_coherent_curvature),
    ("stokes", check_stokes),
    ("symmetry_cancellation", check_symmetry),
    ("thermal_exactness", check_thermal_exactness),
    ("path_independence", check_path_independence),
    ("stochastic_triangle", check_stochastic_triangle),
    ("determinism", check_determinism),
)


def run_checks(checks=CHECKS):
    """(name, value, limit, passed, seconds) per check; a raised error counts as a failure"""
    results = []
    for name, check in checks:
        started = time.perf_counter()
        try:
            value, limit = check()
            passed = bool(value <= limit)
        except Exception as err:
            logger.error(f"{name} raised {type(err).__name__}: {err}")
            value, limit, passed = float('nan'), float('nan'), False
        elapsed = time.perf_counter() - started
        logger.info(f"{name}: {value:.3e} (limit {limit:.1e}) {'ok' if passed else 'FAILED'} in {elapsed:.2f}s")
        results.append((name, value, limit, passed, elapsed))
    return results


@bp.cli.command('selfcheck')
@click.option('--out', 'out_dir', default=None, help='Output directory for the report table')
@handle_failures
def selfcheck(out_dir):
    """Run the invariant suite; exit 3 when any check fails"""
    results = run_checks()
    table = ResultTable(
        command='selfcheck',
        columns=['check', 'value', 'limit', 'passed'],
        metadata={
            'config_hash': config_hash({"checks": [name for name, _ in CHECKS], "seed": CHECK_SEED}),
            'tool_version': current_app.config['TOOL_VERSION'],
            'seed': CHECK_SEED,
        },
    )
    for name, value, limit, passed, _ in results:
        table.add_row(name, value, limit, passed)
        click.echo(f"{'PASS' if passed else 'FAIL'}  {name}  {value:.3e}")
    if out_dir:
        write_table(table, out_dir)

    failed = [name for name, _, _, passed, _ in results if not passed]
    if failed:
        raise SelfcheckFailed(f"{len(failed)} check(s) failed: {', '.join(failed)}")
    click.echo("selfcheck passed")
