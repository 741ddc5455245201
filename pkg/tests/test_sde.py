import numpy as np
import pytest

from app.models.control import qubit_thermal_model
from app.models.stochastic import ControlSDE
from app.stochastic.connections import (
    CoherentConnection,
    ConstantConnection,
    ModelConnection,
    ThermalConnection,
    product_potential,
    product_potential_gradient,
)
from app.stochastic.sde import (
    constant_drift,
    derive_seed,
    ensemble,
    gauge_shift_experiment,
    path_independence_residuals,
    rotation_drift,
    simulate_trajectory,
    time_grid,
)
from app.utils.errors import DimensionMismatch, DomainExit

SEED = 20240917


def test_derived_seeds_are_stable_and_distinct():
    assert derive_seed(SEED, 3) == derive_seed(SEED, 3)
    seeds = {derive_seed(SEED, i) for i in range(100)}
    assert len(seeds) == 100
    assert derive_seed(SEED, 0) != derive_seed(SEED + 1, 0)


def test_time_grid_hits_the_final_time():
    steps, dt = time_grid(1.0, 0.003)
    assert steps * dt == pytest.approx(1.0)
    with pytest.raises(ValueError):
        time_grid(1e-4, 1e-3)


def test_constant_connection_work_statistics():
    diffusion, t_final = 0.5, 1.0
    sde = ControlSDE.isotropic(diffusion, (0.0, 0.0))
    works = ensemble(sde, ConstantConnection((1.0, 0.0)), t_final, 1e-2, 4000, SEED)
    assert len(works) == 4000
    assert abs(works.mean) < 4 * works.mean_error
    assert abs(works.variance - 2.0 * diffusion * t_final) < 4 * works.variance_error


def test_constant_drift_shifts_the_mean():
    sde = ControlSDE.isotropic(0.1, (0.0, 0.0), drift=constant_drift((1.0, 0.0)))
    works = ensemble(sde, ConstantConnection((2.0, 0.0)), 1.0, 1e-2, 2000, SEED)
    assert works.mean == pytest.approx(2.0, abs=4 * works.mean_error)


def test_exact_connection_work_is_path_independent():
    connection = ThermalConnection(1.0)
    works = ensemble(ControlSDE.isotropic(0.1, (1.0, 0.5)), connection, 0.5, 1e-3, 200, SEED)
    assert np.max(np.abs(path_independence_residuals(works, connection.potential))) < 1e-3


def test_results_do_not_depend_on_threads_or_chunks():
    connection = ConstantConnection((1.0, -0.5))
    sde = ControlSDE.isotropic(0.3, (0.0, 0.0))
    one = ensemble(sde, connection, 0.2, 1e-2, 300, SEED, threads=1, chunk_size=300)
    two = ensemble(sde, connection, 0.2, 1e-2, 300, SEED, threads=2, chunk_size=37)
    np.testing.assert_array_equal(one.work, two.work)
    np.testing.assert_array_equal(one.seeds, two.seeds)


def test_single_trajectory_matches_its_ensemble_slot():
    connection = CoherentConnection(1.0, 1.0)
    sde = ControlSDE.isotropic(0.2, (1.0, 1.0))
    works = ensemble(sde, connection, 0.3, 1e-2, 5, SEED)
    trajectory = simulate_trajectory(sde, connection, 0.3, 1e-2, derive_seed(SEED, 2))
    assert trajectory.path.shape == (31, 2)
    assert trajectory.work[0] == 0.0
    assert trajectory.final_work == pytest.approx(works.work[2], rel=1e-12, abs=1e-15)
    np.testing.assert_allclose(trajectory.end, works.ends[2], rtol=1e-12)


def test_reflecting_box_keeps_paths_inside():
    bounds = (np.array([-0.2, -0.2]), np.array([0.2, 0.2]))
    sde = ControlSDE.isotropic(0.5, (0.0, 0.0), bounds=bounds)
    works = ensemble(sde, ConstantConnection((1.0, 1.0)), 1.0, 1e-2, 200, SEED)
    assert works.rejected == 0
    assert np.all(works.ends >= -0.2) and np.all(works.ends <= 0.2)
    # with a constant A the work is still A . (end - start)
    np.testing.assert_allclose(works.work, works.ends.sum(axis=1), atol=1e-12)


def test_absorbing_box_rejects_and_counts():
    bounds = (np.array([-0.2, -0.2]), np.array([0.2, 0.2]))
    sde = ControlSDE.isotropic(0.01, (0.0, 0.0), bounds=bounds, boundary=ControlSDE.REJECT)
    works = ensemble(sde, ConstantConnection((1.0, 1.0)), 1.0, 1e-2, 200, SEED)
    assert works.rejected > 0
    assert len(works) + works.rejected == 200


def test_domain_exit_on_model_chart():
    connection = ModelConnection(qubit_thermal_model())
    sde = ControlSDE.isotropic(0.01, (1.0, 0.5, 0.05), drift=constant_drift((0.0, 0.0, -1.0)))
    with pytest.raises(DomainExit):
        simulate_trajectory(sde, connection, 1.0, 1e-2, derive_seed(SEED, 0))


def test_bridge_lands_on_the_end_point():
    sde = ControlSDE.bridge(0.2, (0.0, 0.0), (1.0, 0.5), 1.0)
    works = ensemble(sde, ConstantConnection((1.0, 2.0)), 1.0, 1e-2, 100, SEED)
    np.testing.assert_array_equal(works.ends, np.tile([1.0, 0.5], (100, 1)))
    np.testing.assert_allclose(works.work, 2.0, atol=1e-12)


def test_rotation_drift_circulates():
    drift = rotation_drift((0.0, 0.0), 2.0)
    np.testing.assert_allclose(drift(np.array([[1.0, 0.0]]), 0.0), [[0.0, 2.0]])


def test_dimension_mismatch_is_reported():
    with pytest.raises(DimensionMismatch):
        ensemble(ControlSDE.isotropic(0.1, (0.0, 0.0, 0.0)), ConstantConnection((1.0, 0.0)), 0.1, 1e-2, 10, SEED)


def test_sde_validation():
    with pytest.raises(ValueError):
        ControlSDE(start=(0.0, 0.0))
    with pytest.raises(ValueError):
        ControlSDE.isotropic(0.1, (1.0, 0.0), bounds=((-0.5, -0.5), (0.5, 0.5)))
    with pytest.raises(ValueError):
        ControlSDE.isotropic(0.1, (0.0, 0.0), boundary="wrap")


def test_gauge_shift_leaves_loops_and_moves_open_paths():
    base = CoherentConnection(1.0, 1.0)
    closed = ControlSDE.bridge(0.1, (1.0, 1.0), (1.0, 1.0), 0.5)
    open_ = ControlSDE.isotropic(0.1, (1.0, 1.0))
    report = gauge_shift_experiment(base, product_potential, closed, open_, 0.5, 1e-2, 100, SEED,
                                    grad_phi=product_potential_gradient)
    assert report.closed_max_shift < 1e-10
    assert report.open_max_deviation < 1e-10
    assert report.open_mean_shift == pytest.approx(report.open_expected_shift, abs=1e-10)


def test_histogram_is_normalized():
    works = ensemble(ControlSDE.isotropic(0.5, (0.0, 0.0)), ConstantConnection((1.0, 0.0)), 1.0, 1e-2, 500, SEED)
    centers, density = works.histogram(20)
    assert len(centers) == 20
    assert np.sum(density) * (centers[1] - centers[0]) == pytest.approx(1.0)
