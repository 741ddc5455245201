import math
import os

import numpy as np
import pytest

from app.commands import selfcheck as selfcheck_module
from app.physics.cycles import small_cycle_eta
from app.utils.output import read_table

COHERENT_LOOP = {
    "command": "cycle-work",
    "model": {"mode": "coherent", "gamma_down": 1.0, "gamma_up": 0.0, "beta": 1.0},
    "protocol": {"family": "circle", "center": [1.0, 1.0], "radius": 0.5},
    "numeric": {"nodes": 64, "tolerance": 1e-7},
}

CONSTANT_ENSEMBLE = {
    "stochastic": {"connection": "constant", "vector": [1.0, 0.0], "diffusion": 0.5, "start": [0.0, 0.0]},
    "numeric": {"t_final": 0.5, "dt": 0.01, "samples": 400, "seed": 7, "chi": 0.5},
    "grid": {"h": 0.25},
}


def _invoke(runner, name, config_path, out_dir, *extra):
    return runner.invoke(args=[name, "--config", config_path, "--out", str(out_dir), *extra])


def _row(path):
    metadata, columns, rows = read_table(path)
    return metadata, dict(zip(columns, rows[0]))


def test_cycle_work_writes_consistent_tables(runner, write_config, tmp_path):
    out = tmp_path / "out"
    result = _invoke(runner, "cycle-work", write_config(COHERENT_LOOP), out)
    assert result.exit_code == 0, result.output
    assert "cycle-work.csv" in result.output

    metadata, row = _row(out / "cycle-work.csv")
    assert metadata["command"] == "cycle-work"
    assert metadata["surface_field"] == "coherent-closed-form"
    assert row["stokes_gap"] < 1e-6
    assert row["first_law_residual"] < 1e-12
    assert abs(row["total_u"]) < 1e-12
    assert row["eta"] == pytest.approx(row["w_coh"] / row["w_pop"])
    for name in ("cycle-work-trace.csv", "cycle-work-trace.gp", "cycle-work-line.csv"):
        assert (out / name).exists()

    _, columns, rows = read_table(out / "cycle-work-finite-rate.csv")
    assert [r[columns.index("period")] for r in rows] == [10.0, 20.0, 40.0, 80.0]
    excess = columns.index("w_excess")
    assert rows[0][excess] == pytest.approx(2.0 * rows[1][excess])


def test_reversed_loop_flips_the_sign(runner, write_config, tmp_path):
    reverse = dict(COHERENT_LOOP, protocol=dict(COHERENT_LOOP["protocol"], reverse=True))
    assert _invoke(runner, "cycle-work", write_config(COHERENT_LOOP, "a.json"), tmp_path / "a").exit_code == 0
    assert _invoke(runner, "cycle-work", write_config(reverse, "b.json"), tmp_path / "b").exit_code == 0
    _, forward = _row(tmp_path / "a" / "cycle-work.csv")
    _, backward = _row(tmp_path / "b" / "cycle-work.csv")
    assert backward["w_line"] == pytest.approx(-forward["w_line"], rel=1e-9)
    assert backward["w_surface"] == pytest.approx(-forward["w_surface"], rel=1e-9)


def test_thermal_cycle_uses_the_zero_field(runner, write_config, tmp_path):
    config = {
        "command": "cycle-work",
        "model": {"mode": "thermal", "beta": 2.0},
        "protocol": {"family": "offset-ellipse", "center": [1.0, 0.5], "a": 0.4, "b": 0.2},
        "numeric": {"nodes": 64},
    }
    result = _invoke(runner, "cycle-work", write_config(config), tmp_path)
    assert result.exit_code == 0, result.output
    metadata, row = _row(tmp_path / "cycle-work.csv")
    assert metadata["surface_field"] == "zero"
    assert abs(row["w_line"]) < 1e-8
    assert math.isnan(row["eta"])


def test_curvature_map_matches_closed_form(runner, write_config, tmp_path):
    config = {
        "command": "curvature-map",
        "model": {"mode": "coherent", "gamma": 1.0, "p": 1.0, "beta": 1.0,
                  "omega": {"start": -1.0, "stop": 1.0, "num": 3}, "g": {"start": 0.5, "stop": 1.5, "num": 3}},
    }
    result = _invoke(runner, "curvature-map", write_config(config), tmp_path)
    assert result.exit_code == 0, result.output
    _, columns, rows = read_table(tmp_path / "curvature-map.csv")
    assert len(rows) == 9
    fd, closed = columns.index("curvature_fd"), columns.index("curvature_coherent")
    for row in rows:
        assert row[fd] == pytest.approx(row[closed], rel=1e-4, abs=1e-8)
    assert (tmp_path / "curvature-map.gp").exists()


def test_radius_sweep_normalization(runner, write_config, tmp_path):
    config = {
        "command": "radius-sweep",
        "numeric": {"betas": [1.0, 2.0], "radii": {"start": 0.5, "stop": 20.0, "num": 4}},
    }
    result = _invoke(runner, "radius-sweep", write_config(config), tmp_path)
    assert result.exit_code == 0, result.output
    metadata, columns, rows = read_table(tmp_path / "radius-sweep.csv")
    assert len(rows) == 8
    beta_w = columns.index("beta_w_inf")
    for row in rows:
        assert row[beta_w] == pytest.approx(2.0 * np.pi * np.log(2.0), rel=1e-6)
    assert "beta=1.0" in metadata["saturation_0.9"]


def test_phase_sweep_fit(runner, write_config, tmp_path):
    config = {
        "command": "phase-sweep",
        "model": {"mode": "thermal", "gamma": 1.0},
        "protocol": {"family": "temperature-modulated", "center": [1.0, 0.5], "a": 0.6, "b": 0.3,
                     "T0": 1.0, "delta_T": 0.1},
        "numeric": {"phases": 4, "nodes": 32},
    }
    result = _invoke(runner, "phase-sweep", write_config(config), tmp_path)
    assert result.exit_code == 0, result.output
    metadata, columns, rows = read_table(tmp_path / "phase-sweep.csv")
    assert len(rows) == 4
    assert rows[0][columns.index("phase")] == 0.0
    assert float(metadata["amplitude"]) > 0.0


def test_eta_map_small_cycles(runner, write_config, tmp_path):
    config = {
        "command": "eta-map",
        "model": {"mode": "coherent", "gamma": 1.0, "beta": 1.0,
                  "omega": {"start": 0.5, "stop": 1.0, "num": 2}, "g": {"start": 0.5, "stop": 1.5, "num": 2}},
    }
    result = _invoke(runner, "eta-map", write_config(config), tmp_path)
    assert result.exit_code == 0, result.output
    metadata, columns, rows = read_table(tmp_path / "eta-map.csv")
    assert metadata["radius"] == "0.05"
    for row in rows:
        record = dict(zip(columns, row))
        expected = small_cycle_eta(record["omega"], record["g"], 1.0, 1.0)
        assert record["eta_small_cycle"] == pytest.approx(expected)
        assert record["eta_direct"] == pytest.approx(expected, rel=0.02)


def test_sde_ensemble_summary(runner, write_config, tmp_path):
    result = _invoke(runner, "sde-ensemble", write_config(CONSTANT_ENSEMBLE), tmp_path)
    assert result.exit_code == 0, result.output
    metadata, row = _row(tmp_path / "sde-ensemble.csv")
    assert metadata["seed"] == "7"
    assert row["samples"] == 400
    assert row["var_closed_form"] == pytest.approx(0.5)
    assert abs(row["var_w"] - 0.5) < 4 * row["var_error"]
    assert row["max_path_residual"] < 1e-12
    assert (tmp_path / "sde-ensemble-histogram.csv").exists()


def test_seeded_runs_are_byte_identical(runner, write_config, tmp_path):
    path = write_config(CONSTANT_ENSEMBLE)
    assert _invoke(runner, "sde-ensemble", path, tmp_path / "one", "--threads", "1").exit_code == 0
    assert _invoke(runner, "sde-ensemble", path, tmp_path / "two", "--threads", "2").exit_code == 0
    for name in ("sde-ensemble.csv", "sde-ensemble-histogram.csv"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_seed_flag_overrides_the_config(runner, write_config, tmp_path):
    path = write_config(CONSTANT_ENSEMBLE)
    assert _invoke(runner, "sde-ensemble", path, tmp_path / "a").exit_code == 0
    assert _invoke(runner, "sde-ensemble", path, tmp_path / "b", "--seed", "8").exit_code == 0
    metadata, _ = _row(tmp_path / "b" / "sde-ensemble.csv")
    assert metadata["seed"] == "8"
    assert (tmp_path / "a" / "sde-ensemble.csv").read_bytes() != (tmp_path / "b" / "sde-ensemble.csv").read_bytes()


def test_fp_solve_outputs(runner, write_config, tmp_path):
    result = _invoke(runner, "fp-solve", write_config(CONSTANT_ENSEMBLE), tmp_path)
    assert result.exit_code == 0, result.output
    _, columns, rows = read_table(tmp_path / "fp-solve.csv")
    assert rows[-1][columns.index("t")] == pytest.approx(0.5)
    assert rows[-1][columns.index("var_w")] == pytest.approx(0.5, rel=0.02)
    metadata, columns, rows = read_table(tmp_path / "fp-solve-tilted.csv")
    assert rows[-1][columns.index("integral")] == pytest.approx(float(metadata["closed_form_final"]), rel=0.02)
    assert (tmp_path / "fp-solve-marginal.csv").exists()


def test_jarzynski_on_a_pinned_bridge(runner, write_config, tmp_path):
    config = {
        "command": "jarzynski",
        "model": {"mode": "thermal", "beta": 1.0},
        "stochastic": {"connection": "thermal", "diffusion": 0.05, "start": [0.5, 0.2], "end": [1.5, 1.0],
                       "bridge": True},
        "numeric": {"t_final": 1.0, "dt": 0.001, "samples": 400, "seed": 11},
    }
    result = _invoke(runner, "jarzynski", write_config(config), tmp_path)
    assert result.exit_code == 0, result.output
    metadata, row = _row(tmp_path / "jarzynski.csv")
    assert row["samples"] == 400
    assert metadata["passes"] == "true"
    assert float(metadata["allowance"]) == 0.0
    assert row["bias"] == pytest.approx(float(metadata["half_step_bias"]))


def test_invalid_config_exits_with_validation_code(runner, write_config, tmp_path):
    text = '{\n  "command": "cycle-work",\n  "model": {"mode": "coherent", "p": 2.0},\n' \
           '  "protocol": {"family": "circle", "radius": 0.5}\n}'
    result = _invoke(runner, "cycle-work", write_config(text), tmp_path)
    assert result.exit_code == 1
    assert "line 3: model.p" in result.output


def test_missing_config_file_is_a_validation_failure(runner, tmp_path):
    result = _invoke(runner, "cycle-work", str(tmp_path / "absent.json"), tmp_path)
    assert result.exit_code == 1


def test_grid_solver_rejects_bridges(runner, write_config, tmp_path):
    config = {
        "stochastic": dict(CONSTANT_ENSEMBLE["stochastic"], end=[1.0, 0.0], bridge=True),
        "numeric": {"seed": 1},
    }
    assert _invoke(runner, "fp-solve", write_config(config), tmp_path).exit_code == 1


def test_numerical_failure_exits_with_code_two(runner, write_config, tmp_path):
    config = {
        "command": "sde-ensemble",
        "stochastic": {"connection": "constant", "vector": [1.0, 0.0], "diffusion": 1.0, "start": [0.0, 0.0],
                       "bounds": [[-0.01, -0.01], [0.01, 0.01]], "boundary": "reject"},
        "numeric": {"t_final": 0.5, "dt": 0.01, "samples": 20, "seed": 1},
    }
    result = _invoke(runner, "sde-ensemble", write_config(config), tmp_path)
    assert result.exit_code == 2
    assert "DomainExit" in result.output


def test_thermal_curvature_map_without_beta_is_a_config_error(runner, write_config, tmp_path):
    config = {
        "command": "curvature-map",
        "model": {"mode": "thermal", "omega": {"start": 0.0, "stop": 1.0, "num": 2},
                  "g": {"start": 0.0, "stop": 1.0, "num": 2}},
    }
    result = _invoke(runner, "curvature-map", write_config(config), tmp_path)
    assert result.exit_code == 1
    assert "model.beta or model.temperature" in result.output


def test_jarzynski_at_infinite_temperature(runner, write_config, tmp_path):
    config = {
        "command": "jarzynski",
        "model": {"mode": "thermal", "beta": 0.0},
        "stochastic": {"connection": "thermal", "diffusion": 0.05, "start": [0.5, 0.2], "end": [1.5, 1.0],
                       "bridge": True},
        "numeric": {"t_final": 1.0, "dt": 0.01, "samples": 50, "seed": 3},
    }
    result = _invoke(runner, "jarzynski", write_config(config), tmp_path)
    assert result.exit_code == 0, result.output
    metadata, row = _row(tmp_path / "jarzynski.csv")
    assert row["estimate"] == 1.0
    assert row["mean_w"] == 0.0
    assert metadata["passes"] == "true"


def test_nothing_written_on_failure(runner, write_config, tmp_path):
    out = tmp_path / "out"
    _invoke(runner, "cycle-work", write_config({"command": "cycle-work"}), out)
    assert not os.path.exists(out)


@pytest.mark.parametrize("check", [
    selfcheck_module.check_ness_oracle,
    selfcheck_module.check_stokes,
    selfcheck_module.check_symmetry,
    selfcheck_module.check_thermal_exactness,
    selfcheck_module.check_path_independence,
    selfcheck_module.check_determinism,
])
def test_selfcheck_items_pass(check):
    value, limit = check()
    assert value <= limit


def test_run_checks_counts_errors_as_failures():
    def broken():
        raise RuntimeError("boom")

    results = selfcheck_module.run_checks((("ok", lambda: (0.0, 1.0)), ("broken", broken)))
    assert [r[3] for r in results] == [True, False]
    assert math.isnan(results[1][1])


def test_selfcheck_failure_exit_code(runner, monkeypatch, tmp_path):
    monkeypatch.setattr(selfcheck_module, "run_checks", lambda: [("stub", 1.0, 0.5, False, 0.0)])
    result = runner.invoke(args=["selfcheck", "--out", str(tmp_path)])
    assert result.exit_code == 3
    assert "FAIL  stub" in result.output
    assert (tmp_path / "selfcheck.csv").exists()


def test_selfcheck_success(runner, monkeypatch):
    monkeypatch.setattr(selfcheck_module, "run_checks", lambda: [("stub", 0.0, 0.5, True, 0.0)])
    result = runner.invoke(args=["selfcheck"])
    assert result.exit_code == 0
    assert "selfcheck passed" in result.output
