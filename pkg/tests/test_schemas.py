import pytest

from app.schemas.schema import RunConfigSchema, describe_errors, parse_run_config
from app.utils.errors import EXIT_VALIDATION, ConfigError

CYCLE = """{
  "command": "cycle-work",
  "model": {"mode": "coherent", "gamma_down": 1.0, "gamma_up": 0.0},
  "protocol": {"family": "circle", "center": [1.0, 1.0], "radius": 0.5}
}"""


def test_defaults_are_filled_in():
    config = parse_run_config(CYCLE)
    assert config["numeric"]["nodes"] == 256
    assert config["numeric"]["tolerance"] == 1e-8
    assert config["output"]["plot_script"] is True
    assert config["protocol"]["reverse"] is False
    assert config["model"]["detailed_balance"] is False


def test_field_error_names_its_line():
    text = """{
  "command": "cycle-work",
  "model": {
    "mode": "coherent",
    "p": 2.0
  },
  "protocol": {"family": "circle", "radius": 0.5}
}"""
    with pytest.raises(ConfigError) as err:
        parse_run_config(text)
    assert str(err.value).startswith("line 5: model.p:")
    assert err.value.exit_code == EXIT_VALIDATION
    assert "p" in err.value.messages["model"]


def test_shape_error_points_at_the_block():
    text = """{
  "command": "cycle-work",
  "model": {"mode": "thermal", "beta": 1.0},
  "protocol": {"family": "circle"}
}"""
    with pytest.raises(ConfigError) as err:
        parse_run_config(text)
    assert "line 4: protocol.radius: circle needs a radius" in str(err.value)


def test_malformed_json_reports_line_and_column():
    with pytest.raises(ConfigError) as err:
        parse_run_config('{\n  "command": "cycle-work",\n  "model": ,\n}')
    assert str(err.value).startswith("line 3, column")


def test_document_must_be_an_object():
    with pytest.raises(ConfigError):
        parse_run_config("[1, 2]")


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError) as err:
        parse_run_config(CYCLE.replace('"radius": 0.5', '"radius": 0.5, "radios": 1'))
    assert "protocol.radios" in str(err.value)


def test_command_defaults_to_the_invoker_and_must_match():
    text = CYCLE.replace('"command": "cycle-work",\n', "")
    assert parse_run_config(text, command="cycle-work")["command"] == "cycle-work"
    with pytest.raises(ConfigError):
        parse_run_config(CYCLE, command="eta-map")


def test_seeded_commands_need_a_seed():
    text = """{
  "command": "sde-ensemble",
  "stochastic": {"connection": "constant", "vector": [1.0, 0.0], "diffusion": 0.5, "start": [0.0, 0.0]}
}"""
    with pytest.raises(ConfigError) as err:
        parse_run_config(text)
    assert "numeric.seed" in str(err.value)
    config = parse_run_config(text, seed=2 ** 64 - 1, tolerance=1e-6)
    assert config["numeric"]["seed"] == 2 ** 64 - 1
    assert config["numeric"]["tolerance"] == 1e-6


def test_seed_range_is_enforced():
    with pytest.raises(ConfigError):
        parse_run_config(CYCLE, seed=-1)


@pytest.mark.parametrize("model, field", [
    ({"mode": "thermal", "p": 0.5}, "mode"),
    ({"mode": "coherent", "gamma_down": 1.0, "p": 0.5}, "p"),
    ({"mode": "coherent", "detailed_balance": True}, "detailed_balance"),
    ({"mode": "coherent", "beta": 1.0, "temperature": 1.0}, "temperature"),
    ({"mode": "quantum"}, "mode"),
])
def test_model_rate_rules(model, field):
    document = {
        "command": "cycle-work",
        "model": model,
        "protocol": {"family": "circle", "radius": 0.5},
    }
    errors = RunConfigSchema().validate(document)
    assert field in errors["model"]


@pytest.mark.parametrize("document, block", [
    ({"command": "cycle-work", "model": {"mode": "thermal", "beta": 1.0}}, "protocol"),
    ({"command": "radius-sweep"}, "numeric"),
    ({"command": "eta-map", "model": {"mode": "coherent", "gamma": 1.0,
                                      "omega": {"start": 0, "stop": 1}, "g": {"start": 0, "stop": 1}}}, "model"),
    ({"command": "curvature-map", "model": {"mode": "thermal", "omega": {"start": 0, "stop": 1},
                                            "g": {"start": 0, "stop": 1}}}, "model"),
    ({"command": "phase-sweep", "protocol": {"family": "circle", "radius": 0.5}}, "protocol"),
    ({"command": "fp-solve"}, "stochastic"),
    ({"command": "fp-solve", "stochastic": {"connection": "thermal", "diffusion": 0.1, "start": [1.0, 0.5]}},
     "model"),
])
def test_commands_require_their_blocks(document, block):
    assert block in RunConfigSchema().validate(document)


def test_stochastic_block_rules():
    base = {"connection": "constant", "vector": [1.0, 0.0], "diffusion": 0.1, "start": [0.0, 0.0]}
    document = {"command": "fp-solve", "stochastic": dict(base, bridge=True)}
    assert "end" in RunConfigSchema().validate(document)["stochastic"]
    document = {"command": "fp-solve", "stochastic": dict(base, vector=[1.0])}
    assert "vector" in RunConfigSchema().validate(document)["stochastic"]
    document = {"command": "fp-solve", "stochastic": dict(base, bridge=True, end=[1.0, 0.0],
                                                          drift={"kind": "constant", "vector": [1.0, 0.0]})}
    assert "drift" in RunConfigSchema().validate(document)["stochastic"]


def test_describe_errors_without_a_matching_key():
    lines = describe_errors("{}", {"_schema": ["broken"]})
    assert lines == ["<root>: broken"]
