import json

from marshmallow import Schema, ValidationError, fields, validate, validates_schema

from app.config import Config
from app.utils.errors import ConfigError

COMMANDS = (
    "curvature-map", "cycle-work", "radius-sweep", "phase-sweep", "eta-map",
    "sde-ensemble", "fp-solve", "jarzynski",
)
STOCHASTIC_COMMANDS = ("sde-ensemble", "fp-solve", "jarzynski")
SEEDED_COMMANDS = ("sde-ensemble", "jarzynski")
MAX_SEED = 2 ** 64 - 1


class RangeSchema(Schema):
    start = fields.Float(required=True)
    stop = fields.Float(required=True)
    num = fields.Int(load_default=21, validate=validate.Range(min=1, max=4001))


class ModelSchema(Schema):
    mode = fields.Str(required=True, validate=validate.OneOf(["thermal", "coherent", "generic"]))
    beta = fields.Float(allow_none=True, load_default=None, validate=validate.Range(min=0))
    temperature = fields.Float(allow_none=True, load_default=None, validate=validate.Range(min=0, min_inclusive=False))
    gamma = fields.Float(allow_none=True, load_default=None, validate=validate.Range(min=0))
    gamma_down = fields.Float(allow_none=True, load_default=None, validate=validate.Range(min=0))
    gamma_up = fields.Float(allow_none=True, load_default=None, validate=validate.Range(min=0))
    p = fields.Float(allow_none=True, load_default=None, validate=validate.Range(min=-1, max=1))
    detailed_balance = fields.Bool(load_default=False)
    omega = fields.Nested(RangeSchema, allow_none=True, load_default=None)
    g = fields.Nested(RangeSchema, allow_none=True, load_default=None)

    @validates_schema
    def validate_rates(self, data, **kwargs):
        if data.get("beta") is not None and data.get("temperature") is not None:
            raise ValidationError("give beta or temperature, not both", "temperature")
        if data["mode"] == "thermal":
            if data.get("gamma_down") is not None or data.get("gamma_up") is not None or data.get("p") is not None:
                raise ValidationError("thermal mode takes gamma only; rates follow detailed balance", "mode")
            return
        if data.get("detailed_balance"):
            if data.get("beta") is None and data.get("temperature") is None:
                raise ValidationError("detailed balance needs beta or temperature", "detailed_balance")
            if data.get("p") is not None:
                raise ValidationError("p is fixed by detailed balance", "p")
            return
        pair = data.get("gamma_down") is not None or data.get("gamma_up") is not None
        if pair and data.get("p") is not None:
            raise ValidationError("give (gamma_down, gamma_up) or (gamma, p), not both", "p")


class ProtocolSchema(Schema):
    family = fields.Str(required=True, validate=validate.OneOf(
        ["circle", "offset-ellipse", "temperature-modulated", "piecewise-linear"]))
    center = fields.List(fields.Float(), load_default=lambda: [0.0, 0.0], validate=validate.Length(equal=2))
    radius = fields.Float(allow_none=True, load_default=None, validate=validate.Range(min=0, min_inclusive=False))
    a = fields.Float(allow_none=True, load_default=None, validate=validate.Range(min=0, min_inclusive=False))
    b = fields.Float(allow_none=True, load_default=None, validate=validate.Range(min=0, min_inclusive=False))
    T0 = fields.Float(allow_none=True, load_default=None, validate=validate.Range(min=0, min_inclusive=False))
    delta_T = fields.Float(load_default=0.0, validate=validate.Range(min=0))
    phase = fields.Float(load_default=0.0)
    vertices = fields.List(fields.List(fields.Float()), allow_none=True, load_default=None)
    closed = fields.Bool(load_default=True)
    reverse = fields.Bool(load_default=False)

    @validates_schema
    def validate_shape(self, data, **kwargs):
        family = data["family"]
        if family == "circle" and data.get("radius") is None:
            raise ValidationError("circle needs a radius", "radius")
        if family in ("offset-ellipse", "temperature-modulated") and (data.get("a") is None or data.get("b") is None):
            raise ValidationError(f"{family} needs semi-axes a and b", "a")
        if family == "temperature-modulated":
            if data.get("T0") is None:
                raise ValidationError("temperature-modulated loop needs T0", "T0")
            if not data["T0"] > data["delta_T"]:
                raise ValidationError("need T0 > delta_T", "delta_T")
        if family == "piecewise-linear":
            vertices = data.get("vertices")
            if not vertices or len(vertices) < 2:
                raise ValidationError("piecewise-linear protocol needs at least two vertices", "vertices")
            if len({len(v) for v in vertices}) != 1 or len(vertices[0]) < 2:
                raise ValidationError("vertices must share one dimension of at least 2", "vertices")
        elif not data["closed"]:
            raise ValidationError(f"{family} protocols are closed loops", "closed")


class NumericSchema(Schema):
    nodes = fields.Int(load_default=Config.LINE_NODES, validate=validate.Range(min=16))
    radial = fields.Int(load_default=Config.RADIAL_NODES, validate=validate.Range(min=4))
    angular = fields.Int(load_default=Config.ANGULAR_NODES, validate=validate.Range(min=8))
    tolerance = fields.Float(load_default=Config.DEFAULT_TOLERANCE, validate=validate.Range(min=0, min_inclusive=False))
    dt = fields.Float(load_default=1e-3, validate=validate.Range(min=0, min_inclusive=False))
    t_final = fields.Float(load_default=1.0, validate=validate.Range(min=0, min_inclusive=False))
    samples = fields.Int(load_default=10000, validate=validate.Range(min=1))
    seed = fields.Int(allow_none=True, load_default=None, validate=validate.Range(min=0, max=MAX_SEED))
    betas = fields.List(fields.Float(validate=validate.Range(min=0, min_inclusive=False)), load_default=lambda: [1.0, 2.0, 4.0])
    radii = fields.Nested(RangeSchema, allow_none=True, load_default=None)
    phases = fields.Int(load_default=12, validate=validate.Range(min=3))
    periods = fields.List(fields.Float(validate=validate.Range(min=0, min_inclusive=False)),
                          load_default=lambda: [10.0, 20.0, 40.0, 80.0])
    chi = fields.Float(load_default=0.0)


class DriftSchema(Schema):
    kind = fields.Str(load_default="none", validate=validate.OneOf(["none", "constant", "rotation"]))
    vector = fields.List(fields.Float(), allow_none=True, load_default=None)
    center = fields.List(fields.Float(), load_default=lambda: [0.0, 0.0], validate=validate.Length(equal=2))
    rate = fields.Float(load_default=0.0)

    @validates_schema
    def validate_kind(self, data, **kwargs):
        if data["kind"] == "constant" and not data.get("vector"):
            raise ValidationError("constant drift needs a vector", "vector")


class StochasticSchema(Schema):
    connection = fields.Str(required=True, validate=validate.OneOf(["constant", "thermal", "coherent", "model"]))
    vector = fields.List(fields.Float(), allow_none=True, load_default=None)
    diffusion = fields.Float(required=True, validate=validate.Range(min=0))
    start = fields.List(fields.Float(), required=True, validate=validate.Length(min=1))
    end = fields.List(fields.Float(), allow_none=True, load_default=None)
    bridge = fields.Bool(load_default=False)
    drift = fields.Nested(DriftSchema, load_default=lambda: DriftSchema().load({}))
    bounds = fields.List(fields.List(fields.Float()), allow_none=True, load_default=None,
                         validate=validate.Length(equal=2))
    boundary = fields.Str(load_default="reflect", validate=validate.OneOf(["reflect", "reject"]))
    conditioned = fields.Bool(load_default=False)
    allowance = fields.Float(load_default=0.0, validate=validate.Range(min=0))
    half_step = fields.Bool(load_default=True)

    @validates_schema
    def validate_paths(self, data, **kwargs):
        if data["connection"] == "constant" and not data.get("vector"):
            raise ValidationError("constant connection needs a vector", "vector")
        if data["connection"] == "constant" and len(data["vector"]) != len(data["start"]):
            raise ValidationError("vector and start must have the same length", "vector")
        if data["bridge"] and data.get("end") is None:
            raise ValidationError("a bridge needs an end point", "end")
        if data.get("end") is not None and len(data["end"]) != len(data["start"]):
            raise ValidationError("end and start must have the same length", "end")
        if data["bridge"] and data["drift"]["kind"] != "none":
            raise ValidationError("a bridge carries its own drift", "drift")


class GridSchema(Schema):
    h = fields.Float(load_default=0.2, validate=validate.Range(min=0, min_inclusive=False))
    sigmas = fields.Float(load_default=6.0, validate=validate.Range(min=1))


class OutputSchema(Schema):
    dir = fields.Str(allow_none=True, load_default=None)
    plot_script = fields.Bool(load_default=True)
    histogram_bins = fields.Int(load_default=Config.HISTOGRAM_BINS, validate=validate.Range(min=2))


class RunConfigSchema(Schema):
    command = fields.Str(required=True, validate=validate.OneOf(COMMANDS))
    model = fields.Nested(ModelSchema, allow_none=True, load_default=None)
    protocol = fields.Nested(ProtocolSchema, allow_none=True, load_default=None)
    numeric = fields.Nested(NumericSchema, load_default=lambda: NumericSchema().load({}))
    stochastic = fields.Nested(StochasticSchema, allow_none=True, load_default=None)
    grid = fields.Nested(GridSchema, load_default=lambda: GridSchema().load({}))
    output = fields.Nested(OutputSchema, load_default=lambda: OutputSchema().load({}))

    @validates_schema
    def validate_blocks(self, data, **kwargs):
        command = data["command"]
        if command in SEEDED_COMMANDS and data["numeric"].get("seed") is None:
            raise ValidationError(f"{command} needs numeric.seed (or --seed)", "numeric")
        if command in STOCHASTIC_COMMANDS and data.get("stochastic") is None:
            raise ValidationError(f"{command} needs a stochastic block", "stochastic")
        if command in ("curvature-map", "cycle-work", "eta-map") and data.get("model") is None:
            raise ValidationError(f"{command} needs a model block", "model")
        if command in ("cycle-work", "phase-sweep") and data.get("protocol") is None:
            raise ValidationError(f"{command} needs a protocol block", "protocol")
        if command == "phase-sweep" and data["protocol"]["family"] != "temperature-modulated":
            raise ValidationError("phase-sweep needs a temperature-modulated protocol", "protocol")
        if command == "radius-sweep" and data["numeric"].get("radii") is None:
            raise ValidationError("radius-sweep needs numeric.radii", "numeric")
        if command in ("curvature-map", "eta-map"):
            model = data["model"]
            if model.get("omega") is None or model.get("g") is None:
                raise ValidationError(f"{command} needs model.omega and model.g ranges", "model")
        if command == "eta-map" and data["model"].get("beta") is None and data["model"].get("temperature") is None:
            raise ValidationError("eta-map needs model.beta or model.temperature", "model")
        if command == "curvature-map" and data["model"]["mode"] == "thermal" \
                and data["model"].get("beta") is None and data["model"].get("temperature") is None:
            raise ValidationError("a thermal curvature map needs model.beta or model.temperature", "model")
        if command in STOCHASTIC_COMMANDS and data["stochastic"]["connection"] != "constant" \
                and data.get("model") is None:
            raise ValidationError(f"{data['stochastic']['connection']} connection needs a model block", "model")


def _key_line(text, path):
    """1-based line of the last key of path found in order in the JSON text, or None"""
    position, line = 0, None
    for key in path:
        if isinstance(key, int):
            continue
        found = text.find(f'"{key}"', position)
        if found < 0:
            break
        position = found
        line = text.count("\n", 0, found) + 1
    return line


def _flatten(messages, prefix=()):
    for key, value in messages.items():
        path = prefix + (key,)
        if isinstance(value, dict):
            yield from _flatten(value, path)
        else:
            yield path, value


def describe_errors(text, messages):
    """One 'line N: a.b.c: message' entry per failing field"""
    lines = []
    for path, value in _flatten(messages):
        keys = [k for k in path if k != "_schema"]
        where = _key_line(text, keys)
        text_value = "; ".join(str(v) for v in value) if isinstance(value, list) else str(value)
        location = f"line {where}: " if where else ""
        lines.append(f"{location}{'.'.join(str(k) for k in keys) or '<root>'}: {text_value}")
    return lines


def parse_run_config(text, seed=None, tolerance=None, command=None):
    """
    Decode and validate a JSON run configuration.

    Parameters:
    - text: the JSON document
    - seed, tolerance: CLI overrides, injected before validation
    - command: the invoking command; the document's command must match it when present
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"line {err.lineno}, column {err.colno}: {err.msg}") from err
    if not isinstance(document, dict):
        raise ConfigError("line 1: run configuration must be a JSON object")

    if command is not None:
        document.setdefault("command", command)
        if document["command"] != command:
            raise ConfigError(f"config is for {document['command']!r}, not {command!r}")
    if seed is not None or tolerance is not None:
        numeric = document.setdefault("numeric", {})
        if not isinstance(numeric, dict):
            raise ConfigError(f"line {_key_line(text, ['numeric'])}: numeric must be an object")
        if seed is not None:
            numeric["seed"] = seed
        if tolerance is not None:
            numeric["tolerance"] = tolerance

    try:
        return RunConfigSchema().load(document)
    except ValidationError as err:
        details = describe_errors(text, err.messages)
        raise ConfigError("\n".join(details), messages=err.messages) from err
