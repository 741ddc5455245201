"""
Shared plumbing for the experiment commands: options, config loading, model
and protocol construction, and table output.
"""
import logging

import click
import numpy as np
from flask import current_app

from app.commands import bp
from app.models.control import qubit_coherent_model, qubit_thermal_model
from app.models.protocol import Protocol
from app.models.stochastic import ControlSDE
from app.physics.geometry import coherent_field, rate_pair_from_p
from app.schemas.schema import parse_run_config
from app.stochastic.connections import CoherentConnection, ConstantConnection, ModelConnection, ThermalConnection
from app.stochastic.sde import constant_drift, rotation_drift
from app.utils.errors import ConfigError, handle_failures
from app.utils.output import config_hash, write_plot_script, write_table

logger = logging.getLogger(__name__)


RUN_OPTIONS = (
    click.option('--config', 'config_path', required=True, type=click.Path(dir_okay=False),
                 help='JSON run configuration'),
    click.option('--out', 'out_dir', default=None, help='Output directory'),
    click.option('--seed', type=click.IntRange(0, 2 ** 64 - 1), default=None, help='Overrides numeric.seed'),
    click.option('--tolerance', type=float, default=None, help='Overrides numeric.tolerance'),
    click.option('--threads', type=click.IntRange(1, None), default=None,
                 help='Worker threads (default CURVWORK_THREADS)'),
)


def run_options(fn):
    """The option set every config-driven command accepts"""
    for option in reversed(RUN_OPTIONS):
        fn = option(fn)
    return fn


class Run:
    """A validated configuration plus where and how to write its tables"""

    def __init__(self, command, config_path, out_dir=None, seed=None, tolerance=None, threads=None):
        try:
            with open(config_path) as handle:
                text = handle.read()
        except OSError as err:
            raise ConfigError(f"cannot read config {config_path}: {err.strerror}") from err

        self.command = command
        self.config = parse_run_config(text, seed=seed, tolerance=tolerance, command=command)
        self.hash = config_hash(self.config)
        self.threads = threads or current_app.config['THREADS']
        self.out_dir = out_dir or self.config['output']['dir'] or current_app.config['OUTPUT_DIR']
        logger.info(f"{command}: config {self.hash[:12]}, {self.threads} thread(s), output in {self.out_dir}")

    @property
    def numeric(self):
        return self.config['numeric']

    @property
    def seed(self):
        return self.numeric.get('seed')

    def metadata(self, **extra):
        metadata = {
            'config_hash': self.hash,
            'tool_version': current_app.config['TOOL_VERSION'],
            'seed': '' if self.seed is None else self.seed,
        }
        metadata.update(extra)
        return metadata

    def emit(self, table, name=None, plot=None):
        """Write the table; plot is (x, [y...]) or a callable taking (table, out_dir, stem)"""
        table.metadata = {**self.metadata(), **table.metadata}
        path = write_table(table, self.out_dir, name)
        if plot is not None and self.config['output']['plot_script']:
            stem = name or table.command
            if callable(plot):
                plot(table, self.out_dir, stem)
            else:
                x, ys = plot[:2]
                style = plot[2] if len(plot) > 2 else "linespoints"
                write_plot_script(table, self.out_dir, x, ys, name=stem, style=style)
        click.echo(path)
        return path


def command(name):
    """Register a click command on the blueprint, with options and exit-code mapping"""
    def decorator(fn):
        return bp.cli.command(name)(run_options(handle_failures(fn)))

    return decorator


def values(spec):
    return np.linspace(spec['start'], spec['stop'], spec['num'])


def model_beta(model_cfg):
    if model_cfg.get('beta') is not None:
        return float(model_cfg['beta'])
    if model_cfg.get('temperature') is not None:
        return 1.0 / float(model_cfg['temperature'])
    return None


def model_gamma(model_cfg):
    return 1.0 if model_cfg.get('gamma') is None else float(model_cfg['gamma'])


def coherent_rates(model_cfg):
    """(gamma_down, gamma_up) for a fixed-bias coherent model"""
    if model_cfg.get('p') is not None:
        return rate_pair_from_p(model_gamma(model_cfg), model_cfg['p'])
    down = 1.0 if model_cfg.get('gamma_down') is None else model_cfg['gamma_down']
    up = 0.0 if model_cfg.get('gamma_up') is None else model_cfg['gamma_up']
    return float(down), float(up)


def coherent_bias(model_cfg):
    """(gamma, p) of a fixed-bias coherent model"""
    down, up = coherent_rates(model_cfg)
    gamma = down + up
    return gamma, (0.0 if gamma == 0 else (down - up) / gamma)


def build_model(model_cfg):
    mode = model_cfg['mode']
    beta = model_beta(model_cfg)
    if mode == 'thermal':
        return qubit_thermal_model(beta=beta, gamma=model_gamma(model_cfg))
    analytic = mode == 'coherent'
    if model_cfg.get('detailed_balance'):
        return qubit_coherent_model(analytic=analytic, beta=beta, gamma=model_gamma(model_cfg))
    down, up = coherent_rates(model_cfg)
    return qubit_coherent_model(gamma_down=down, gamma_up=up, analytic=analytic)


def build_coherent_field(model_cfg):
    """Closed-form coherent density matching the configured rates"""
    if model_cfg.get('detailed_balance'):
        return coherent_field(model_gamma(model_cfg), beta=model_beta(model_cfg))
    gamma, p = coherent_bias(model_cfg)
    return coherent_field(gamma, p=p)


def build_protocol(protocol_cfg):
    family = protocol_cfg['family']
    # planar loops given a T0 sit at that temperature on the (omega, g, T) chart
    tail = (protocol_cfg['T0'],) if protocol_cfg.get('T0') is not None else ()
    if family == Protocol.CIRCLE:
        protocol = Protocol.circle(protocol_cfg['center'], protocol_cfg['radius'], tail=tail)
    elif family == Protocol.ELLIPSE:
        protocol = Protocol.ellipse(protocol_cfg['center'], protocol_cfg['a'], protocol_cfg['b'], tail=tail)
    elif family == Protocol.TEMPERATURE:
        protocol = Protocol.temperature_modulated(
            protocol_cfg['center'], protocol_cfg['a'], protocol_cfg['b'],
            protocol_cfg['T0'], protocol_cfg['delta_T'], protocol_cfg['phase'],
        )
    else:
        protocol = Protocol.polyline(protocol_cfg['vertices'], closed=protocol_cfg['closed'], tail=tail)
    return protocol.reversed() if protocol_cfg['reverse'] else protocol


def build_connection(stochastic_cfg, model_cfg=None):
    kind = stochastic_cfg['connection']
    if kind == 'constant':
        return ConstantConnection(stochastic_cfg['vector'])
    if kind == 'thermal':
        beta = model_beta(model_cfg)
        if beta is None:
            raise ConfigError("thermal connection needs model.beta or model.temperature")
        return ThermalConnection(beta)
    if kind == 'coherent':
        if model_cfg.get('detailed_balance'):
            raise ConfigError("the coherent connection takes a fixed bias; use the model connection for detailed balance")
        return CoherentConnection(*coherent_bias(model_cfg))
    return ModelConnection(build_model(model_cfg))


def build_sde(stochastic_cfg, t_final):
    bounds = stochastic_cfg.get('bounds')
    if bounds is not None:
        bounds = (np.asarray(bounds[0], dtype=float), np.asarray(bounds[1], dtype=float))
    if stochastic_cfg['bridge']:
        return ControlSDE.bridge(stochastic_cfg['diffusion'], stochastic_cfg['start'], stochastic_cfg['end'],
                                 t_final, bounds=bounds)

    drift_cfg = stochastic_cfg['drift']
    if drift_cfg['kind'] == 'constant':
        if len(drift_cfg['vector']) != len(stochastic_cfg['start']):
            raise ConfigError("drift vector and start must have the same length")
        drift = constant_drift(drift_cfg['vector'])
    elif drift_cfg['kind'] == 'rotation':
        drift = rotation_drift(drift_cfg['center'], drift_cfg['rate'])
    else:
        drift = None
    return ControlSDE.isotropic(stochastic_cfg['diffusion'], stochastic_cfg['start'], drift=drift,
                                bounds=bounds, boundary=stochastic_cfg['boundary'])


