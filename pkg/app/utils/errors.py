"""
Error types raised by curvwork and the decorator that maps them to exit codes
"""
import logging
import sys
from functools import wraps

import click
from marshmallow import ValidationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_SELFCHECK = 3


class CurvworkError(Exception):
    """Base class for all curvwork failures."""
    exit_code = EXIT_NUMERICAL


class ConfigError(CurvworkError):
    """Run configuration could not be parsed or validated."""
    exit_code = EXIT_VALIDATION

    def __init__(self, message, messages=None):
        super().__init__(message)
        self.messages = messages or {}


class NumericalError(CurvworkError):
    exit_code = EXIT_NUMERICAL


class DimensionMismatch(NumericalError, ValueError):
    pass


class InvalidOperator(NumericalError, ValueError):
    """Operator violates Hermiticity, trace or positivity constraints."""


class DegenerateSteadyState(NumericalError):
    """Zero is not a nondegenerate eigenvalue of the Liouvillian."""


class NonPositiveState(NumericalError):
    pass


class SingularSolve(NumericalError):
    pass


class StepUnderflow(NumericalError, ValueError):
    pass


class NonConvergence(NumericalError):
    pass


class UnresolvedIntegrand(NumericalError):
    pass


class ZeroBaseline(NumericalError):
    pass


class DomainExit(NumericalError):
    pass


class InstabilityDetected(NumericalError):
    pass


class UnresolvedGrid(NumericalError):
    """Work grid too coarse for the mixed lambda-W diffusion."""


class EndpointMismatch(NumericalError):
    pass


class InvalidParameter(CurvworkError, ValueError):
    """Physical parameter outside its domain, such as a negative beta."""
    exit_code = EXIT_VALIDATION


class SelfcheckFailed(CurvworkError):
    exit_code = EXIT_SELFCHECK


def handle_failures(fn):
    """Decorator that turns curvwork failures into CLI exit codes"""
    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as err:
            logger.error(f"Validation error: {err.messages}")
            click.echo(f"config validation failed: {err.messages}", err=True)
            sys.exit(EXIT_VALIDATION)
        except ConfigError as err:
            logger.error(f"Config error: {err}")
            click.echo(f"config error: {err}", err=True)
            sys.exit(EXIT_VALIDATION)
        except CurvworkError as err:
            logger.error(f"{type(err).__name__}: {err}")
            click.echo(f"{type(err).__name__}: {err}", err=True)
            sys.exit(err.exit_code)
        except ValueError as err:
            logger.exception(f"Invalid value: {err}")
            click.echo(f"invalid value: {err}", err=True)
            sys.exit(EXIT_VALIDATION)

    return wrapper
