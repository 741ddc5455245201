from flask import Blueprint

bp = Blueprint('commands', __name__, cli_group=None)

# Import commands at the bottom to avoid circular imports
from app.commands import geometry_commands, selfcheck, stochastic_commands  # noqa: E402,F401
