import logging
import os

from dotenv import load_dotenv
from flask import Flask

# Load environment variables at the very beginning
load_dotenv()

from app.config import config


def create_app(test_config=None):
    """Create the curvwork application carrying config, logging and the CLI"""
    load_dotenv()

    app = Flask(__name__, instance_relative_config=True)

    env_name = os.environ.get('CURVWORK_ENV', 'default')
    app.config.from_object(config.get(env_name, config['default']))

    if test_config is not None:
        app.config.from_mapping(test_config)

    logging.basicConfig(
        level=getattr(logging, str(app.config['LOG_LEVEL']).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    # Register experiment commands
    from app.commands import bp as commands_bp
    app.register_blueprint(commands_bp)

    return app
