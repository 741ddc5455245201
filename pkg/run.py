from flask.cli import FlaskGroup

from app import create_app

# Experiment commands live on the app's CLI; there is no server to run
cli = FlaskGroup(create_app=create_app, add_default_commands=False, add_version_option=False,
                 help="curvwork: geometric work of driven open qubits")


if __name__ == "__main__":
    cli()
