import json

import pytest

from app import create_app


@pytest.fixture
def app():
    app = create_app({"TESTING": True, "THREADS": 1, "LOG_LEVEL": "WARNING"})
    yield app


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def write_config(tmp_path):
    """Write a run configuration (dict or raw text) and return its path"""
    def write(document, name="run.json"):
        path = tmp_path / name
        text = document if isinstance(document, str) else json.dumps(document, indent=2)
        path.write_text(text)
        return str(path)

    return write
