import os


def _env_int(name, default):
    value = os.environ.get(name)
    if value is None or value.strip() == "":
        return default
    try:
        return max(1, int(value))
    except ValueError:
        return default


class Config:
    TOOL_VERSION = "0.3.0"
    LOG_LEVEL = os.environ.get('CURVWORK_LOG_LEVEL', 'INFO')

    # Parallel sweeps
    THREADS = _env_int('CURVWORK_THREADS', 1)

    # Output
    OUTPUT_DIR = os.environ.get('CURVWORK_OUTPUT_DIR', 'results')

    # Quadrature defaults
    LINE_NODES = 256
    MAX_LINE_NODES = 8192
    RADIAL_NODES = 64
    ANGULAR_NODES = 128
    MAX_RADIAL_NODES = 1024
    DEFAULT_TOLERANCE = 1e-8

    # Finite differences on the control manifold
    FD_RELATIVE_STEP = 1e-4

    # Monte Carlo
    SDE_CHUNK_SIZE = 4096
    HISTOGRAM_BINS = 60


class DevelopmentConfig(Config):
    DEBUG = True


class TestingConfig(Config):
    TESTING = True
    LOG_LEVEL = 'WARNING'
    THREADS = 1


class ProductionConfig(Config):
    DEBUG = False
    TESTING = False


config = {
    'development': DevelopmentConfig,
    'testing': TestingConfig,
    'production': ProductionConfig,
    'default': DevelopmentConfig
}
