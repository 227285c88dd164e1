# GrateWave/utils/logger.py

import logging
import sys

ROOT_NAME = "gratewave"

_configured = False


def configure_logging(level: int = logging.INFO):
    """Console logging with a [HH:MM:SS] prefix. Safe to call more than once."""
    global _configured
    root = logging.getLogger(ROOT_NAME)
    root.setLevel(level)
    if not _configured:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("[%(asctime)s] %(levelname)s %(name)s: %(message)s",
                                               datefmt="%H:%M:%S"))
        root.addHandler(handler)
        root.propagate = False
        _configured = True


def get_logger(name: str) -> logging.Logger:
    """Logger under the gratewave namespace, e.g. get_logger('core.capacity')."""
    return logging.getLogger(f"{ROOT_NAME}.{name}")
