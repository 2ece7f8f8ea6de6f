"""
Logger factory shared by every module of the project.

Each module creates its logger once at import time:

    logger = create_logger('trainer.loop')
"""
import logging
import sys

LOG_FORMAT = '%(asctime)s %(name)s [%(levelname)s] %(message)s'


def create_logger(name: str, level: int = logging.INFO) -> logging.Logger:
    logger = logging.getLogger(name)
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
        logger.setLevel(level)
        # Handlers live on the named loggers, not on the root.
        logger.propagate = False
    return logger
