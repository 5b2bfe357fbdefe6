import logging
import sys

from src.config import Config


def setup_logger(name: str):
    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, Config.LOG_LEVEL, logging.INFO))
    # Module-level loggers are created on every import; attach the handler once.
    if not logger.handlers:
        # stdout is reserved for machine-readable results
        handler = logging.StreamHandler(sys.stderr)
        formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
        handler.setFormatter(formatter)
        logger.addHandler(handler)
        logger.propagate = False
    return logger
