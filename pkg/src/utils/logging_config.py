"""Logging setup shared by the CLI, the experiment runner and the tests."""

import logging
import sys
from typing import Iterable, Optional
from .exceptions import ConfigurationError

LOGGER_ROOT = "ldpfeat"
DEFAULT_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')
QUIET_LIBRARIES = ('sklearn', 'joblib', 'threadpoolctl', 'numba', 'matplotlib')


def setup_logging(
    level: str = "INFO",
    log_file: Optional[str] = None,
    format_string: Optional[str] = None,
    quiet: Iterable[str] = QUIET_LIBRARIES
) -> None:
    """
    Configure the root handlers and the toolkit's logger level.

    Records go to stderr, and also to ``log_file`` when one is given.

    Args:
        level: One of DEBUG, INFO, WARNING, ERROR, CRITICAL (case-insensitive)
        log_file: Extra file sink (optional)
        format_string: Custom format string (optional)
        quiet: Third-party loggers capped at WARNING

    Raises:
        ConfigurationError: Unknown level, or the log file cannot be opened
    """
    name = str(level).upper()
    if name not in LEVELS:
        raise ConfigurationError(f"Invalid log level: {level}. Valid levels: {list(LEVELS)}")

    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file:
        try:
            handlers.append(logging.FileHandler(log_file))
        except OSError as e:
            raise ConfigurationError(f"Cannot open log file {log_file}: {e}") from e

    logging.basicConfig(
        level=getattr(logging, name),
        format=format_string or DEFAULT_FORMAT,
        handlers=handlers,
        force=True
    )
    logging.getLogger(LOGGER_ROOT).setLevel(getattr(logging, name))
    logging.captureWarnings(True)

    for library in quiet:
        logging.getLogger(library).setLevel(logging.WARNING)


def get_logger(name: str) -> logging.Logger:
    """Return the toolkit logger for a module, e.g. ``src.services.ldp`` -> ``ldpfeat.services.ldp``."""
    if name.startswith("src."):
        name = name[len("src."):]
    if name == LOGGER_ROOT or name.startswith(LOGGER_ROOT + "."):
        return logging.getLogger(name)
    return logging.getLogger(f"{LOGGER_ROOT}.{name}")
