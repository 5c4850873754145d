"""Logging for scan sessions.

Every module logs through a child of the ``scanpilot`` logger
(``get_logger("session.scan")`` -> ``scanpilot.session.scan``). Stage and event
messages carry a bracketed tag such as ``[STAGE]``, ``[MOTION]`` or ``[GATE]``
so a session log can be grepped per concern. Console output goes to stderr;
stdout stays free for the CLI summary.
"""

import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path

from app.utils.environment import is_debug

LOGGER_NAME = "scanpilot"
CONSOLE_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"
FILE_FORMAT = "%(asctime)s %(levelname)-7s %(name)s [%(filename)s:%(lineno)d] %(message)s"
DATE_FORMAT = "%H:%M:%S"
LOG_FILE_BYTES = 10 * 1024 * 1024
LOG_FILE_BACKUPS = 3


def _level(name: str) -> int:
    return getattr(logging, name.upper(), logging.INFO)


def setup_logger(
    name: str = LOGGER_NAME,
    log_file: str | None = None,
    log_level: str | None = None,
) -> logging.Logger:
    """Configure the session logger once and return it.

    Args:
        name: Root name of the session loggers
        log_file: Rotating log file; defaults to SCANPILOT_LOG_FILE, unset logs to stderr only
        log_level: Level name; defaults to SCANPILOT_LOG, else DEBUG in debug environments and INFO otherwise

    Returns:
        The configured logger
    """
    if log_level is None:
        log_level = os.getenv("SCANPILOT_LOG", "DEBUG" if is_debug() else "INFO")
    level = _level(log_level)

    log = logging.getLogger(name)
    log.setLevel(level)
    if log.handlers:
        return log

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(logging.Formatter(CONSOLE_FORMAT, datefmt=DATE_FORMAT))
    log.addHandler(console_handler)

    if log_file is None:
        log_file = os.getenv("SCANPILOT_LOG_FILE", "")
    if log_file:
        try:
            Path(log_file).parent.mkdir(parents=True, exist_ok=True)
            file_handler = RotatingFileHandler(
                log_file, maxBytes=LOG_FILE_BYTES, backupCount=LOG_FILE_BACKUPS, encoding="utf-8"
            )
            file_handler.setLevel(level)
            file_handler.setFormatter(logging.Formatter(FILE_FORMAT))
            log.addHandler(file_handler)
        except OSError as e:
            log.warning(f"Session log file {log_file} unavailable, logging to stderr only: {e}")

    log.propagate = False
    return log


def set_level(log_level: str) -> None:
    """Apply a level (``--log-level``) to the session logger and its handlers."""
    level = _level(log_level)
    log = logging.getLogger(LOGGER_NAME)
    log.setLevel(level)
    for handler in log.handlers:
        handler.setLevel(level)


logger = setup_logger()


def get_logger(name: str) -> logging.Logger:
    """Child logger ``scanpilot.<name>`` for a module, e.g. ``registration.icp``."""
    return logging.getLogger(f"{LOGGER_NAME}.{name}")
