"""Utility modules for the scanpilot application."""

from app.utils.logger import logger, setup_logger, get_logger, set_level
from app.utils.environment import is_debug, get_environment
from app.utils.sentry_utils import configure_sentry, capture_exception, capture_message

__all__ = [
    # Logger
    "logger",
    "setup_logger",
    "get_logger",
    "set_level",
    # Environment
    "is_debug",
    "get_environment",
    # Sentry
    "configure_sentry",
    "capture_exception",
    "capture_message",
]
