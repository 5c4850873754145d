from __future__ import annotations

import logging
from pathlib import Path

from app.utils.logger import LOGGER_NAME, get_logger, set_level, setup_logger


def test_child_loggers_share_the_session_handlers():
    child = get_logger("session.scan")
    assert child.name == f"{LOGGER_NAME}.session.scan"
    assert child.parent is logging.getLogger(LOGGER_NAME)
    assert logging.getLogger(LOGGER_NAME).handlers


def test_session_log_file_records_the_source(tmp_path: Path):
    path = tmp_path / "logs" / "session.log"
    log = setup_logger("scanpilot_file_test", log_file=str(path), log_level="DEBUG")
    log.getChild("runner").info("[STAGE] plan finished")
    for handler in log.handlers:
        handler.flush()
    line = path.read_text().strip()
    assert "scanpilot_file_test.runner" in line
    assert "[test_logger.py:" in line
    assert line.endswith("[STAGE] plan finished")
    assert log.propagate is False


def test_set_level_reaches_the_handlers():
    log = logging.getLogger(LOGGER_NAME)
    before = log.level
    try:
        set_level("warning")
        assert log.level == logging.WARNING
        assert all(h.level == logging.WARNING for h in log.handlers)
        set_level("nonsense")
        assert log.level == logging.INFO
    finally:
        set_level(logging.getLevelName(before))
