import os

from dotenv import load_dotenv

# Load environment-specific .env file BEFORE any app imports
env = os.getenv("ENV", "local")
dotenv_file = f".env.{env}"
load_dotenv(dotenv_file)

import argparse
import sys

from app.services.session import STAGES, ScanSession, load_session_config
from app.utils import (
    logger,
    configure_sentry,
    is_debug,
    set_level,
)
from app.utils.constants import EXIT_ERROR, EXIT_GATE_ABORT, EXIT_OK
from app.utils.errors import InvalidArgumentError, ScanPilotError
from app.utils.sentry_utils import capture_exception, capture_message


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scanpilot",
        description="Desk-scale simulator for motion-aware robotic ultrasound scanning",
    )
    parser.add_argument("--config", help="session config JSON (defaults apply when omitted)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="session output directory")
    parser.add_argument("--stage", choices=STAGES, default="all", help="stage to run (default: all)")
    parser.add_argument("--log-level", choices=("DEBUG", "INFO", "WARNING", "ERROR"), help="override SCANPILOT_LOG")
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_level(args.log_level)

    config = load_session_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise InvalidArgumentError("seed must be non-negative")
        config = config.model_copy(update={"seed": args.seed})
    session = ScanSession(config, args.out)
    report = session.run((args.stage,))

    if session.aborted or (report is not None and report.status == "aborted"):
        message = f"[GATE] session {session.session_id} aborted: compensation rejected"
        logger.warning(message)
        capture_message(message, level="warning")
        return EXIT_GATE_ABORT
    if session.errors or (report is not None and report.status == "failed"):
        for error in session.errors:
            logger.error(f"{error.code}: {error.message}")
        return EXIT_ERROR
    logger.info(f"Session {session.session_id} finished; artifacts in {session.store.root}")
    return EXIT_OK


def main() -> None:
    # Initialize Sentry for error tracking (only in non-debug environments)
    sentry_enabled = configure_sentry()
    if sentry_enabled:
        logger.info("Sentry error tracking initialized")
    logger.debug(f"Starting scanpilot (env={env}, debug={is_debug()})")

    try:
        code = run()
    except ScanPilotError as exc:
        logger.error(f"{exc.code}: {exc.message}")
        capture_exception(exc)
        code = EXIT_ERROR
    except Exception as exc:
        logger.error(
            f"Unhandled exception: {exc.__class__.__name__}: {exc}",
            exc_info=True,
        )
        capture_exception(exc)
        code = EXIT_ERROR
    sys.exit(code)


if __name__ == "__main__":
    main()
