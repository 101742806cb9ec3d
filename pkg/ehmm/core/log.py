"""Logging setup for ehmm."""

import logging
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

from ehmm.core.config import settings

LOGGER_NAME = "ehmm"


def configure_logging(level: Optional[str] = None, console: Optional[Console] = None) -> logging.Logger:
    """Attach a rich handler to the package logger (idempotent)."""
    logger = logging.getLogger(LOGGER_NAME)
    resolved = (level or settings.log_level).upper()
    logger.setLevel(resolved)

    for handler in list(logger.handlers):
        if isinstance(handler, RichHandler):
            logger.removeHandler(handler)

    handler = RichHandler(
        console=console or Console(stderr=True),
        show_path=settings.debug,
        rich_tracebacks=settings.debug,
        markup=False,
    )
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.propagate = False
    return logger
