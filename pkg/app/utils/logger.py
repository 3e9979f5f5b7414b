import logging
import sys
from typing import Any

import numpy as np
import structlog
from structlog.typing import EventDict, Processor

from app.config import get_settings


def _plain_numbers(_: Any, __: str, event_dict: EventDict) -> EventDict:
    """Turn numpy scalars and small arrays into builtins so both renderers print them cleanly."""
    for key, value in event_dict.items():
        if isinstance(value, np.generic):
            event_dict[key] = value.item()
        elif isinstance(value, np.ndarray):
            event_dict[key] = value.tolist() if value.size <= 16 else f"<array shape={value.shape}>"
    return event_dict


def _renderer(log_format: str) -> Processor:
    if log_format == "json":
        return structlog.processors.JSONRenderer()
    return structlog.dev.ConsoleRenderer(colors=sys.stderr.isatty())


def setup_logging():
    """Configure structlog once per process from the `WAVEREC_LOG_*` settings."""
    settings = get_settings()
    level = logging.getLevelName(settings.log_level.upper())
    if not isinstance(level, int):
        level = logging.INFO

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso", utc=True),
            _plain_numbers,
            structlog.processors.StackInfoRenderer(),
            structlog.dev.set_exc_info,
            _renderer(settings.log_format),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        context_class=dict,
        # stderr keeps CSV written to stdout clean
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=True,
    )
    return structlog.get_logger()


def get_logger(name: str = __name__):
    return structlog.get_logger(name)
