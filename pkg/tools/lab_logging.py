#!/usr/bin/env python3
"""
Lab Logging - structlog configuration shared by every tool and script
Part of Layer 3: Tools (deterministic operations)
Architecture SOP: architecture/00_master_system.md
"""

import os
import sys
import logging

import structlog
from dotenv import load_dotenv

load_dotenv()

LOG_LEVEL_ENV = "CFL_LOG_LEVEL"
LOG_FORMAT_ENV = "CFL_LOG_FORMAT"

_configured = False


def configure_logging(level: str = None, fmt: str = None) -> None:
    """
    Configure structlog once for the whole process.

    Args:
        level: Log level name (defaults to CFL_LOG_LEVEL or INFO)
        fmt: "console" or "json" (defaults to CFL_LOG_FORMAT or console)
    """
    global _configured

    level_name = (level or os.getenv(LOG_LEVEL_ENV, "INFO")).upper()
    render = (fmt or os.getenv(LOG_FORMAT_ENV, "console")).lower()
    numeric_level = getattr(logging, level_name, logging.INFO)

    # stdout is reserved for tables and JSON payloads
    logging.basicConfig(
        level=numeric_level,
        format="%(message)s",
        stream=sys.stderr,
    )

    renderer = (
        structlog.processors.JSONRenderer(sort_keys=True)
        if render == "json"
        else structlog.dev.ConsoleRenderer(colors=False)
    )

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(numeric_level),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
    _configured = True


def get_logger(name: str):
    """
    Return a bound structlog logger, configuring defaults on first use.

    Args:
        name: Module name, usually __name__

    Returns:
        structlog BoundLogger with the module name bound
    """
    if not _configured:
        configure_logging()
    return structlog.get_logger().bind(module=name)
