"""
Logging for cgate.

Everything logs through the ``cgate`` logger (or a child of it) to stderr, so the
CLI keeps stdout for JSON. The starting level comes from ``CGATE_LOG``
(off|info|debug, or 0|1|2).
"""

import logging
import os
import sys

# 0 = warnings only, 1 = info, 2 = debug
CGATE_LOG = 1

_ENV_LEVELS = {"off": 0, "0": 0, "info": 1, "1": 1, "debug": 2, "2": 2}


class Logger:
    """Level and handler setup for the ``cgate`` logger tree."""

    NAME = "cgate"
    DEFAULT_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

    @classmethod
    def get_logger(cls, name: str | None = None) -> logging.Logger:
        """The package logger, or ``cgate.<name>`` for a child."""
        return logging.getLogger(cls.NAME if not name else f"{cls.NAME}.{name}")

    @staticmethod
    def level_for(verbosity: int) -> int:
        if verbosity >= 2:
            return logging.DEBUG
        return logging.INFO if verbosity == 1 else logging.WARNING

    @classmethod
    def configure(
        cls,
        level: int | str | None = None,
        format_str: str | None = None,
        log_to_console: bool = True,
        log_to_file: str | None = None,
    ) -> None:
        """Replace the package logger's handlers.

        Args:
            level: A logging level or its name; defaults to the level for ``CGATE_LOG``.
            format_str: Record format; defaults to ``DEFAULT_FORMAT``.
            log_to_console: Attach a stderr handler.
            log_to_file: Also append records to this file, creating its directory.
        """
        if level is None:
            level = cls.level_for(CGATE_LOG)
        elif isinstance(level, str):
            level = logging.getLevelName(level.upper())

        base = cls.get_logger()
        for handler in list(base.handlers):
            base.removeHandler(handler)
        handlers: list[logging.Handler] = []
        if log_to_console:
            handlers.append(logging.StreamHandler(sys.stderr))
        if log_to_file:
            os.makedirs(os.path.dirname(log_to_file) or ".", exist_ok=True)
            handlers.append(logging.FileHandler(log_to_file))
        formatter = logging.Formatter(format_str or cls.DEFAULT_FORMAT)
        for handler in handlers:
            handler.setFormatter(formatter)
            base.addHandler(handler)
        base.setLevel(level)

    @classmethod
    def set_debug(cls, debug_level: int = 2) -> None:
        """Change verbosity at runtime (0=off, 1=info, 2=debug)."""
        global CGATE_LOG
        CGATE_LOG = debug_level
        level = cls.level_for(debug_level)
        base = cls.get_logger()
        base.setLevel(level)
        for handler in base.handlers:
            handler.setLevel(level)

    @classmethod
    def from_env(cls) -> int:
        """Verbosity named by ``CGATE_LOG``; unset or unknown values keep the current one."""
        raw = os.environ.get("CGATE_LOG", "").strip().lower()
        return _ENV_LEVELS.get(raw, CGATE_LOG)


CGATE_LOG = Logger.from_env()
Logger.configure()

logger = Logger.get_logger()
