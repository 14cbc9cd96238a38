"""
Logging helpers
Configures the package logger; engine modules log through children of it.
"""
import logging
import os
import sys
from typing import Optional, Union

ROOT_LOGGER = "coherent_deal"

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


def resolve_level(level: Union[int, str]) -> int:
    """Numeric level from a number or a name such as "info"; unknown names give WARNING"""
    if isinstance(level, int):
        return level
    value = logging.getLevelName(str(level).upper())
    return value if isinstance(value, int) else logging.WARNING


class Logger:
    """Log manager for the package logger"""

    def __init__(
        self,
        name: str = ROOT_LOGGER,
        log_file: Optional[str] = None,
        level: Union[int, str] = logging.WARNING
    ):
        """
        Set the level and attach the console and file handlers

        Args:
            name: logger name
            log_file: log file path (optional)
            level: logging level, as a number or a name
        """
        self.level = resolve_level(level)
        self.logger = logging.getLogger(name)
        self.logger.setLevel(self.level)
        self.formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

        for handler in self.logger.handlers:
            handler.setLevel(self.level)

        # stdout carries results
        if not any(type(h) is logging.StreamHandler for h in self.logger.handlers):
            self._attach(logging.StreamHandler(sys.stderr))
        if log_file and not self._has_file(log_file):
            self._attach(logging.FileHandler(log_file, encoding="utf-8"))

    def _attach(self, handler: logging.Handler) -> None:
        handler.setLevel(self.level)
        handler.setFormatter(self.formatter)
        self.logger.addHandler(handler)

    def _has_file(self, log_file: str) -> bool:
        target = os.path.abspath(log_file)
        return any(
            isinstance(h, logging.FileHandler) and h.baseFilename == target
            for h in self.logger.handlers
        )
