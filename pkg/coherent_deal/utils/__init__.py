"""
Utility module
"""

from .logger import Logger
from .file_utils import (
    detect_format,
    dumps_json,
    csv_text,
    ensure_directory,
    write_text
)

__all__ = [
    "Logger",
    "detect_format",
    "dumps_json",
    "csv_text",
    "ensure_directory",
    "write_text"
]
