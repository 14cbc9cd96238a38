"""
Command-line module
"""

from .app import CommandLineApp

__all__ = [
    "CommandLineApp"
]
