"""
Engine exceptions
Every error carries the CLI exit code it maps to and a JSON-friendly payload.
"""
from typing import Any, Dict, Optional


class CoherentDealError(Exception):
    """Base class for all engine errors"""

    exit_code = 3
    kind = "error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        """
        One-line machine-parsable report

        Returns:
            Dictionary with error kind, message, exit code and details
        """
        payload: Dict[str, Any] = {
            "error": self.kind,
            "message": self.message,
            "exit_code": self.exit_code,
        }
        payload.update({k: v for k, v in self.details.items() if v is not None})
        return payload


class DomainError(CoherentDealError, ValueError):
    """A parameter lies outside its admissible domain"""

    kind = "domain"


class SizeError(DomainError):
    """An instance exceeds a configured brute-force cap"""

    kind = "size"


class ShapeError(CoherentDealError, ValueError):
    """Misaligned lengths or dimensions"""

    kind = "shape"


class ParseError(CoherentDealError, ValueError):
    """Malformed input file; row/column locate the offending cell"""

    kind = "parse"

    def __init__(
        self,
        message: str,
        row: Optional[int] = None,
        column: Optional[str] = None,
        path: Optional[str] = None
    ):
        super().__init__(message, row=row, column=column, path=path)
        self.row = row
        self.column = column
        self.path = path


class UsageError(CoherentDealError):
    """Bad command-line usage"""

    exit_code = 2
    kind = "usage"


class NsaoViolation(CoherentDealError):
    """Strictly acceptable opportunities exist in the market"""

    exit_code = 4
    kind = "nsao_violated"

    def __init__(self, message: str, certificate: Optional[Dict[str, Any]] = None):
        super().__init__(message, certificate=certificate)
        self.certificate = certificate or {}


class ConditioningError(CoherentDealError, ArithmeticError):
    """Numerical breakdown inside the LP solver"""

    exit_code = 5
    kind = "conditioning"
