"""
File utilities
Format detection, number formatting and JSON/CSV writers shared by the CLI and scenario I/O.
"""
import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence

SUPPORTED_FORMATS = ("json", "csv")


def detect_format(file_path: str, explicit: Optional[str] = None) -> str:
    """
    Resolve the data format of a file

    Args:
        file_path: file path
        explicit: format forced by the caller (optional)

    Returns:
        "json" or "csv"
    """
    if explicit:
        fmt = explicit.lower()
    else:
        fmt = Path(file_path).suffix.lower().lstrip(".")
    if fmt not in SUPPORTED_FORMATS:
        raise ValueError(f"Unsupported data format {fmt!r} for {file_path}")
    return fmt


def round_sig(value: float, digits: int = 12) -> float:
    """
    Round a number to significant digits

    Args:
        value: number to round
        digits: significant digits

    Returns:
        Rounded number (non-finite values pass through)
    """
    if not math.isfinite(value):
        return value
    return float(f"{value:.{digits}g}")


def format_number(value: float, digits: int = 12) -> str:
    """Text form with significant digits, '.' as decimal separator"""
    return f"{float(value):.{digits}g}"


def rounded(payload: Any, digits: int = 12) -> Any:
    """Recursively round every float inside a JSON-like structure"""
    if isinstance(payload, bool):
        return payload
    if isinstance(payload, float):
        return round_sig(payload, digits)
    if isinstance(payload, dict):
        return {k: rounded(v, digits) for k, v in payload.items()}
    if isinstance(payload, (list, tuple)):
        return [rounded(v, digits) for v in payload]
    return payload


def dumps_json(payload: Any, digits: Optional[int] = 12) -> str:
    """Serialize a result on one line"""
    if digits is not None:
        payload = rounded(payload, digits)
    return json.dumps(payload, ensure_ascii=False)


def ensure_directory(path: str) -> Path:
    """
    Ensure a directory exists

    Args:
        path: directory path

    Returns:
        Path object
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_text(file_path: str, text: str) -> Path:
    """Write text, creating parent directories"""
    path = Path(file_path)
    ensure_directory(str(path.parent))
    path.write_text(text, encoding="utf-8")
    return path


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]], digits: Optional[int] = 12) -> str:
    """
    Render rows as CSV text

    Args:
        header: column names
        rows: row values; floats are formatted with significant digits
        digits: significant digits, or None for round-trip repr

    Returns:
        CSV document
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        cells: List[str] = []
        for cell in row:
            if isinstance(cell, float):
                cells.append(repr(cell) if digits is None else format_number(cell, digits))
            else:
                cells.append(str(cell))
        writer.writerow(cells)
    return buffer.getvalue()
