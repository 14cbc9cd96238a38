"""
Command-line spec strings
Turns --group/--measure/--box/--volumes arguments into engine objects.
"""
import json
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from ..core.errors import DomainError, ParseError, UsageError
from ..core.pricing import PositionConstraint, ValuationGroup
from ..core.scenario import Measure, RandomVariable, ScenarioSpace
from ..core.sensitivity import Cashflow
from ..core.spectral import (
    WeightingMeasure,
    make_alphavar_grid,
    make_betavar_grid,
    make_tailvar,
    parse_measure_spec,
)

GROUP_FORMS = "tailvar:L | alphavar:A[:GRID] | betavar:A:B[:GRID] | discrete:L=W,... | file:PATH"


def _number(text: str, spec: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"Cannot read {text!r} as a number in {spec!r}")


def _integer(text: str, spec: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"Cannot read {text!r} as an integer in {spec!r}")


def read_json(file_path: str) -> Any:
    """Read a JSON input file, reporting failures as data errors"""
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (json.JSONDecodeError, IOError) as e:
        raise ParseError(f"Cannot read JSON file: {e}", path=str(file_path))


def _measure_document(document: Any) -> Any:
    """Measure spec of a document, unwrapping a saved convolve result"""
    if isinstance(document, Mapping) and "type" not in document and isinstance(document.get("measure"), Mapping):
        return document["measure"]
    return document


def parse_measure(text: str, default_grid: int = 200) -> WeightingMeasure:
    """
    Weighting measure from its command-line form

    Args:
        text: one of the forms listed in GROUP_FORMS
        default_grid: grid size for Alpha/Beta V@R when none is given

    Returns:
        Weighting measure
    """
    kind, _, rest = text.partition(":")
    parts = rest.split(":") if rest else []
    if kind == "tailvar" and len(parts) == 1:
        return make_tailvar(_number(parts[0], text))
    if kind == "alphavar" and len(parts) in (1, 2):
        grid = _integer(parts[1], text) if len(parts) == 2 else default_grid
        return make_alphavar_grid(_number(parts[0], text), grid)
    if kind == "betavar" and len(parts) in (2, 3):
        grid = _integer(parts[2], text) if len(parts) == 3 else default_grid
        return make_betavar_grid(_number(parts[0], text), _number(parts[1], text), grid)
    if kind == "discrete" and rest:
        atoms = []
        for item in rest.split(","):
            level, sep, weight = item.partition("=")
            if not sep:
                raise UsageError(f"Discrete atoms are written level=weight, got {item!r}")
            atoms.append((_number(level, text), _number(weight, text)))
        return WeightingMeasure.from_atoms(atoms)
    if kind == "file" and rest:
        document = _measure_document(read_json(rest))
        if isinstance(document, Mapping) and document.get("type") in ("measures", "extreme", "utility"):
            raise DomainError(f"{rest} describes an explicit valuation group, not a weighting measure")
        return parse_measure_spec(document, default_grid)
    raise UsageError(f"Unrecognized measure spec {text!r}; expected {GROUP_FORMS}")


def _explicit_group(
    document: Mapping[str, Any],
    space: Optional[ScenarioSpace],
    columns: Mapping[str, RandomVariable],
    default_grid: int,
    label: str
) -> ValuationGroup:
    kind = document.get("type")
    if space is None:
        raise UsageError(f"Group {label!r} needs a scenario file")
    if kind == "measures":
        raw = document.get("masses")
        if not isinstance(raw, list) or not raw:
            raise ParseError("'masses' must be a nonempty list of measures", column="masses", path=label)
        measures = []
        for row, masses in enumerate(raw, start=1):
            try:
                values = np.asarray(masses, dtype=float)
            except (TypeError, ValueError):
                raise ParseError("Measure masses must be numbers", row=row, column="masses", path=label)
            measures.append(Measure(space, values))
        return ValuationGroup.from_measures(measures, label)
    name = document.get("wealth")
    if name not in columns:
        raise DomainError(f"Group {label!r} refers to unknown wealth column {name!r}")
    if kind == "extreme":
        measure = parse_measure_spec(document.get("measure", {}), default_grid)
        return ValuationGroup.from_extreme(measure, columns[name], label)
    try:
        gamma = float(document["risk_aversion"])
    except (KeyError, TypeError, ValueError):
        raise ParseError("Utility group needs a numeric 'risk_aversion'", column="risk_aversion", path=label)
    return ValuationGroup.from_utility(gamma, columns[name], label)


def parse_group(
    text: str,
    space: Optional[ScenarioSpace] = None,
    columns: Optional[Mapping[str, RandomVariable]] = None,
    default_grid: int = 200
) -> ValuationGroup:
    """
    Valuation group from its command-line form

    A file may hold a measure spec, or an explicit group:
    {"type": "measures", "masses": [[...], ...]},
    {"type": "extreme", "measure": {...}, "wealth": COLUMN} or
    {"type": "utility", "risk_aversion": G, "wealth": COLUMN}.

    Args:
        text: group spec
        space: scenario space for explicit groups
        columns: scenario columns for wealth references
        default_grid: Alpha/Beta V@R grid size

    Returns:
        Valuation group labelled with its spec
    """
    if text.startswith("file:"):
        document = _measure_document(read_json(text[5:]))
        if isinstance(document, Mapping) and document.get("type") in ("measures", "extreme", "utility"):
            return _explicit_group(document, space, columns or {}, default_grid, text)
        return ValuationGroup.from_wvar(parse_measure_spec(document, default_grid), text)
    return ValuationGroup.from_wvar(parse_measure(text, default_grid), text)


def parse_box(text: str, count: int) -> PositionConstraint:
    """LO:HI applied to every asset; 'inf' and '-inf' are accepted"""
    lo, sep, hi = text.partition(":")
    if not sep:
        raise UsageError(f"Box bounds are written LO:HI, got {text!r}")
    return PositionConstraint.box([_number(lo, text)] * count, [_number(hi, text)] * count)


def parse_volumes(text: str) -> List[float]:
    """Comma-separated volumes, or START:STOP:COUNT for an even grid"""
    if text.count(":") == 2:
        start, stop, count = text.split(":")
        points = _integer(count, text)
        if points < 1:
            raise UsageError(f"Volume grid needs a positive point count, got {points} in {text!r}")
        return np.linspace(_number(start, text), _number(stop, text), points).tolist()
    return [_number(v, text) for v in text.split(",") if v.strip()]


def load_schedule(file_path: str) -> Tuple[List[Cashflow], float]:
    """
    Bond schedule file: {"expiry_shape": phi(T), "cashflows": [{"time", "amount", "shape"}, ...]}

    Returns:
        (cashflows, expiry shape)
    """
    document = read_json(file_path)
    if not isinstance(document, Mapping) or not isinstance(document.get("cashflows"), list):
        raise ParseError("Schedule must be an object with a 'cashflows' list", column="cashflows", path=file_path)
    cashflows = []
    for row, item in enumerate(document["cashflows"], start=1):
        try:
            cashflows.append(Cashflow(float(item["time"]), float(item["amount"]), float(item.get("shape", 0.0))))
        except (KeyError, TypeError, ValueError, AttributeError):
            raise ParseError("Cashflow needs numeric 'time' and 'amount'", row=row, column="cashflows", path=file_path)
    try:
        shape = float(document.get("expiry_shape", 0.0))
    except (TypeError, ValueError):
        raise ParseError("'expiry_shape' must be a number", column="expiry_shape", path=file_path)
    return cashflows, shape


def measure_payload(measure: WeightingMeasure) -> Dict[str, Any]:
    """Discrete measure spec, readable back through file: group specs"""
    return measure.to_spec()
