"""
Finite probability spaces
Scenario sets, scenario-indexed random variables and measures, quantiles,
conditional expectations and scenario file I/O.
"""
import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Hashable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..utils.file_utils import csv_text, detect_format, write_text
from .errors import DomainError, ParseError, ShapeError

logger = logging.getLogger(__name__)

PROB_TOLERANCE = 1e-12


def _frozen_array(values: Any) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class ScenarioSpace:
    """Finite outcome set with strictly positive probabilities"""

    labels: Tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        labels = tuple(str(label) for label in self.labels)
        probs = np.array(self.probs, dtype=float).ravel()
        if len(labels) != probs.size:
            raise ShapeError(f"{len(labels)} labels for {probs.size} probabilities")
        if probs.size == 0:
            raise DomainError("A scenario space needs at least one scenario")
        if not np.all(np.isfinite(probs)) or np.any(probs <= 0):
            raise DomainError("Scenario probabilities must be finite and strictly positive")
        total = probs.sum()
        if abs(total - 1.0) > PROB_TOLERANCE:
            raise DomainError(f"Scenario probabilities sum to {total!r}, not 1")
        if len(set(labels)) != len(labels):
            raise DomainError("Scenario labels must be unique")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "probs", _frozen_array(probs / total))

    @classmethod
    def uniform(cls, size: int, labels: Optional[Sequence[Hashable]] = None) -> "ScenarioSpace":
        """Equally likely scenarios labelled 1..size unless labels are given"""
        if size < 1:
            raise DomainError("A scenario space needs at least one scenario")
        if labels is None:
            labels = [str(i + 1) for i in range(size)]
        return cls(tuple(labels), np.full(size, 1.0 / size))

    @property
    def size(self) -> int:
        return self.probs.size

    def __len__(self) -> int:
        return self.size

    def variable(self, values: Sequence[float]) -> "RandomVariable":
        return RandomVariable(self, values)

    def constant(self, value: float) -> "RandomVariable":
        return RandomVariable(self, np.full(self.size, float(value)))


@dataclass(frozen=True, eq=False)
class RandomVariable:
    """Payoff values index-aligned with a scenario space"""

    space: ScenarioSpace
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if values.size != self.space.size:
            raise ShapeError(f"{values.size} values for {self.space.size} scenarios")
        if not np.all(np.isfinite(values)):
            raise DomainError("Random variable values must be finite")
        object.__setattr__(self, "values", _frozen_array(values))

    def __len__(self) -> int:
        return self.values.size

    def _operand(self, other: Union["RandomVariable", float]) -> Any:
        if isinstance(other, RandomVariable):
            check_aligned(self, other)
            return other.values
        return float(other)

    def __add__(self, other: Union["RandomVariable", float]) -> "RandomVariable":
        return RandomVariable(self.space, self.values + self._operand(other))

    __radd__ = __add__

    def __sub__(self, other: Union["RandomVariable", float]) -> "RandomVariable":
        return RandomVariable(self.space, self.values - self._operand(other))

    def __rsub__(self, other: float) -> "RandomVariable":
        return RandomVariable(self.space, float(other) - self.values)

    def __neg__(self) -> "RandomVariable":
        return RandomVariable(self.space, -self.values)

    def __mul__(self, scalar: float) -> "RandomVariable":
        return RandomVariable(self.space, self.values * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "RandomVariable":
        return RandomVariable(self.space, self.values / float(scalar))

    def map(self, func) -> "RandomVariable":
        """Apply a vectorized function scenario-wise"""
        return RandomVariable(self.space, func(self.values))

    def mean(self) -> float:
        return float(np.dot(self.space.probs, self.values))

    def ascending_order(self) -> np.ndarray:
        """Scenario indices sorted by value, ties kept in original order"""
        return np.argsort(self.values, kind="stable")


@dataclass(frozen=True, eq=False)
class Measure:
    """Probability measure on a scenario space; unique=False marks an arbitrary pick from a non-singleton set"""

    space: ScenarioSpace
    masses: np.ndarray
    unique: bool = True

    def __post_init__(self):
        masses = np.array(self.masses, dtype=float).ravel()
        if masses.size != self.space.size:
            raise ShapeError(f"{masses.size} masses for {self.space.size} scenarios")
        if not np.all(np.isfinite(masses)) or np.any(masses < -PROB_TOLERANCE):
            raise DomainError("Measure masses must be finite and nonnegative")
        total = masses.sum()
        if abs(total - 1.0) > PROB_TOLERANCE:
            raise DomainError(f"Measure masses sum to {total!r}, not 1")
        masses = np.clip(masses, 0.0, None)
        object.__setattr__(self, "masses", _frozen_array(masses / masses.sum()))

    def expectation(self, variable: RandomVariable) -> float:
        if variable.space.size != self.space.size:
            raise ShapeError("Measure and random variable live on different spaces")
        return float(np.dot(self.masses, variable.values))

    def density(self) -> np.ndarray:
        """Radon-Nikodym density with respect to the scenario probabilities"""
        return self.masses / self.space.probs

    def to_dict(self) -> Dict[str, Any]:
        return {"masses": self.masses.tolist(), "unique": self.unique}


def check_aligned(*variables: RandomVariable) -> None:
    sizes = {v.space.size for v in variables}
    if len(sizes) > 1:
        raise ShapeError(f"Misaligned random variables with lengths {sorted(sizes)}")


def expectation(variable: RandomVariable, measure: Optional[Measure] = None) -> float:
    """
    Expectation under P or under a given measure

    Args:
        variable: random variable
        measure: valuation measure (optional, defaults to P)

    Returns:
        Expected value
    """
    if measure is None:
        return variable.mean()
    return measure.expectation(variable)


def quantile(variable: RandomVariable, level: float) -> float:
    """
    Left-continuous quantile q_s(X) = inf{x: P(X <= x) >= s}

    Args:
        variable: random variable
        level: probability level in (0, 1]

    Returns:
        Quantile value
    """
    if not 0.0 < level <= 1.0:
        raise DomainError(f"Quantile level {level!r} outside (0, 1]")
    order = variable.ascending_order()
    cumulative = np.cumsum(variable.space.probs[order])
    index = int(np.searchsorted(cumulative, level - PROB_TOLERANCE, side="left"))
    index = min(index, order.size - 1)
    return float(variable.values[order[index]])


Factor = Union[RandomVariable, Sequence[Hashable]]


def _factor_keys(factor: Factor, size: int) -> List[Hashable]:
    if isinstance(factor, RandomVariable):
        keys = factor.values.tolist()
    else:
        keys = list(factor)
    if len(keys) != size:
        raise ShapeError(f"Factor has {len(keys)} entries for {size} scenarios")
    return keys


def group_codes(factors: Sequence[Factor], size: int) -> np.ndarray:
    """
    Label scenarios by the joint value of one or several factors

    Args:
        factors: factor variables or label sequences
        size: number of scenarios

    Returns:
        Integer group code per scenario, numbered by first occurrence
    """
    columns = [_factor_keys(f, size) for f in factors]
    codes: Dict[Tuple, int] = {}
    result = np.empty(size, dtype=np.intp)
    for i, key in enumerate(zip(*columns)):
        result[i] = codes.setdefault(key, len(codes))
    return result


def conditional_expectation_multi(variable: RandomVariable, factors: Sequence[Factor]) -> RandomVariable:
    """
    E(X | Y^1, ..., Y^M) with scenarios grouped by exact equality of the factor tuple

    Args:
        variable: X
        factors: one or more conditioning factors

    Returns:
        Scenario-wise conditional mean
    """
    if not factors:
        return variable.space.constant(variable.mean())
    codes = group_codes(factors, variable.space.size)
    probs = variable.space.probs
    numer = np.bincount(codes, weights=probs * variable.values)
    denom = np.bincount(codes, weights=probs)
    return RandomVariable(variable.space, (numer / denom)[codes])


def conditional_expectation(variable: RandomVariable, factor: Factor) -> RandomVariable:
    """
    E(X | Y) with scenarios grouped by exact equality of Y

    Args:
        variable: X
        factor: Y as a random variable or a sequence of labels

    Returns:
        Scenario-wise conditional mean
    """
    return conditional_expectation_multi(variable, [factor])


def _parse_number(raw: Any, row: int, column: str, path: str) -> float:
    if isinstance(raw, bool):
        raise ParseError(f"Boolean {raw!r} is not a number", row=row, column=column, path=path)
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise ParseError(f"Cannot parse {raw!r} as a number", row=row, column=column, path=path)
    if not math.isfinite(value):
        raise ParseError(f"Non-finite value {raw!r}", row=row, column=column, path=path)
    return value


def _reject_duplicates(pairs: List[Tuple[str, Any]]) -> Dict[str, Any]:
    seen: Dict[str, Any] = {}
    for key, value in pairs:
        if key in seen:
            raise ParseError(f"Duplicate key {key!r}", column=key)
        seen[key] = value
    return seen


def _build_space(labels: List[str], probs: List[float], path: str) -> ScenarioSpace:
    for i, p in enumerate(probs):
        if p <= 0:
            raise ParseError(f"Nonpositive probability {p!r}", row=i + 1, column="prob", path=path)
    seen: Dict[str, int] = {}
    for i, label in enumerate(labels):
        if label in seen:
            raise ParseError(f"Duplicate scenario label {label!r}", row=i + 1, column="label", path=path)
        seen[label] = i
    total = math.fsum(probs)
    if abs(total - 1.0) > PROB_TOLERANCE:
        raise ParseError(f"Probabilities sum to {total!r}, not 1", column="prob", path=path)
    return ScenarioSpace(tuple(labels), probs)


def _load_json(path: Path) -> Tuple[List[str], List[float], Dict[str, List[float]]]:
    where = str(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f, object_pairs_hook=_reject_duplicates)
    except ParseError as e:
        raise ParseError(e.message, column=e.column, path=where)
    except (json.JSONDecodeError, IOError) as e:
        raise ParseError(f"Cannot read scenario file: {e}", path=where)
    if not isinstance(document, dict):
        raise ParseError("Scenario document must be a JSON object", path=where)
    raw_probs = document.get("probs")
    if not isinstance(raw_probs, list):
        raise ParseError("Missing 'probs' list", column="probs", path=where)
    probs = [_parse_number(v, i + 1, "probs", where) for i, v in enumerate(raw_probs)]
    raw_labels = document.get("labels")
    if raw_labels is None:
        labels = [str(i + 1) for i in range(len(probs))]
    elif isinstance(raw_labels, list):
        labels = [str(v) for v in raw_labels]
    else:
        raise ParseError("'labels' must be a list", column="labels", path=where)
    if len(labels) != len(probs):
        raise ParseError(
            f"{len(labels)} labels for {len(probs)} probabilities",
            row=min(len(labels), len(probs)) + 1, column="labels", path=where
        )
    raw_columns = document.get("columns", {})
    if not isinstance(raw_columns, dict):
        raise ParseError("'columns' must be an object", column="columns", path=where)
    columns: Dict[str, List[float]] = {}
    for name, raw in raw_columns.items():
        if not isinstance(raw, list):
            raise ParseError(f"Column {name!r} must be a list", column=name, path=where)
        if len(raw) != len(probs):
            raise ParseError(
                f"Column {name!r} has {len(raw)} values for {len(probs)} scenarios",
                row=min(len(raw), len(probs)) + 1, column=name, path=where
            )
        columns[name] = [_parse_number(v, i + 1, name, where) for i, v in enumerate(raw)]
    return labels, probs, columns


def _load_csv(path: Path) -> Tuple[List[str], List[float], Dict[str, List[float]]]:
    where = str(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
    except IOError as e:
        raise ParseError(f"Cannot read scenario file: {e}", path=where)
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise ParseError("Empty scenario file", path=where)
    header = [cell.strip() for cell in rows[0]]
    if len(header) < 2 or header[0].lower() != "label" or header[1].lower() != "prob":
        raise ParseError("Header must start with 'label,prob'", row=1, path=where)
    names = header[2:]
    seen = set()
    for name in names:
        if name in seen or name.lower() in ("label", "prob"):
            raise ParseError(f"Duplicate column name {name!r}", row=1, column=name, path=where)
        seen.add(name)
    labels: List[str] = []
    probs: List[float] = []
    columns: Dict[str, List[float]] = {name: [] for name in names}
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"Row has {len(row)} cells, header has {len(header)}", row=line, path=where)
        labels.append(row[0].strip())
        probs.append(_parse_number(row[1].strip(), line, "prob", where))
        for name, cell in zip(names, row[2:]):
            columns[name].append(_parse_number(cell.strip(), line, name, where))
    return labels, probs, columns


def load_scenarios(
    file_path: str,
    fmt: Optional[str] = None
) -> Tuple[ScenarioSpace, Dict[str, RandomVariable]]:
    """
    Load a scenario file

    Args:
        file_path: JSON or CSV scenario file
        fmt: "json" or "csv" (optional, inferred from the suffix)

    Returns:
        (scenario space, named payoff columns in file order)
    """
    path = Path(file_path)
    try:
        fmt = detect_format(file_path, fmt)
    except ValueError as e:
        raise ParseError(str(e), path=str(path))
    labels, probs, columns = _load_json(path) if fmt == "json" else _load_csv(path)
    space = _build_space(labels, probs, str(path))
    variables = {name: RandomVariable(space, values) for name, values in columns.items()}
    logger.debug("Loaded %d scenarios and %d columns from %s", space.size, len(variables), path)
    return space, variables


def save_scenarios(
    file_path: str,
    space: ScenarioSpace,
    columns: Dict[str, RandomVariable],
    fmt: Optional[str] = None
) -> Path:
    """
    Write a scenario file in the schema read by load_scenarios

    Args:
        file_path: destination
        space: scenario space
        columns: named payoff columns
        fmt: "json" or "csv" (optional, inferred from the suffix)

    Returns:
        Written path
    """
    fmt = detect_format(file_path, fmt)
    for name, variable in columns.items():
        if variable.space.size != space.size:
            raise ShapeError(f"Column {name!r} is not aligned with the scenario space")
    if fmt == "json":
        document = {
            "labels": list(space.labels),
            "probs": space.probs.tolist(),
            "columns": {name: v.values.tolist() for name, v in columns.items()}
        }
        return write_text(file_path, json.dumps(document, indent=2))
    header = ["label", "prob"] + list(columns)
    rows = (
        [space.labels[i], float(space.probs[i])] + [float(v.values[i]) for v in columns.values()]
        for i in range(space.size)
    )
    return write_text(file_path, csv_text(header, rows, digits=None))


def load_samples(file_path: str) -> Dict[str, np.ndarray]:
    """
    Load empirical samples: a CSV file with a header and one column per variable

    Args:
        file_path: sample file

    Returns:
        Column name to sample array, in file order
    """
    where = str(file_path)
    try:
        with open(file_path, "r", encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
    except IOError as e:
        raise ParseError(f"Cannot read sample file: {e}", path=where)
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if len(rows) < 2:
        raise ParseError("Sample file needs a header and at least one row", path=where)
    header = [cell.strip() for cell in rows[0]]
    if len(set(header)) != len(header):
        raise ParseError("Duplicate column names in header", row=1, path=where)
    columns: Dict[str, List[float]] = {name: [] for name in header}
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"Row has {len(row)} cells, header has {len(header)}", row=line, path=where)
        for name, cell in zip(header, row):
            columns[name].append(_parse_number(cell.strip(), line, name, where))
    logger.debug("Loaded %d samples of %d variables from %s", len(rows) - 1, len(header), where)
    return {name: np.array(values) for name, values in columns.items()}
