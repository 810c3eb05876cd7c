"""Typed column-oriented tables with explicit missingness.

A DataTable stores every column as a float64 array plus a boolean missing
mask. Categorical columns hold level codes (the index into the declared
level tuple); binary columns hold 0.0/1.0. Missing cells carry NaN in the
value array and True in the mask, so numeric kernels can operate on the
raw arrays without consulting the schema.

CSV serialization is round-trip exact: write -> read -> write produces
identical bytes. Floats are rendered with the shortest representation that
parses back to the same value; integral floats are rendered without a
decimal point.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EmptyTable, ParseError, UnknownColumn

KINDS = ("numeric", "binary", "categorical")
ROLES = (
    "outcome_component_baseline",
    "outcome_component_post",
    "moderator",
    "treatment",
    "id",
)
MISSING_TOKENS = ("", "NA")


@dataclass(frozen=True)
class ColumnSpec:
    """Declared name, kind, role, and (for categoricals) level labels."""

    name: str
    kind: str
    role: str
    levels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("column name must be non-empty")
        if self.kind not in KINDS:
            raise ConfigError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.role not in ROLES:
            raise ConfigError(f"column {self.name!r}: unknown role {self.role!r}")
        if self.kind == "categorical":
            if len(self.levels) < 2:
                raise ConfigError(f"column {self.name!r}: categorical needs >= 2 levels")
            if len(set(self.levels)) != len(self.levels):
                raise ConfigError(f"column {self.name!r}: duplicate levels")
        elif self.levels:
            raise ConfigError(f"column {self.name!r}: levels only allowed for categorical")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DataTable:
    """Immutable column store. Use with_column/take to derive new tables."""

    schema: tuple[ColumnSpec, ...]
    values: dict[str, np.ndarray] = field(repr=False)
    missing: dict[str, np.ndarray] = field(repr=False)

    def __post_init__(self) -> None:
        names = [c.name for c in self.schema]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate column names in schema")
        if set(self.values) != set(names) or set(self.missing) != set(names):
            raise ConfigError("values/missing keys must match schema names")
        lengths = {len(v) for v in self.values.values()}
        lengths |= {len(m) for m in self.missing.values()}
        if len(lengths) > 1:
            raise ConfigError(f"ragged columns: lengths {sorted(lengths)}")
        for name in names:
            vals = np.ascontiguousarray(self.values[name], dtype=np.float64)
            mask = np.ascontiguousarray(self.missing[name], dtype=bool)
            self.values[name] = _frozen(vals)
            self.missing[name] = _frozen(mask)

    @property
    def n(self) -> int:
        return 0 if not self.schema else len(self.values[self.schema[0].name])

    def spec(self, name: str) -> ColumnSpec:
        for c in self.schema:
            if c.name == name:
                return c
        raise UnknownColumn(f"no column {name!r}")

    def column(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """Return (values, missing mask) for a column."""
        if name not in self.values:
            raise UnknownColumn(f"no column {name!r}")
        return self.values[name], self.missing[name]

    def by_role(self, *roles: str) -> list[ColumnSpec]:
        return [c for c in self.schema if c.role in roles]

    def take(self, rows: np.ndarray) -> "DataTable":
        rows = np.asarray(rows)
        return DataTable(
            schema=self.schema,
            values={k: v[rows].copy() for k, v in self.values.items()},
            missing={k: m[rows].copy() for k, m in self.missing.items()},
        )

    def with_column(self, name: str, values: np.ndarray, missing: np.ndarray) -> "DataTable":
        """Replace one column's data, returning a new table."""
        self.spec(name)
        vals = dict(self.values)
        masks = dict(self.missing)
        vals[name] = np.array(values, dtype=np.float64)
        masks[name] = np.array(missing, dtype=bool)
        return DataTable(schema=self.schema, values=vals, missing=masks)


def from_columns(schema: tuple[ColumnSpec, ...] | list[ColumnSpec], columns: dict[str, np.ndarray]) -> DataTable:
    """Build a table from complete (non-missing) column arrays."""
    schema = tuple(schema)
    values: dict[str, np.ndarray] = {}
    missing: dict[str, np.ndarray] = {}
    for spec in schema:
        arr = np.asarray(columns[spec.name], dtype=np.float64)
        values[spec.name] = arr.copy()
        missing[spec.name] = np.isnan(arr)
    return DataTable(schema=schema, values=values, missing=missing)


def _parse_cell(token: str, spec: ColumnSpec, row: int) -> tuple[float, bool]:
    if token in MISSING_TOKENS:
        return np.nan, True
    if spec.kind == "categorical":
        try:
            return float(spec.levels.index(token)), False
        except ValueError:
            raise ParseError(
                f"row {row}, column {spec.name!r}: {token!r} is not a declared level",
                row=row,
                column=spec.name,
            ) from None
    try:
        value = float(token)
    except ValueError:
        raise ParseError(
            f"row {row}, column {spec.name!r}: cannot parse {token!r} as a number",
            row=row,
            column=spec.name,
        ) from None
    if spec.kind == "binary" and value not in (0.0, 1.0):
        raise ParseError(
            f"row {row}, column {spec.name!r}: binary cell must be 0 or 1, got {token!r}",
            row=row,
            column=spec.name,
        )
    return value, False


def read_csv(path: str, schema: tuple[ColumnSpec, ...] | list[ColumnSpec]) -> DataTable:
    """Read a CSV file against a declared schema.

    The header must contain exactly the schema's column names (any order).
    Empty strings and "NA" are missing. Raises UnknownColumn on a header
    mismatch, ParseError on a bad cell, EmptyTable if no data rows follow
    the header.
    """
    schema = tuple(schema)
    by_name = {c.name: c for c in schema}
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyTable(f"{path}: no header row") from None
        extra = [h for h in header if h not in by_name]
        if extra:
            raise UnknownColumn(f"{path}: columns {extra} not in schema")
        absent = [c.name for c in schema if c.name not in header]
        if absent:
            raise UnknownColumn(f"{path}: schema columns {absent} missing from file")
        cols: dict[str, list[float]] = {c.name: [] for c in schema}
        masks: dict[str, list[bool]] = {c.name: [] for c in schema}
        for i, record in enumerate(reader, start=1):
            if len(record) != len(header):
                raise ParseError(f"row {i}: expected {len(header)} cells, got {len(record)}", row=i)
            for name, token in zip(header, record):
                value, miss = _parse_cell(token, by_name[name], i)
                cols[name].append(value)
                masks[name].append(miss)
    if not cols[schema[0].name]:
        raise EmptyTable(f"{path}: header only, no data rows")
    return DataTable(
        schema=schema,
        values={k: np.array(v, dtype=np.float64) for k, v in cols.items()},
        missing={k: np.array(v, dtype=bool) for k, v in masks.items()},
    )


def format_float(value: float) -> str:
    """Shortest exact decimal form; integral values render without a point."""
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _render_cell(value: float, miss: bool, spec: ColumnSpec) -> str:
    if miss:
        return ""
    if spec.kind == "categorical":
        return spec.levels[int(value)]
    return format_float(float(value))


def write_csv(table: DataTable, path: str) -> None:
    """Write a table in schema column order; missing cells as empty strings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = [c.name for c in table.schema]
    writer.writerow(names)
    cols = [table.values[n] for n in names]
    masks = [table.missing[n] for n in names]
    for i in range(table.n):
        writer.writerow(
            _render_cell(cols[j][i], masks[j][i], table.schema[j]) for j in range(len(names))
        )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


@dataclass(frozen=True)
class ColumnSummary:
    name: str
    kind: str
    role: str
    n_observed: int
    n_missing: int
    mean: float | None = None
    sd: float | None = None
    minimum: float | None = None
    maximum: float | None = None
    level_counts: dict[str, int] | None = None


def summarize(table: DataTable) -> list[ColumnSummary]:
    """Per-column summaries: moments for numeric/binary, counts for categorical."""
    out: list[ColumnSummary] = []
    for spec in table.schema:
        vals, mask = table.column(spec.name)
        obs = vals[~mask]
        n_obs, n_mis = int(obs.size), int(mask.sum())
        if spec.kind == "categorical":
            counts = {
                level: int(np.sum(obs == code)) for code, level in enumerate(spec.levels)
            }
            out.append(
                ColumnSummary(spec.name, spec.kind, spec.role, n_obs, n_mis, level_counts=counts)
            )
            continue
        if n_obs == 0:
            out.append(ColumnSummary(spec.name, spec.kind, spec.role, 0, n_mis))
            continue
        sd = float(np.std(obs, ddof=1)) if n_obs > 1 else 0.0
        out.append(
            ColumnSummary(
                spec.name,
                spec.kind,
                spec.role,
                n_obs,
                n_mis,
                mean=float(np.mean(obs)),
                sd=sd,
                minimum=float(np.min(obs)),
                maximum=float(np.max(obs)),
            )
        )
    return out
