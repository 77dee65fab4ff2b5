"""Domain types shared by every pipeline stage.

Everything here is an immutable value after construction, so instances are
safe to share across threads without coordination.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping

from .errors import ColumnNameError, IntegrityError, SchemaError

MAX_COLUMN_NAME_LEN = 64
MAX_VALUE_LEN = 128

_NORMALIZED_RE = re.compile(r"^[a-z0-9]+(_[a-z0-9]+)*$")
_NON_WORD_RUN = re.compile(r"[^a-z0-9]+")


def normalize_column_name(raw: str) -> "ColumnName":
    """Normalize a raw column name into its canonical identifier form.

    Lowercases, collapses every run of non-alphanumeric characters into a
    single underscore, strips leading/trailing underscores, and truncates to
    64 characters. Deterministic and idempotent.

    Raises:
        ColumnNameError: if nothing survives normalization.
    """
    if raw is None or not raw.strip():
        raise ColumnNameError("column name is empty")
    normalized = _NON_WORD_RUN.sub("_", raw.strip().lower()).strip("_")
    if len(normalized) > MAX_COLUMN_NAME_LEN:
        normalized = normalized[:MAX_COLUMN_NAME_LEN].rstrip("_")
    if not normalized:
        raise ColumnNameError(f"column name {raw!r} is empty after normalization")
    return ColumnName(raw=raw, normalized=normalized)


@dataclass(frozen=True)
class ColumnName:
    """A column identifier, carrying both its raw and normalized spelling."""

    raw: str
    normalized: str

    def __post_init__(self) -> None:
        if not _NORMALIZED_RE.match(self.normalized):
            raise ColumnNameError(f"not a normalized column name: {self.normalized!r}")
        if len(self.normalized) > MAX_COLUMN_NAME_LEN:
            raise ColumnNameError(f"column name too long: {self.normalized!r}")

    def __str__(self) -> str:
        return self.normalized


class ValueKind(str, Enum):
    """Inferred kind of a structured column."""

    NUMBER = "number"
    TEXT = "text"
    BOOLEAN = "boolean"


# A cell is a parsed scalar; None marks a missing value.
Cell = Any  # str | int | float | bool | None


@dataclass(frozen=True)
class ContextTable:
    """The original table: structured columns plus free-text columns.

    Rows are mappings from normalized column name to parsed cell value.
    ``structured_columns`` carries (name, kind) pairs in schema order;
    ``text_columns`` are the free-text columns chosen at load time.
    """

    table_id: str
    domain_id: str
    primary_key: ColumnName
    structured_columns: tuple[tuple[ColumnName, ValueKind], ...]
    text_columns: tuple[ColumnName, ...]
    rows: tuple[Mapping[str, Cell], ...]

    def __post_init__(self) -> None:
        structured = {c.normalized for c, _ in self.structured_columns}
        text = {c.normalized for c in self.text_columns}
        overlap = structured & text
        if overlap:
            raise SchemaError(f"columns both structured and text: {sorted(overlap)}")
        slots = {self.primary_key.normalized} | structured | text
        seen: set[str] = set()
        for row in self.rows:
            missing = slots - set(row)
            if missing:
                raise SchemaError(f"row missing value slots: {sorted(missing)}")
            pk = row[self.primary_key.normalized]
            if pk is None:
                raise IntegrityError("null primary key")
            if str(pk) in seen:
                raise IntegrityError(f"duplicate primary key {pk!r}", keys=[str(pk)])
            seen.add(str(pk))

    @property
    def column_names(self) -> tuple[ColumnName, ...]:
        """All columns in schema order: primary key, structured, text."""
        return (
            (self.primary_key,)
            + tuple(c for c, _ in self.structured_columns)
            + self.text_columns
        )

    def primary_key_values(self) -> tuple[str, ...]:
        return tuple(str(r[self.primary_key.normalized]) for r in self.rows)

    def kind_of(self, name: str) -> ValueKind | None:
        """Kind of a structured column, TEXT for text columns, None if absent."""
        if name == self.primary_key.normalized:
            return ValueKind.TEXT
        for col, kind in self.structured_columns:
            if col.normalized == name:
                return kind
        for col in self.text_columns:
            if col.normalized == name:
                return ValueKind.TEXT
        return None

    def to_dict(self) -> dict:
        return {
            "table_id": self.table_id,
            "domain_id": self.domain_id,
            "primary_key": self.primary_key.normalized,
            "structured_columns": [
                [c.normalized, k.value] for c, k in self.structured_columns
            ],
            "text_columns": [c.normalized for c in self.text_columns],
            "rows": [dict(r) for r in self.rows],
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ContextTable":
        return cls(
            table_id=doc["table_id"],
            domain_id=doc["domain_id"],
            primary_key=normalize_column_name(doc["primary_key"]),
            structured_columns=tuple(
                (normalize_column_name(n), ValueKind(k))
                for n, k in doc["structured_columns"]
            ),
            text_columns=tuple(
                normalize_column_name(n) for n in doc["text_columns"]
            ),
            rows=tuple(dict(r) for r in doc["rows"]),
        )


@dataclass(frozen=True)
class KeyValueTuple:
    """One extracted fact: an inferred column and its surface value."""

    key: ColumnName
    value: str

    def __post_init__(self) -> None:
        if not self.value:
            raise ValueError("extracted value is empty")
        if len(self.value) > MAX_VALUE_LEN:
            raise ValueError(f"extracted value longer than {MAX_VALUE_LEN} chars")
        if self.value != self.value.strip().lower():
            raise ValueError(f"extracted value not lowercase-trimmed: {self.value!r}")


@dataclass(frozen=True)
class ExtractionSet:
    """Per-row extraction results for one table.

    ``per_row`` maps each primary-key value to its tuples (at most one per
    key, last-write-wins applied at parse time). Rows whose extraction failed
    outright appear with an empty tuple list and a reason in ``failed``.
    """

    table_id: str
    per_row: Mapping[str, tuple[KeyValueTuple, ...]]
    failed: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for pk, tuples in self.per_row.items():
            keys = [t.key.normalized for t in tuples]
            if len(keys) != len(set(keys)):
                raise ValueError(f"duplicate extraction keys for row {pk!r}")

    def to_dict(self) -> dict:
        return {
            "table_id": self.table_id,
            "per_row": {
                pk: [[t.key.normalized, t.value] for t in tuples]
                for pk, tuples in sorted(self.per_row.items())
            },
            "failed": dict(sorted(self.failed.items())),
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ExtractionSet":
        return cls(
            table_id=doc["table_id"],
            per_row={
                pk: tuple(
                    KeyValueTuple(key=normalize_column_name(k), value=v)
                    for k, v in pairs
                )
                for pk, pairs in doc["per_row"].items()
            },
            failed=dict(doc.get("failed", {})),
        )


@dataclass(frozen=True)
class EnumerationCatalog:
    """Mapping from inferred column name to its enumerated value set.

    ``entries`` value lists are duplicate-free and lexicographically sorted.
    ``support`` counts the rows that contributed each key. The
    ``consolidation_map`` covers every original key and is idempotent; keys
    removed by capping are listed in ``dropped`` with their reason.
    """

    table_id: str
    entries: Mapping[str, tuple[str, ...]]
    support: Mapping[str, int] = field(default_factory=dict)
    consolidation_map: Mapping[str, str] = field(default_factory=dict)
    dropped: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        for key, values in self.entries.items():
            if not values:
                raise ValueError(f"empty value list for {key!r}")
            if list(values) != sorted(set(values)):
                raise ValueError(f"value list for {key!r} not sorted and distinct")
        image = set(self.consolidation_map.values())
        for survivor in image:
            if self.consolidation_map.get(survivor, survivor) != survivor:
                raise ValueError(f"consolidation map not idempotent at {survivor!r}")

    def rewrite_key(self, key: str) -> str:
        """Apply the consolidation map to an original key."""
        return self.consolidation_map.get(key, key)

    def to_dict(self) -> dict:
        return {
            "table_id": self.table_id,
            "entries": {k: list(v) for k, v in sorted(self.entries.items())},
            "support": dict(sorted(self.support.items())),
            "consolidation_map": dict(sorted(self.consolidation_map.items())),
            "dropped": [list(d) for d in self.dropped],
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "EnumerationCatalog":
        return cls(
            table_id=doc["table_id"],
            entries={k: tuple(v) for k, v in doc["entries"].items()},
            support=dict(doc.get("support", {})),
            consolidation_map=dict(doc.get("consolidation_map", {})),
            dropped=tuple(tuple(d) for d in doc.get("dropped", [])),
        )


COMPARISON_OPS = ("eq", "neq", "lt", "lte", "gt", "gte", "in", "like")


@dataclass(frozen=True)
class Constraint:
    """One per-column filter accumulated from a parsed query."""

    column: str
    op: str
    operand: Any
    turn_index: int = 0

    def __post_init__(self) -> None:
        if self.op not in COMPARISON_OPS:
            raise ValueError(f"unknown constraint operator {self.op!r}")

    def to_dict(self) -> dict:
        operand = list(self.operand) if isinstance(self.operand, tuple) else self.operand
        return {
            "column": self.column,
            "op": self.op,
            "operand": operand,
            "turn_index": self.turn_index,
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "Constraint":
        operand = doc["operand"]
        if isinstance(operand, list):
            operand = tuple(operand)
        return cls(
            column=doc["column"],
            op=doc["op"],
            operand=operand,
            turn_index=doc.get("turn_index", 0),
        )


@dataclass(frozen=True)
class DialogState:
    """Accumulated per-column constraints across conversation turns."""

    active_table: str = ""
    constraints: Mapping[str, Constraint] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for column, constraint in self.constraints.items():
            if constraint.column != column:
                raise ValueError(
                    f"constraint keyed by {column!r} names column {constraint.column!r}"
                )

    def with_constraint(self, constraint: Constraint) -> "DialogState":
        merged = dict(self.constraints)
        merged[constraint.column] = constraint
        return DialogState(active_table=self.active_table, constraints=merged)

    def without_column(self, column: str) -> "DialogState":
        remaining = {c: v for c, v in self.constraints.items() if c != column}
        return DialogState(active_table=self.active_table, constraints=remaining)

    def to_dict(self) -> dict:
        return {
            "active_table": self.active_table,
            "constraints": {
                c: v.to_dict() for c, v in sorted(self.constraints.items())
            },
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "DialogState":
        return cls(
            active_table=doc.get("active_table", ""),
            constraints={
                c: Constraint.from_dict(v)
                for c, v in doc.get("constraints", {}).items()
            },
        )


def sorted_distinct(values: Iterable[str]) -> tuple[str, ...]:
    """Deduplicate and sort values; insertion order never matters."""
    return tuple(sorted(set(values)))
