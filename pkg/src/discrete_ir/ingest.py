"""Load context tables from files and pick the text fields worth extracting.

Supported inputs: RFC-4180 CSV (first row is the header) and line-delimited
JSON records (one flat object per line). Column kinds are inferred from cell
contents; free-text columns are either declared explicitly or detected by a
length + distinctness heuristic.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Mapping

from .errors import IntegrityError, SchemaError
from .model import Cell, ColumnName, ContextTable, ValueKind, normalize_column_name

NUMBER_SHARE_THRESHOLD = 0.9
_BOOL_WORDS = {"true", "false", "yes", "no"}
_TRUE_WORDS = {"true", "yes"}


@dataclass(frozen=True)
class IngestConfig:
    """How to load one table: key column, text-field choice, detection knobs."""

    primary_key: str
    declared_text_columns: tuple[str, ...] | None = None
    text_detection_threshold: float = 0.5
    min_avg_text_length: int = 40

    def __post_init__(self) -> None:
        if not 0.0 <= self.text_detection_threshold <= 1.0:
            raise ValueError("text_detection_threshold must be in [0, 1]")
        if self.min_avg_text_length < 1:
            raise ValueError("min_avg_text_length must be >= 1")


def read_csv_records(stream: IO[str]) -> tuple[list[str], list[dict[str, str | None]]]:
    """Read a header + records from CSV. Empty cells become None."""
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("CSV input has no header row") from None
    records = []
    for row in reader:
        record: dict[str, str | None] = {}
        for i, name in enumerate(header):
            cell = row[i] if i < len(row) else ""
            record[name] = cell if cell != "" else None
        records.append(record)
    return header, records


def read_jsonl_records(stream: IO[str]) -> tuple[list[str], list[dict[str, object]]]:
    """Read line-delimited JSON records; keys become column names.

    The header is the union of keys in first-seen order.
    """
    header: list[str] = []
    seen: set[str] = set()
    records = []
    for line in stream:
        line = line.strip()
        if not line:
            continue
        record = json.loads(line)
        if not isinstance(record, dict):
            raise SchemaError("JSONL line is not an object")
        for key in record:
            if key not in seen:
                seen.add(key)
                header.append(key)
        records.append(record)
    return header, records


def _parse_number(raw: object) -> float | int | None:
    if isinstance(raw, bool):
        return None
    if isinstance(raw, (int, float)):
        return raw
    text = str(raw).strip()
    if not text:
        return None
    try:
        if text.lstrip("+-").isdigit():
            return int(text)
        return float(text)
    except ValueError:
        return None


def _infer_kind(raw_cells: list[object]) -> ValueKind:
    non_null = [c for c in raw_cells if c is not None and str(c).strip() != ""]
    if not non_null:
        return ValueKind.TEXT
    if all(str(c).strip().lower() in _BOOL_WORDS or isinstance(c, bool) for c in non_null):
        return ValueKind.BOOLEAN
    numeric = sum(1 for c in non_null if _parse_number(c) is not None)
    if numeric / len(non_null) >= NUMBER_SHARE_THRESHOLD:
        return ValueKind.NUMBER
    return ValueKind.TEXT


def _parse_cell(raw: object, kind: ValueKind) -> Cell:
    if raw is None or (isinstance(raw, str) and raw == ""):
        return None
    if kind is ValueKind.NUMBER:
        return _parse_number(raw)
    if kind is ValueKind.BOOLEAN:
        if isinstance(raw, bool):
            return raw
        return str(raw).strip().lower() in _TRUE_WORDS
    return str(raw)


def _detect_text_columns(
    columns: list[ColumnName],
    kinds: Mapping[str, ValueKind],
    rows: list[Mapping[str, object]],
    config: IngestConfig,
) -> list[ColumnName]:
    """Length + distinctness heuristic over text-kind columns."""
    chosen = []
    for column in columns:
        if kinds[column.normalized] is not ValueKind.TEXT:
            continue
        cells = [
            str(r[column.normalized])
            for r in rows
            if r.get(column.normalized) not in (None, "")
        ]
        if not cells:
            continue
        avg_len = sum(len(c) for c in cells) / len(cells)
        distinct_ratio = len(set(cells)) / len(cells)
        if avg_len >= config.min_avg_text_length and distinct_ratio >= config.text_detection_threshold:
            chosen.append(column)
    return chosen


def load_context_table(
    source: str | Path | IO[str],
    config: IngestConfig,
    table_id: str = "table",
    domain_id: str = "",
    fmt: str | None = None,
) -> ContextTable:
    """Load a context table from CSV or JSONL.

    ``fmt`` is "csv" or "jsonl"; when None it is taken from the file suffix
    (defaulting to csv for streams). Raises SchemaError if the primary key
    column is missing and IntegrityError on duplicate key values.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        fmt = fmt or ("jsonl" if path.suffix in (".jsonl", ".ndjson") else "csv")
        with open(path, encoding="utf-8", newline="") as stream:
            return load_context_table(stream, config, table_id, domain_id, fmt)

    if (fmt or "csv") == "jsonl":
        header, records = read_jsonl_records(source)
    else:
        header, records = read_csv_records(source)

    columns = [normalize_column_name(h) for h in header]
    by_norm = {c.normalized: c for c in columns}
    pk = normalize_column_name(config.primary_key)
    if pk.normalized not in by_norm:
        raise SchemaError(f"primary key column {config.primary_key!r} not in header {header}")

    raw_rows: list[dict[str, object]] = []
    for record in records:
        raw_rows.append({
            normalize_column_name(k).normalized: v for k, v in record.items()
        })

    kinds: dict[str, ValueKind] = {}
    for column in columns:
        if column.normalized == pk.normalized:
            kinds[column.normalized] = ValueKind.TEXT
            continue
        kinds[column.normalized] = _infer_kind([r.get(column.normalized) for r in raw_rows])

    non_key_columns = [c for c in columns if c.normalized != pk.normalized]
    if config.declared_text_columns is not None:
        declared = []
        for name in config.declared_text_columns:
            normalized = normalize_column_name(name)
            if normalized.normalized not in by_norm:
                raise SchemaError(f"declared text column {name!r} not in header {header}")
            declared.append(normalized)
        text_columns = declared
    else:
        text_columns = _detect_text_columns(non_key_columns, kinds, raw_rows, config)

    text_names = {c.normalized for c in text_columns}
    structured = tuple(
        (c, kinds[c.normalized]) for c in non_key_columns if c.normalized not in text_names
    )

    parsed_rows = []
    seen_keys: set[str] = set()
    for raw_row in raw_rows:
        key_cell = raw_row.get(pk.normalized)
        if key_cell is None or str(key_cell).strip() == "":
            raise IntegrityError("row with null primary key")
        key = str(key_cell)
        if key in seen_keys:
            raise IntegrityError(f"duplicate primary key {key!r}", keys=[key])
        seen_keys.add(key)
        row: dict[str, Cell] = {pk.normalized: key}
        for column in non_key_columns:
            name = column.normalized
            kind = ValueKind.TEXT if name in text_names else kinds[name]
            row[name] = _parse_cell(raw_row.get(name), kind)
        parsed_rows.append(row)

    return ContextTable(
        table_id=table_id,
        domain_id=domain_id or table_id,
        primary_key=pk,
        structured_columns=structured,
        text_columns=tuple(text_columns),
        rows=tuple(parsed_rows),
    )


def collect_text_fields(table: ContextTable, config: IngestConfig) -> list[ColumnName]:
    """Choose which text fields feed extraction, in schema order.

    With ``declared_text_columns`` set, returns exactly those (validated to
    exist). Otherwise applies the detection heuristic to the table's text-kind
    columns. The primary key is never collectable.
    """
    known = {c.normalized: c for c in table.column_names}
    if config.declared_text_columns is not None:
        chosen = []
        for name in config.declared_text_columns:
            normalized = normalize_column_name(name)
            if normalized.normalized not in known:
                raise SchemaError(f"declared text column {name!r} not in table {table.table_id!r}")
            if normalized.normalized == table.primary_key.normalized:
                raise SchemaError("primary key cannot be a text field")
            chosen.append(known[normalized.normalized])
        return chosen

    candidates = [c for c in table.column_names if c.normalized != table.primary_key.normalized]
    kinds = {c.normalized: table.kind_of(c.normalized) for c in candidates}
    return _detect_text_columns(candidates, kinds, list(table.rows), config)


def _cell_to_text(cell: Cell) -> str:
    if cell is None:
        return ""
    if isinstance(cell, bool):
        return "true" if cell else "false"
    if isinstance(cell, float):
        return repr(cell)
    return str(cell)


def write_csv(table: ContextTable, stream_or_path: str | Path | IO[str]) -> None:
    """Serialize a context table back to CSV; load(write(load(x))) is stable."""
    if isinstance(stream_or_path, (str, Path)):
        with open(stream_or_path, "w", encoding="utf-8", newline="") as stream:
            write_csv(table, stream)
        return
    writer = csv.writer(stream_or_path)
    names = [c.normalized for c in table.column_names]
    writer.writerow(names)
    for row in table.rows:
        writer.writerow([_cell_to_text(row[n]) for n in names])


def dumps_csv(table: ContextTable) -> str:
    buffer = io.StringIO()
    write_csv(table, buffer)
    return buffer.getvalue()
