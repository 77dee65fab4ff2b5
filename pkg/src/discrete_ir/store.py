"""Materialize inference tables in an embedded SQLite store.

The query engine only ever reads the joined view, never the raw tables;
this is the one choke point where context and inference data meet.
"""

from __future__ import annotations

import hashlib
import sqlite3
from dataclasses import dataclass
from pathlib import Path

from .errors import IntegrityError, StoreLimitError
from .model import (
    ColumnName,
    ContextTable,
    EnumerationCatalog,
    ExtractionSet,
    ValueKind,
    normalize_column_name,
)

DEFAULT_MAX_COLUMNS = 2048

_SQL_TYPES = {
    ValueKind.NUMBER: "NUMERIC",
    ValueKind.TEXT: "TEXT",
    ValueKind.BOOLEAN: "INTEGER",
}


@dataclass(frozen=True)
class JoinedSchema:
    """Schema of the context-join-inference view for one table."""

    table_id: str
    columns: tuple[tuple[ColumnName, ValueKind, str], ...]
    primary_key: ColumnName

    def __post_init__(self) -> None:
        names = [c.normalized for c, _, _ in self.columns]
        if len(names) != len(set(names)):
            raise ValueError("joined schema has duplicate column names")

    @property
    def view_name(self) -> str:
        return f"{self.table_id}__joined"

    def kind_of(self, name: str) -> ValueKind | None:
        for column, kind, _ in self.columns:
            if column.normalized == name:
                return kind
        return None

    def origin_of(self, name: str) -> str | None:
        for column, _, origin in self.columns:
            if column.normalized == name:
                return origin
        return None

    def to_dict(self) -> dict:
        return {
            "table_id": self.table_id,
            "view_name": self.view_name,
            "primary_key": self.primary_key.normalized,
            "columns": [
                {"name": c.normalized, "kind": k.value, "origin": o}
                for c, k, o in self.columns
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "JoinedSchema":
        return cls(
            table_id=doc["table_id"],
            columns=tuple(
                (normalize_column_name(c["name"]), ValueKind(c["kind"]), c["origin"])
                for c in doc["columns"]
            ),
            primary_key=normalize_column_name(doc["primary_key"]),
        )


class Store:
    """One embedded SQLite database, with a configurable column cap."""

    def __init__(self, path: str | Path = ":memory:", max_columns: int = DEFAULT_MAX_COLUMNS):
        self.path = str(path)
        self.max_columns = max_columns
        # The service reads from worker threads; writes stay single-threaded
        # per the materialization contract, so cross-thread handles are safe.
        self.connection = sqlite3.connect(self.path, check_same_thread=False)
        self.connection.row_factory = sqlite3.Row

    def close(self) -> None:
        self.connection.close()

    def execute(self, sql: str, params: tuple = ()) -> sqlite3.Cursor:
        return self.connection.execute(sql, params)

    def table_exists(self, name: str) -> bool:
        row = self.execute(
            "SELECT 1 FROM sqlite_master WHERE name = ?", (name,)
        ).fetchone()
        return row is not None

    def checksum(self) -> str:
        """Stable digest of the store contents (logical dump)."""
        dump = "\n".join(self.connection.iterdump())
        return hashlib.sha256(dump.encode("utf-8")).hexdigest()

    def file_checksum(self) -> str | None:
        """Digest of the on-disk file bytes; None for in-memory stores."""
        if self.path == ":memory:":
            return None
        self.connection.commit()
        return hashlib.sha256(Path(self.path).read_bytes()).hexdigest()


def _quote(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


def context_table_name(table_id: str) -> str:
    return f"{table_id}__context"


def inference_table_name(table_id: str) -> str:
    return f"{table_id}__inference"


def store_context_table(table: ContextTable, store: Store) -> str:
    """(Re)create and fill the context table; rows inserted in key order."""
    name = context_table_name(table.table_id)
    columns = [(table.primary_key, ValueKind.TEXT)] + list(table.structured_columns)
    columns += [(c, ValueKind.TEXT) for c in table.text_columns]
    if len(columns) > store.max_columns:
        raise StoreLimitError(len(columns), store.max_columns)
    store.execute(f"DROP TABLE IF EXISTS {_quote(name)}")
    decls = [f"{_quote(table.primary_key.normalized)} TEXT PRIMARY KEY"]
    decls += [
        f"{_quote(c.normalized)} {_SQL_TYPES[kind]}"
        for c, kind in columns[1:]
    ]
    store.execute(f"CREATE TABLE {_quote(name)} ({', '.join(decls)})")
    ordered_names = [c.normalized for c, _ in columns]
    placeholders = ", ".join("?" for _ in ordered_names)
    insert = (
        f"INSERT INTO {_quote(name)} "
        f"({', '.join(_quote(n) for n in ordered_names)}) VALUES ({placeholders})"
    )
    for row in sorted(table.rows, key=lambda r: str(r[table.primary_key.normalized])):
        values = []
        for column_name in ordered_names:
            cell = row[column_name]
            if isinstance(cell, bool):
                cell = int(cell)
            values.append(cell)
        store.execute(insert, tuple(values))
    store.connection.commit()
    return name


def generate_inference_table(
    catalog: EnumerationCatalog,
    extractions: ExtractionSet,
    store: Store,
    primary_key: ColumnName,
) -> str:
    """Create the inference table: the shared key plus one text column per entry.

    Cell values are the extracted values after consolidation rewrite, or null.
    The column-count check runs before any DDL, so an oversized catalog
    leaves the store untouched.
    """
    required = len(catalog.entries) + 1
    if required > store.max_columns:
        raise StoreLimitError(required, store.max_columns)
    name = inference_table_name(catalog.table_id)
    inference_columns = sorted(catalog.entries)
    store.execute(f"DROP TABLE IF EXISTS {_quote(name)}")
    decls = [f"{_quote(primary_key.normalized)} TEXT PRIMARY KEY"]
    decls += [f"{_quote(c)} TEXT" for c in inference_columns]
    try:
        store.execute(f"CREATE TABLE {_quote(name)} ({', '.join(decls)})")
    except sqlite3.OperationalError as exc:
        if "too many columns" in str(exc):
            raise StoreLimitError(required, store.max_columns) from exc
        raise
    placeholders = ", ".join("?" for _ in range(required))
    insert = f"INSERT INTO {_quote(name)} VALUES ({placeholders})"
    for pk in sorted(extractions.per_row):
        cells = {}
        for t in extractions.per_row[pk]:
            key = catalog.rewrite_key(t.key.normalized)
            if key in catalog.entries:
                cells[key] = t.value
        store.execute(
            insert, (pk, *[cells.get(c) for c in inference_columns])
        )
    store.connection.commit()
    return name


def materialize_joined_view(
    context: ContextTable,
    inference_name: str,
    store: Store,
) -> JoinedSchema:
    """Create the one-to-one joined view over context and inference tables."""
    context_name = context_table_name(context.table_id)
    if not store.table_exists(context_name):
        store_context_table(context, store)
    if not store.table_exists(inference_name):
        raise IntegrityError(f"inference table {inference_name!r} does not exist")

    pk = context.primary_key.normalized
    ctx_keys = {
        str(r[0]) for r in store.execute(
            f"SELECT {_quote(pk)} FROM {_quote(context_name)}"
        )
    }
    inf_keys = {
        str(r[0]) for r in store.execute(
            f"SELECT {_quote(pk)} FROM {_quote(inference_name)}"
        )
    }
    if ctx_keys != inf_keys:
        missing = sorted(ctx_keys.symmetric_difference(inf_keys))
        raise IntegrityError(f"key sets differ between tables: {missing}", keys=missing)

    inference_columns = [
        str(r[1]) for r in store.execute(f"PRAGMA table_info({_quote(inference_name)})")
        if str(r[1]) != pk
    ]
    columns: list[tuple[ColumnName, ValueKind, str]] = [
        (context.primary_key, ValueKind.TEXT, "context")
    ]
    columns += [(c, kind, "context") for c, kind in context.structured_columns]
    columns += [(c, ValueKind.TEXT, "context") for c in context.text_columns]
    columns += [
        (normalize_column_name(c), ValueKind.TEXT, "inference") for c in inference_columns
    ]

    view_name = f"{context.table_id}__joined"
    select_parts = [f"c.{_quote(pk)}"]
    select_parts += [
        f"c.{_quote(c.normalized)}" for c, _ in context.structured_columns
    ]
    select_parts += [f"c.{_quote(c.normalized)}" for c in context.text_columns]
    select_parts += [f"i.{_quote(c)}" for c in inference_columns]
    store.execute(f"DROP VIEW IF EXISTS {_quote(view_name)}")
    store.execute(
        f"CREATE VIEW {_quote(view_name)} AS SELECT {', '.join(select_parts)} "
        f"FROM {_quote(context_name)} AS c "
        f"JOIN {_quote(inference_name)} AS i ON c.{_quote(pk)} = i.{_quote(pk)}"
    )
    store.connection.commit()
    return JoinedSchema(
        table_id=context.table_id,
        columns=tuple(columns),
        primary_key=context.primary_key,
    )
