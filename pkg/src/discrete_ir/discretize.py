"""Per-row LLM extraction of collected text fields into key-value tuples."""

from __future__ import annotations

import json
import logging
import re
from typing import Sequence

from .errors import ColumnNameError, ExtractionParseError, SchemaError
from .llm import LlmGateway, build_discretize_prompt
from .model import (
    MAX_VALUE_LEN,
    ColumnName,
    ContextTable,
    ExtractionSet,
    KeyValueTuple,
    normalize_column_name,
)

log = logging.getLogger(__name__)

RETRY_SUFFIX = (
    "\n\nYour previous answer was missing required keys. "
    "Remember to extract these keys: {keys}."
)
INFERRED_SUFFIX = "_inferred"

_ARRAY_RE = re.compile(r"\[.*\]", re.DOTALL)


def _find_json_array(completion: str) -> list | None:
    """Locate and decode the first JSON array in a completion."""
    match = _ARRAY_RE.search(completion)
    if not match:
        return None
    text = match.group(0)
    # Trim trailing junk by shrinking to the last closing bracket that parses.
    while text:
        try:
            parsed = json.loads(text)
        except json.JSONDecodeError:
            end = text.rfind("]", 0, len(text) - 1)
            if end < 0:
                return None
            text = text[:end + 1]
            continue
        return parsed if isinstance(parsed, list) else None
    return None


def parse_extraction(completion: str) -> list[KeyValueTuple]:
    """Parse a completion into key-value tuples.

    Malformed entries are dropped individually and logged; duplicate keys
    within the array resolve last-write-wins. A completion with no parseable
    array at all raises ExtractionParseError.
    """
    array = _find_json_array(completion)
    if array is None:
        raise ExtractionParseError(
            f"no parseable [key, value] array in completion: {completion[:80]!r}"
        )
    by_key: dict[str, tuple[int, str]] = {}
    order = 0
    for entry in array:
        if isinstance(entry, dict) and set(entry) >= {"key", "value"}:
            entry = [entry["key"], entry["value"]]
        if not isinstance(entry, (list, tuple)) or len(entry) != 2:
            log.warning("dropping malformed extraction entry: %r", entry)
            continue
        raw_key, raw_value = entry
        try:
            key = normalize_column_name(str(raw_key))
        except ColumnNameError:
            log.warning("dropping entry with unusable key: %r", raw_key)
            continue
        value = str(raw_value).strip().lower()
        if not value:
            log.warning("dropping entry with empty value for key %r", key.normalized)
            continue
        if len(value) > MAX_VALUE_LEN:
            log.warning(
                "truncating value for key %r from %d to %d chars",
                key.normalized, len(value), MAX_VALUE_LEN,
            )
            value = value[:MAX_VALUE_LEN].strip()
        if key.normalized in by_key:
            position, _ = by_key[key.normalized]
            by_key[key.normalized] = (position, value)
        else:
            by_key[key.normalized] = (order, value)
            order += 1
    ordered = sorted(by_key.items(), key=lambda item: item[1][0])
    return [
        KeyValueTuple(key=normalize_column_name(key), value=value)
        for key, (_, value) in ordered
    ]


def discretize_row(
    row_text: str,
    mandatory_keys: Sequence[ColumnName],
    gateway: LlmGateway,
) -> list[KeyValueTuple]:
    """Extract tuples from one row's text, retrying once on gaps.

    If the first completion misses a mandatory key (or fails to parse), one
    retry runs with a reinforcement suffix. Keys still missing afterwards are
    simply absent from the result; the caller records them as unextracted.
    """
    if not row_text:
        raise ValueError("row_text is empty")
    prompt = build_discretize_prompt(row_text, mandatory_keys, gateway.discretize_template)

    def missing(tuples: list[KeyValueTuple]) -> set[str]:
        got = {t.key.normalized for t in tuples}
        return {k.normalized for k in mandatory_keys} - got

    first_error: ExtractionParseError | None = None
    tuples: list[KeyValueTuple] = []
    try:
        tuples = parse_extraction(gateway.complete(prompt))
    except ExtractionParseError as exc:
        first_error = exc
    if first_error is None and not missing(tuples):
        return tuples

    gap = ", ".join(sorted(missing(tuples))) if first_error is None else ", ".join(
        sorted(k.normalized for k in mandatory_keys)
    ) or "all"
    retry_prompt = prompt + RETRY_SUFFIX.format(keys=gap)
    try:
        tuples = parse_extraction(gateway.complete(retry_prompt))
    except ExtractionParseError:
        if first_error is not None:
            raise
        return tuples
    still = missing(tuples)
    if still:
        log.warning("mandatory keys unextracted after retry: %s", sorted(still))
    return tuples


def _protected_names(table: ContextTable) -> set[str]:
    return {c.normalized for c in table.column_names}


def _deconflict(key: ColumnName, protected: set[str]) -> ColumnName:
    """Suffix inferred keys that collide with context column names."""
    name = key.normalized
    while name in protected:
        base = name
        if len(base) + len(INFERRED_SUFFIX) > 64:
            base = base[: 64 - len(INFERRED_SUFFIX)].rstrip("_")
        name = base + INFERRED_SUFFIX
    if name != key.normalized:
        log.warning("inferred key %r collides with a context column; renamed to %r",
                    key.normalized, name)
        return normalize_column_name(name)
    return key


def discretize_table(
    table: ContextTable,
    text_cols: Sequence[ColumnName],
    mandatory_keys: Sequence[ColumnName],
    gateway: LlmGateway,
) -> ExtractionSet:
    """Run extraction over every row of a table.

    Each row's chosen text fields are concatenated (newline separator, in
    declared column order) and extracted together. Row failures never abort
    the table: failed rows appear with an empty tuple list and a reason.
    The result is independent of row processing order.
    """
    declared = {c.normalized for c in table.text_columns}
    for col in text_cols:
        if col.normalized not in declared:
            raise SchemaError(f"{col.normalized!r} is not a text column of {table.table_id!r}")
    ordered_cols = [c for c in table.text_columns if c.normalized in {t.normalized for t in text_cols}]
    protected = _protected_names(table)

    per_row: dict[str, tuple[KeyValueTuple, ...]] = {}
    failed: dict[str, str] = {}
    for row in table.rows:
        pk = str(row[table.primary_key.normalized])
        pieces = [str(row[c.normalized]) for c in ordered_cols if row[c.normalized] not in (None, "")]
        row_text = "\n".join(pieces)
        if not row_text:
            per_row[pk] = ()
            continue
        try:
            tuples = discretize_row(row_text, mandatory_keys, gateway)
        except ExtractionParseError as exc:
            log.warning("row failed: table=%s pk=%s reason=%s", table.table_id, pk, exc)
            per_row[pk] = ()
            failed[pk] = str(exc)
            continue
        deduped: dict[str, KeyValueTuple] = {}
        for t in tuples:
            safe_key = _deconflict(t.key, protected)
            deduped[safe_key.normalized] = KeyValueTuple(key=safe_key, value=t.value)
        per_row[pk] = tuple(deduped.values())
    return ExtractionSet(table_id=table.table_id, per_row=per_row, failed=failed)
