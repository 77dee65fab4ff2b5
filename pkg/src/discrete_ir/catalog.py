"""Reduce extractions to an enumeration catalog, then consolidate and cap it.

Capping lives here because both limits the catalog must respect are external:
the store's maximum column count and the token budget of the text-to-SQL
prompt that later embeds every enumeration.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .errors import GroundingError
from .model import ColumnName, EnumerationCatalog, ExtractionSet, sorted_distinct

log = logging.getLogger(__name__)

ABBREVIATIONS = {"no": "number", "qty": "quantity", "amt": "amount"}


@dataclass(frozen=True)
class CapPolicy:
    """Limits on how many inferred columns survive, and which are exempt."""

    max_columns: int = 2048
    max_key_words: int = 2
    min_row_support: float = 0.05
    mandatory_keys: tuple[ColumnName, ...] = ()

    def __post_init__(self) -> None:
        if self.max_columns < 1:
            raise ValueError("max_columns must be >= 1")
        if not 0.0 <= self.min_row_support <= 1.0:
            raise ValueError("min_row_support must be in [0, 1]")


def enumerate_catalog(extractions: ExtractionSet) -> EnumerationCatalog:
    """Collect each key's distinct values across all rows, sorted."""
    values: dict[str, set[str]] = {}
    support: dict[str, int] = {}
    for tuples in extractions.per_row.values():
        for t in tuples:
            values.setdefault(t.key.normalized, set()).add(t.value)
            support[t.key.normalized] = support.get(t.key.normalized, 0) + 1
    return EnumerationCatalog(
        table_id=extractions.table_id,
        entries={k: sorted_distinct(v) for k, v in values.items()},
        support=support,
        consolidation_map={k: k for k in values},
    )


def canonical_key_form(key: str) -> str:
    """Canonical form used to detect near-duplicate keys.

    Expands abbreviation tokens and singularizes the trailing token, so
    e.g. no_of_pockets and number_of_pockets collide.
    """
    tokens = [ABBREVIATIONS.get(t, t) for t in key.split("_")]
    tokens[-1] = _singularize(tokens[-1])
    return "_".join(tokens)


def _singularize(token: str) -> str:
    if token.endswith("ies") and len(token) > 3:
        return token[:-3] + "y"
    if token.endswith("s") and not token.endswith("ss") and len(token) > 1:
        return token[:-1]
    return token


def consolidate_keys(catalog: EnumerationCatalog) -> EnumerationCatalog:
    """Merge keys whose canonical forms collide.

    The surviving name is the most supported original (ties break to the
    lexicographically smallest); the merged value list is the sorted union.
    Idempotent: a consolidated catalog passes through unchanged.
    """
    groups: dict[str, list[str]] = {}
    for key in catalog.entries:
        groups.setdefault(canonical_key_form(key), []).append(key)

    entries: dict[str, tuple[str, ...]] = {}
    support: dict[str, int] = {}
    mapping = dict(catalog.consolidation_map)
    for members in groups.values():
        survivor = min(members, key=lambda k: (-catalog.support.get(k, 0), k))
        merged_values = sorted_distinct(
            v for k in members for v in catalog.entries[k]
        )
        entries[survivor] = merged_values
        # Row-identity is gone at this point, so summed support is an upper
        # bound on the merged key's true row coverage.
        support[survivor] = sum(catalog.support.get(k, 0) for k in members)
        for member in members:
            mapping[member] = survivor
            if member != survivor:
                log.info("consolidated key %r into %r", member, survivor)
    for original, target in list(mapping.items()):
        mapping[original] = mapping.get(target, target)
    return EnumerationCatalog(
        table_id=catalog.table_id,
        entries=entries,
        support=support,
        consolidation_map=mapping,
        dropped=catalog.dropped,
    )


def cap_columns(
    catalog: EnumerationCatalog,
    policy: CapPolicy,
    row_count: int,
) -> EnumerationCatalog:
    """Apply the capping policy: name complexity, row support, column count.

    Mandatory keys are exempt from every filter but must exist in the catalog
    (grounding requires them in every sub-domain); every drop is recorded
    with its reason.
    """
    mandatory = {k.normalized for k in policy.mandatory_keys}
    absent = sorted(mandatory - set(catalog.entries))
    if absent:
        raise GroundingError(f"mandatory keys missing from catalog: {absent}")

    dropped = list(catalog.dropped)
    surviving = dict(catalog.entries)

    def drop(key: str, reason: str) -> None:
        del surviving[key]
        dropped.append((key, reason))
        log.info("dropped column %r: %s", key, reason)

    for key in sorted(surviving):
        if key in mandatory:
            continue
        words = len(key.split("_"))
        if words > policy.max_key_words:
            drop(key, f"name has {words} words (cap {policy.max_key_words})")

    if row_count > 0:
        for key in sorted(surviving):
            if key in mandatory:
                continue
            share = catalog.support.get(key, 0) / row_count
            if share < policy.min_row_support:
                drop(key, f"row support {share:.3f} below {policy.min_row_support}")

    if len(surviving) > policy.max_columns:
        # Lowest support drops first; ties drop wordier names, then
        # lexicographically larger ones (two-pass stable sort).
        evictable = sorted((k for k in surviving if k not in mandatory), reverse=True)
        evictable.sort(key=lambda k: (catalog.support.get(k, 0), -len(k.split("_"))))
        overflow = len(surviving) - policy.max_columns
        for key in evictable[:overflow]:
            drop(key, f"column count over cap {policy.max_columns}")

    return EnumerationCatalog(
        table_id=catalog.table_id,
        entries=surviving,
        support={k: catalog.support.get(k, 0) for k in surviving},
        consolidation_map=dict(catalog.consolidation_map),
        dropped=tuple(dropped),
    )


def save_catalog(catalog: EnumerationCatalog, path: str | Path) -> None:
    """Write a catalog document; byte-stable for identical catalogs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(catalog.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_catalog(path: str | Path) -> EnumerationCatalog:
    return EnumerationCatalog.from_dict(
        json.loads(Path(path).read_text(encoding="utf-8"))
    )
