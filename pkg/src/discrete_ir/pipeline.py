"""One-call composition of the staged pipeline for a single table."""

from __future__ import annotations

from dataclasses import dataclass

from .catalog import CapPolicy, cap_columns, consolidate_keys, enumerate_catalog
from .discretize import discretize_table
from .llm import LlmGateway
from .model import ContextTable, EnumerationCatalog, ExtractionSet
from .store import JoinedSchema, Store, generate_inference_table, materialize_joined_view


@dataclass(frozen=True)
class PipelineResult:
    table: ContextTable
    extractions: ExtractionSet
    catalog: EnumerationCatalog
    inference_table: str
    schema: JoinedSchema


def run_full_pipeline(
    table: ContextTable,
    gateway: LlmGateway,
    policy: CapPolicy,
    store: Store,
) -> PipelineResult:
    """discretize -> enumerate/consolidate/cap -> generate -> join."""
    extractions = discretize_table(
        table, table.text_columns, list(policy.mandatory_keys), gateway
    )
    catalog = cap_columns(
        consolidate_keys(enumerate_catalog(extractions)), policy, len(table.rows)
    )
    inference = generate_inference_table(catalog, extractions, store, table.primary_key)
    schema = materialize_joined_view(table, inference, store)
    return PipelineResult(
        table=table,
        extractions=extractions,
        catalog=catalog,
        inference_table=inference,
        schema=schema,
    )
