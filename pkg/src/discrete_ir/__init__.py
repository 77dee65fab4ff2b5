"""Query free text and structured columns through one natural-language SQL interface.

The pipeline turns free-text columns into an enumerated inference table,
joins it with the original table in an embedded SQL store, and compiles
questions into validated SQL over that join; a multi-turn agent with
dialog state sits on top.
"""

from .agent import AgentRuntime, AgentTurn, Session, TableRuntime, route_table, step, update_dialog_state
from .catalog import CapPolicy, cap_columns, consolidate_keys, enumerate_catalog
from .discretize import discretize_row, discretize_table, parse_extraction
from .errors import DirError
from .ingest import IngestConfig, collect_text_fields, load_context_table
from .llm import LlmGateway, PromptTemplate, ProviderConfig, build_discretize_prompt, build_text2sql_prompt, complete
from .mock import MockProvider
from .model import (
    ColumnName,
    Constraint,
    ContextTable,
    DialogState,
    EnumerationCatalog,
    ExtractionSet,
    KeyValueTuple,
    ValueKind,
    normalize_column_name,
)
from .pipeline import PipelineResult, run_full_pipeline
from .sql_subset import QueryAst, parse_sql, render
from .store import JoinedSchema, Store, generate_inference_table, materialize_joined_view
from .text2sql import GeneratedQuery, ResultSet, ValidationReport, execute, repair_query, text_to_sql, validate_query

__version__ = "0.1.0"
