import io
from types import SimpleNamespace

import pytest

from discrete_ir.catalog import CapPolicy, cap_columns, consolidate_keys, enumerate_catalog
from discrete_ir.discretize import discretize_table
from discrete_ir.ingest import IngestConfig, load_context_table
from discrete_ir.llm import LlmGateway
from discrete_ir.mock import MockProvider
from discrete_ir.store import Store, generate_inference_table, materialize_joined_view

BACKPACKS_CSV = """\
product_id,title,price,description
p1,Alpine Daypack,399.0,"A rugged 15-liter backpack with a strap handle, finished in jet black."
p2,Trail Mate,120.5,"Spacious 22-liter backpack with a padded grip handle, shown in navy."
p3,City Cruiser,89.99,"Compact 15-liter backpack with a strap handle, colored forest green."
"""

# Surface phrase -> (inferred key, canonical value); the deterministic
# discretize mock scans text for these phrases.
BACKPACK_LEXICON = {
    "15-liter": ("product_size", "15 liter"),
    "15 liter": ("product_size", "15 liter"),
    "22-liter": ("product_size", "22 liter"),
    "22 liter": ("product_size", "22 liter"),
    "strap handle": ("handle_type", "strap"),
    "grip handle": ("handle_type", "grip"),
    "jet black": ("color", "black"),
    "navy": ("color", "navy"),
    "forest green": ("color", "green"),
    "backpack": ("product_type", "backpack"),
}

PERFUMES_CSV = """\
product_id,title,price,description
f1,Morning Zest,55.0,"A citrus perfume in a 50 ml bottle, bright top notes for daytime wear."
f2,Velvet Oud,120.0,"A woody perfume in a 100 ml bottle, deep oud heart for evening wear."
"""

PERFUME_LEXICON = {
    "citrus": ("scent_family", "citrus"),
    "woody": ("scent_family", "woody"),
    "50 ml": ("bottle_size", "50 ml"),
    "100 ml": ("bottle_size", "100 ml"),
    "perfume": ("product_type", "perfume"),
}


@pytest.fixture
def perfumes_table():
    return load_context_table(
        io.StringIO(PERFUMES_CSV),
        IngestConfig(primary_key="product_id"),
        table_id="perfumes",
    )


@pytest.fixture
def backpacks_config():
    return IngestConfig(primary_key="product_id")


@pytest.fixture
def backpacks_table(backpacks_config):
    return load_context_table(
        io.StringIO(BACKPACKS_CSV), backpacks_config, table_id="backpacks"
    )


def build_engine(table, lexicon=BACKPACK_LEXICON, store=None):
    """Run the full pipeline over a context table with the lexicon mock."""
    gateway = LlmGateway(MockProvider(lexicon=lexicon))
    extractions = discretize_table(table, table.text_columns, [], gateway)
    catalog = cap_columns(
        consolidate_keys(enumerate_catalog(extractions)),
        CapPolicy(min_row_support=0.0),
        len(table.rows),
    )
    store = store or Store(":memory:")
    inference = generate_inference_table(catalog, extractions, store, table.primary_key)
    schema = materialize_joined_view(table, inference, store)
    return SimpleNamespace(
        table=table,
        gateway=gateway,
        extractions=extractions,
        catalog=catalog,
        store=store,
        schema=schema,
    )


@pytest.fixture
def backpacks_engine(backpacks_table):
    engine = build_engine(backpacks_table)
    yield engine
    engine.store.close()


def build_runtime(tables_with_lexicons, **kwargs):
    """Assemble an AgentRuntime over several tables sharing one mock gateway."""
    from discrete_ir.agent import AgentRuntime, TableRuntime

    combined = {}
    for _, lexicon in tables_with_lexicons:
        combined.update(lexicon)
    gateway = LlmGateway(MockProvider(lexicon=combined))
    runtimes = {}
    for table, _ in tables_with_lexicons:
        engine = build_engine(table, lexicon=combined)
        runtimes[table.table_id] = TableRuntime(
            table_id=table.table_id,
            domain_id=table.domain_id,
            schema=engine.schema,
            catalog=engine.catalog,
            store=engine.store,
        )
    return AgentRuntime(gateway=gateway, tables=runtimes, **kwargs)


@pytest.fixture
def two_domain_runtime(backpacks_table, perfumes_table):
    runtime = build_runtime([
        (backpacks_table, BACKPACK_LEXICON),
        (perfumes_table, PERFUME_LEXICON),
    ])
    yield runtime
    for table in runtime.tables.values():
        table.store.close()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion."""
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" in nodeid and "::" in nodeid:
                outcomes[nodeid.split("::")[-1]] = status
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(outcomes):
        verdict = "PASS" if outcomes[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}")
