import io

import pytest

from discrete_ir.errors import ContractError, SemanticParseError
from discrete_ir.ingest import IngestConfig, load_context_table
from discrete_ir.llm import LlmGateway
from discrete_ir.model import DialogState
from discrete_ir.sql_subset import atoms_of, parse_sql
from discrete_ir.text2sql import (
    GeneratedQuery,
    ValidationReport,
    edit_distance,
    execute,
    extract_sql,
    nearest_value,
    normalized_distance,
    repair_query,
    text_to_sql,
    validate_query,
)

from conftest import build_engine
from helpers import brute_force_rows, view_rows

QUESTION = "Do you have a non-black 15-liter backpack under $400?"


def _run(engine, question, state=None):
    state = state or DialogState(active_table=engine.table.table_id)
    return text_to_sql(question, engine.schema, engine.catalog, state, engine.gateway)


def test_flagship_question_compiles_to_expected_atoms(backpacks_engine):
    query = _run(backpacks_engine, QUESTION)
    assert query.report.status == "valid"
    atoms = {(a.column, a.op, a.value) for a in atoms_of(query.ast.predicate)}
    assert ("price", "lt", 400) in atoms
    assert ("product_size", "eq", "15 liter") in atoms
    assert ("color", "neq", "black") in atoms


def test_flagship_question_matches_brute_force(backpacks_engine):
    query = _run(backpacks_engine, QUESTION)
    result = execute(query, backpacks_engine.store)
    returned = {row[0] for row in result.rows}
    oracle = {
        row["product_id"]
        for row in brute_force_rows(
            query.ast, view_rows(backpacks_engine.store, query.ast.source)
        )
    }
    assert returned == oracle == {"p3"}


def test_show_everything_is_unconstrained(backpacks_engine):
    query = _run(backpacks_engine, "show everything")
    assert query.ast.predicate is None
    assert query.report.status == "valid"
    assert len(execute(query, backpacks_engine.store)) == 3


def test_unknown_value_yields_rejected_query(backpacks_engine):
    query = _run(backpacks_engine, "show backpacks with color 'chartreuse'")
    assert query.report.status == "rejected"
    assert any(i.kind == "non_enum_value" for i in query.report.issues)


def test_near_miss_value_is_repaired(backpacks_engine):
    query = _run(backpacks_engine, "show items with product size '15 litre'")
    assert query.report.status == "repaired"
    assert query.report.repairs
    repair = query.report.repairs[0]
    assert (repair.before, repair.after) == ("15 litre", "15 liter")
    returned = {row[0] for row in execute(query, backpacks_engine.store).rows}
    assert returned == {"p1", "p3"}


def test_repair_never_invents_values_outside_catalog(backpacks_engine):
    query = _run(backpacks_engine, "show items with product size '15 litre'")
    for atom in atoms_of(query.ast.predicate):
        if atom.column in backpacks_engine.catalog.entries and atom.op in ("eq", "neq"):
            assert atom.value in backpacks_engine.catalog.entries[atom.column]


def test_edit_distance_matches_hand_computation():
    assert edit_distance("15 litre", "15 liter") == 1  # transposition
    assert normalized_distance("15 litre", "15 liter") == pytest.approx(1 / 8)
    assert edit_distance("banana", "15 liter") > 2


def test_nearest_value_is_deterministic():
    candidates = ("15 liter", "22 liter")
    best, distance = nearest_value("15 litre", candidates)
    assert best == "15 liter"
    assert distance <= 0.25


def test_validate_flags_unknown_column(backpacks_engine):
    ast = parse_sql("SELECT * FROM backpacks__joined WHERE wingspan = '2m'")
    report = validate_query(ast, backpacks_engine.schema, backpacks_engine.catalog)
    assert report.status == "rejected"
    assert report.issues[0].kind == "unknown_column"


def test_validate_accepts_enumerated_equality(backpacks_engine):
    ast = parse_sql("SELECT * FROM backpacks__joined WHERE product_size = '15 liter'")
    report = validate_query(ast, backpacks_engine.schema, backpacks_engine.catalog)
    assert report.status == "valid"
    assert report.issues == ()


def test_validate_flags_numeric_comparison_on_text_column(backpacks_engine):
    ast = parse_sql("SELECT * FROM backpacks__joined WHERE color < 4")
    report = validate_query(ast, backpacks_engine.schema, backpacks_engine.catalog)
    assert any(i.kind == "type_mismatch" for i in report.issues)


def test_validate_flags_string_on_number_column(backpacks_engine):
    ast = parse_sql("SELECT * FROM backpacks__joined WHERE price = 'cheap'")
    report = validate_query(ast, backpacks_engine.schema, backpacks_engine.catalog)
    assert any(i.kind == "type_mismatch" for i in report.issues)


def test_validate_flags_wrong_source_view(backpacks_engine):
    ast = parse_sql("SELECT * FROM perfumes__joined WHERE price < 4")
    report = validate_query(ast, backpacks_engine.schema, backpacks_engine.catalog)
    assert any(i.kind == "unsupported_syntax" for i in report.issues)


def test_repair_with_no_issues_is_identity(backpacks_engine):
    ast = parse_sql("SELECT * FROM backpacks__joined WHERE price < 400")
    report = validate_query(ast, backpacks_engine.schema, backpacks_engine.catalog)
    repaired_ast, repaired_report = repair_query(
        ast, report, backpacks_engine.schema, backpacks_engine.catalog
    )
    assert repaired_ast == ast
    assert repaired_report == report


def test_repair_leaves_unknown_columns_alone(backpacks_engine):
    ast = parse_sql("SELECT * FROM backpacks__joined WHERE wingspan = '2m'")
    report = validate_query(ast, backpacks_engine.schema, backpacks_engine.catalog)
    repaired_ast, repaired_report = repair_query(
        ast, report, backpacks_engine.schema, backpacks_engine.catalog
    )
    assert repaired_report.status == "rejected"
    assert atoms_of(repaired_ast.predicate)[0].column == "wingspan"


def test_execute_refuses_rejected_queries(backpacks_engine):
    query = GeneratedQuery(
        question="q",
        raw_sql="SELECT * FROM backpacks__joined;",
        ast=parse_sql("SELECT * FROM backpacks__joined"),
        report=ValidationReport(status="rejected", issues=()),
    )
    with pytest.raises(ContractError):
        execute(query, backpacks_engine.store)


def test_execute_honors_limit(backpacks_engine):
    ast = parse_sql("SELECT product_id FROM backpacks__joined LIMIT 2")
    query = GeneratedQuery("q", "s", ast, ValidationReport(status="valid"))
    assert len(execute(query, backpacks_engine.store)) == 2


def test_execute_empty_result(backpacks_engine):
    ast = parse_sql("SELECT * FROM backpacks__joined WHERE price > 10000")
    query = GeneratedQuery("q", "s", ast, ValidationReport(status="valid"))
    assert execute(query, backpacks_engine.store).rows == ()


def test_execution_is_read_only(backpacks_engine):
    before = backpacks_engine.store.checksum()
    query = _run(backpacks_engine, QUESTION)
    execute(query, backpacks_engine.store)
    assert backpacks_engine.store.checksum() == before


def test_generated_query_parses_from_raw_sql(backpacks_engine):
    query = _run(backpacks_engine, QUESTION)
    assert parse_sql(query.raw_sql) == query.ast
    assert GeneratedQuery.from_dict(query.to_dict()).ast == query.ast


def test_unparseable_completion_raises_semantic_error(backpacks_engine):
    class BrokenProvider:
        def complete_once(self, prompt, config):
            return "I am sorry, I cannot write SQL today."

    gateway = LlmGateway(BrokenProvider())
    with pytest.raises(SemanticParseError) as err:
        text_to_sql(
            "anything",
            backpacks_engine.schema,
            backpacks_engine.catalog,
            DialogState(),
            gateway,
        )
    assert "cannot write SQL" in err.value.completion


def test_empty_question_violates_precondition(backpacks_engine):
    with pytest.raises(ValueError):
        _run(backpacks_engine, "   ")


def test_extract_sql_from_fenced_completion():
    completion = "Here you go:\n```sql\nSELECT * FROM v WHERE a = 1;\n```"
    assert extract_sql(completion) == "SELECT * FROM v WHERE a = 1;"


def test_null_cells_behave_like_sql_three_valued_logic():
    csv_text = (
        "product_id,price,description\n"
        "p1,10,\"A 15-liter backpack in jet black, with a strap handle on top.\"\n"
        "p2,20,\"A 22-liter backpack with a padded grip handle and nothing else.\"\n"
    )
    table = load_context_table(
        io.StringIO(csv_text), IngestConfig(primary_key="product_id"), table_id="nulls"
    )
    engine = build_engine(table)
    ast = parse_sql("SELECT * FROM nulls__joined WHERE color != 'navy'")
    query = GeneratedQuery("q", "s", ast, ValidationReport(status="valid"))
    returned = {row[0] for row in execute(query, engine.store).rows}
    oracle = {
        row["product_id"]
        for row in brute_force_rows(ast, view_rows(engine.store, "nulls__joined"))
    }
    # p2 has no color extraction; NULL != 'navy' is unknown, so p2 is excluded.
    assert returned == oracle == {"p1"}
    engine.store.close()
