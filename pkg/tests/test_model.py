import pytest
from hypothesis import given
from hypothesis import strategies as st

from discrete_ir.errors import ColumnNameError, IntegrityError, SchemaError
from discrete_ir.model import (
    Constraint,
    ContextTable,
    DialogState,
    EnumerationCatalog,
    ExtractionSet,
    KeyValueTuple,
    ValueKind,
    normalize_column_name,
    sorted_distinct,
)


def test_normalize_spaces_to_underscores():
    assert normalize_column_name("Product Size").normalized == "product_size"


def test_normalize_is_identity_on_normalized_input():
    assert normalize_column_name("product_size").normalized == "product_size"


def test_normalize_strips_punctuation_runs():
    assert normalize_column_name("No.-of-Pockets").normalized == "no_of_pockets"


def test_normalize_empty_raises():
    with pytest.raises(ColumnNameError):
        normalize_column_name("   ")


def test_normalize_pure_punctuation_raises():
    with pytest.raises(ColumnNameError):
        normalize_column_name("--!!--")


def test_normalize_truncates_to_64_chars():
    name = normalize_column_name("x" * 100)
    assert len(name.normalized) == 64


def test_normalize_truncation_never_leaves_trailing_underscore():
    raw = "a" * 63 + " tail"
    name = normalize_column_name(raw)
    assert not name.normalized.endswith("_")
    assert len(name.normalized) <= 64


@given(st.text(min_size=1).filter(lambda s: s.strip()))
def test_normalize_idempotent_and_total(raw):
    try:
        first = normalize_column_name(raw)
    except ColumnNameError:
        return
    again = normalize_column_name(first.normalized)
    assert again.normalized == first.normalized


@given(st.lists(st.sampled_from(["15 liter", "22 liter", "strap", "black", "navy"])))
def test_sorted_distinct_is_order_independent(values):
    assert sorted_distinct(values) == sorted_distinct(reversed(values))
    out = sorted_distinct(values)
    assert list(out) == sorted(set(out))


def _table(rows):
    pk = normalize_column_name("product_id")
    return ContextTable(
        table_id="backpacks",
        domain_id="backpacks",
        primary_key=pk,
        structured_columns=(
            (normalize_column_name("title"), ValueKind.TEXT),
            (normalize_column_name("price"), ValueKind.NUMBER),
        ),
        text_columns=(normalize_column_name("description"),),
        rows=tuple(rows),
    )


def test_context_table_accepts_unique_keys():
    table = _table([
        {"product_id": "p1", "title": "A", "price": 10, "description": "x"},
        {"product_id": "p2", "title": "B", "price": 20, "description": "y"},
    ])
    assert table.primary_key_values() == ("p1", "p2")


def test_context_table_rejects_duplicate_primary_key():
    with pytest.raises(IntegrityError) as err:
        _table([
            {"product_id": "p1", "title": "A", "price": 10, "description": "x"},
            {"product_id": "p1", "title": "B", "price": 20, "description": "y"},
        ])
    assert err.value.keys == ["p1"]


def test_context_table_rejects_null_primary_key():
    with pytest.raises(IntegrityError):
        _table([{"product_id": None, "title": "A", "price": 1, "description": "x"}])


def test_context_table_rejects_missing_slot():
    with pytest.raises(SchemaError):
        _table([{"product_id": "p1", "title": "A", "price": 1}])


def test_context_table_rejects_text_structured_overlap():
    pk = normalize_column_name("id")
    with pytest.raises(SchemaError):
        ContextTable(
            table_id="t",
            domain_id="t",
            primary_key=pk,
            structured_columns=((normalize_column_name("description"), ValueKind.TEXT),),
            text_columns=(normalize_column_name("description"),),
            rows=(),
        )


def test_context_table_round_trips_through_dict():
    table = _table([
        {"product_id": "p1", "title": "A", "price": 10.5, "description": "x"},
    ])
    assert ContextTable.from_dict(table.to_dict()) == table


def test_key_value_tuple_rejects_oversized_value():
    with pytest.raises(ValueError):
        KeyValueTuple(key=normalize_column_name("k"), value="v" * 200)


def test_key_value_tuple_rejects_unnormalized_value():
    with pytest.raises(ValueError):
        KeyValueTuple(key=normalize_column_name("k"), value="  Black ")


def test_extraction_set_rejects_duplicate_keys_per_row():
    k = normalize_column_name("color")
    with pytest.raises(ValueError):
        ExtractionSet(
            table_id="t",
            per_row={"p1": (KeyValueTuple(k, "black"), KeyValueTuple(k, "navy"))},
        )


def test_extraction_set_round_trips_through_dict():
    k = normalize_column_name("color")
    extractions = ExtractionSet(
        table_id="t",
        per_row={"p1": (KeyValueTuple(k, "black"),), "p2": ()},
        failed={"p2": "no parseable array"},
    )
    assert ExtractionSet.from_dict(extractions.to_dict()) == extractions


def test_catalog_rejects_unsorted_values():
    with pytest.raises(ValueError):
        EnumerationCatalog(table_id="t", entries={"size": ("22 liter", "15 liter")})


def test_catalog_rejects_empty_value_list():
    with pytest.raises(ValueError):
        EnumerationCatalog(table_id="t", entries={"size": ()})


def test_catalog_rejects_non_idempotent_consolidation():
    with pytest.raises(ValueError):
        EnumerationCatalog(
            table_id="t",
            entries={"b": ("1",)},
            consolidation_map={"a": "b", "b": "c"},
        )


def test_catalog_round_trips_through_dict():
    catalog = EnumerationCatalog(
        table_id="t",
        entries={"product_size": ("15 liter", "22 liter")},
        support={"product_size": 2},
        consolidation_map={"product_size": "product_size"},
        dropped=(("number_of_pockets", "name longer than 2 words"),),
    )
    assert EnumerationCatalog.from_dict(catalog.to_dict()) == catalog


def test_dialog_state_replaces_constraint_per_column():
    state = DialogState(active_table="backpacks")
    state = state.with_constraint(Constraint("color", "neq", "black", 1))
    state = state.with_constraint(Constraint("color", "eq", "red", 2))
    assert state.constraints["color"].op == "eq"
    assert state.constraints["color"].operand == "red"


def test_dialog_state_removal_and_round_trip():
    state = DialogState(active_table="backpacks")
    state = state.with_constraint(Constraint("price", "lt", 400, 1))
    state = state.with_constraint(Constraint("color", "neq", "black", 1))
    assert DialogState.from_dict(state.to_dict()) == state
    assert "price" not in state.without_column("price").constraints


def test_constraint_rejects_unknown_operator():
    with pytest.raises(ValueError):
        Constraint("color", "matches", "black")
