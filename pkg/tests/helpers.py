"""Independent brute-force evaluator used as the test oracle.

Implements SQL three-valued logic over plain Python rows, without touching
the SQL store or the query engine's compilation path.
"""

from __future__ import annotations

import re

from discrete_ir.sql_subset import And, Atom, Node, Not, QueryAst


def like_match(pattern: str, text: str) -> bool:
    regex = "".join(
        ".*" if ch == "%" else "." if ch == "_" else re.escape(ch) for ch in pattern
    )
    return re.fullmatch(regex, text, re.IGNORECASE) is not None


def eval_node(node: Node, row: dict) -> bool | None:
    """Kleene 3VL: None is unknown, and a row matches only on True."""
    if isinstance(node, Atom):
        if node.op == "any":
            return True
        cell = row.get(node.column)
        if cell is None:
            return None
        if node.op == "eq":
            return cell == node.value
        if node.op == "neq":
            return cell != node.value
        if node.op == "in":
            return cell in node.value
        if node.op == "like":
            return like_match(str(node.value), str(cell))
        if node.op == "lt":
            return cell < node.value
        if node.op == "lte":
            return cell <= node.value
        if node.op == "gt":
            return cell > node.value
        if node.op == "gte":
            return cell >= node.value
        raise AssertionError(node.op)
    if isinstance(node, Not):
        inner = eval_node(node.child, row)
        return None if inner is None else not inner
    values = [eval_node(child, row) for child in node.children]
    if isinstance(node, And):
        if any(v is False for v in values):
            return False
        return None if any(v is None for v in values) else True
    if any(v is True for v in values):
        return True
    return None if any(v is None for v in values) else False


def brute_force_rows(ast: QueryAst, rows: list[dict]) -> list[dict]:
    """Rows matching the predicate, ignoring projection/order/limit."""
    if ast.predicate is None:
        return list(rows)
    return [row for row in rows if eval_node(ast.predicate, row) is True]


def view_rows(store, view_name: str) -> list[dict]:
    cursor = store.execute(f'SELECT * FROM "{view_name}"')
    columns = [d[0] for d in cursor.description]
    return [dict(zip(columns, row)) for row in cursor.fetchall()]
