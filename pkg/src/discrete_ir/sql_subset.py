"""Hand-rolled parser for the read-only SQL subset the engine accepts.

The grammar (documented in docs/sql-subset.ebnf) covers single-table
SELECT over a pre-joined view: projection, WHERE with and/or/not over
comparison atoms, ORDER BY, LIMIT. Mutation statements are not
representable, so anything the parser returns is safe to execute.

``render`` emits canonical text; ``parse_sql(render(ast)) == ast`` for any
AST the parser itself can produce (n-ary and/or nodes have two or more
children; parenthesized sub-expressions stay explicit nodes).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .errors import ParseError

OPERATORS = ("eq", "neq", "lt", "lte", "gt", "gte", "in", "like", "any")

_OP_TO_SQL = {"eq": "=", "neq": "!=", "lt": "<", "lte": "<=", "gt": ">", "gte": ">="}
_SQL_TO_OP = {"=": "eq", "!=": "neq", "<>": "neq", "<": "lt", "<=": "lte", ">": "gt", ">=": "gte"}

KEYWORDS = {
    "select", "from", "where", "and", "or", "not", "in", "like", "any",
    "order", "by", "limit", "asc", "desc",
}


@dataclass(frozen=True)
class Atom:
    """One comparison: column op literal(s); op "any" clears a filter."""

    column: str
    op: str
    value: Union[str, int, float, tuple, None] = None

    def __post_init__(self) -> None:
        if self.op not in OPERATORS:
            raise ValueError(f"unknown operator {self.op!r}")
        if self.op == "in" and not isinstance(self.value, tuple):
            raise ValueError("IN atom needs a tuple of literals")
        if self.op == "any" and self.value is not None:
            raise ValueError("ANY atom carries no literal")


@dataclass(frozen=True)
class Not:
    child: "Node"


@dataclass(frozen=True)
class And:
    children: tuple["Node", ...]

    def __post_init__(self) -> None:
        if len(self.children) < 2:
            raise ValueError("AND needs at least two children")


@dataclass(frozen=True)
class Or:
    children: tuple["Node", ...]

    def __post_init__(self) -> None:
        if len(self.children) < 2:
            raise ValueError("OR needs at least two children")


Node = Union[Atom, Not, And, Or]


@dataclass(frozen=True)
class QueryAst:
    """A parsed SELECT; projection None means star."""

    source: str
    projection: tuple[str, ...] | None = None
    predicate: Node | None = None
    order_by: tuple[str, str] | None = None
    limit: int | None = None


# -- lexer -------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<string>'(?:[^']|'')*')
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<symbol><=|>=|<>|!=|=|<|>|\(|\)|,|;|\*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # keyword | ident | number | string | symbol | eof
    text: str
    position: int


def tokenize(sql: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(sql):
        match = _TOKEN_RE.match(sql, pos)
        if not match:
            raise ParseError(f"unexpected character {sql[pos]!r}", pos)
        pos = match.end()
        kind = match.lastgroup
        if kind == "ws":
            continue
        text = match.group(0)
        if kind == "ident":
            lowered = text.lower()
            if lowered in KEYWORDS:
                tokens.append(Token("keyword", lowered, match.start()))
            else:
                tokens.append(Token("ident", lowered, match.start()))
        else:
            tokens.append(Token(kind, text, match.start()))
    tokens.append(Token("eof", "", len(sql)))
    return tokens


# -- parser ------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.index = 0

    def peek(self) -> Token:
        return self.tokens[self.index]

    def advance(self) -> Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def match_keyword(self, *words: str) -> Token | None:
        token = self.peek()
        if token.kind == "keyword" and token.text in words:
            return self.advance()
        return None

    def expect_keyword(self, word: str) -> Token:
        token = self.match_keyword(word)
        if token is None:
            got = self.peek()
            raise ParseError(f"expected {word.upper()}, got {got.text!r}", got.position)
        return token

    def expect(self, kind: str, text: str | None = None) -> Token:
        token = self.peek()
        if token.kind != kind or (text is not None and token.text != text):
            raise ParseError(
                f"expected {text or kind}, got {token.text or 'end of input'!r}",
                token.position,
            )
        return self.advance()

    def parse_query(self) -> QueryAst:
        self.expect_keyword("select")
        projection = self.parse_projection()
        self.expect_keyword("from")
        source = self.expect("ident").text
        predicate = None
        if self.match_keyword("where"):
            predicate = self.parse_or()
        order_by = None
        if self.match_keyword("order"):
            self.expect_keyword("by")
            column = self.expect("ident").text
            direction = "asc"
            direction_token = self.match_keyword("asc", "desc")
            if direction_token:
                direction = direction_token.text
            order_by = (column, direction)
        limit = None
        if self.match_keyword("limit"):
            token = self.expect("number")
            if "." in token.text or int(token.text) < 1:
                raise ParseError("LIMIT must be a positive integer", token.position)
            limit = int(token.text)
        if self.peek().kind == "symbol" and self.peek().text == ";":
            self.advance()
        tail = self.peek()
        if tail.kind != "eof":
            raise ParseError(f"unexpected trailing input {tail.text!r}", tail.position)
        return QueryAst(
            source=source,
            projection=projection,
            predicate=predicate,
            order_by=order_by,
            limit=limit,
        )

    def parse_projection(self) -> tuple[str, ...] | None:
        if self.peek().kind == "symbol" and self.peek().text == "*":
            self.advance()
            return None
        columns = [self.expect("ident").text]
        while self.peek().kind == "symbol" and self.peek().text == ",":
            self.advance()
            columns.append(self.expect("ident").text)
        return tuple(columns)

    def parse_or(self) -> Node:
        children = [self.parse_and()]
        while self.match_keyword("or"):
            children.append(self.parse_and())
        return children[0] if len(children) == 1 else Or(tuple(children))

    def parse_and(self) -> Node:
        children = [self.parse_unary()]
        while self.match_keyword("and"):
            children.append(self.parse_unary())
        return children[0] if len(children) == 1 else And(tuple(children))

    def parse_unary(self) -> Node:
        if self.match_keyword("not"):
            return Not(self.parse_unary())
        return self.parse_primary()

    def parse_primary(self) -> Node:
        token = self.peek()
        if token.kind == "symbol" and token.text == "(":
            self.advance()
            inner = self.parse_or()
            self.expect("symbol", ")")
            return inner
        return self.parse_atom()

    def parse_atom(self) -> Atom:
        column = self.expect("ident").text
        token = self.peek()
        if token.kind == "symbol" and token.text in _SQL_TO_OP:
            self.advance()
            return Atom(column=column, op=_SQL_TO_OP[token.text], value=self.parse_literal())
        if self.match_keyword("in"):
            self.expect("symbol", "(")
            values = [self.parse_literal()]
            while self.peek().kind == "symbol" and self.peek().text == ",":
                self.advance()
                values.append(self.parse_literal())
            self.expect("symbol", ")")
            return Atom(column=column, op="in", value=tuple(values))
        if self.match_keyword("like"):
            token = self.expect("string")
            return Atom(column=column, op="like", value=_unquote(token.text))
        if self.match_keyword("any"):
            return Atom(column=column, op="any", value=None)
        raise ParseError(f"expected comparison after column {column!r}", token.position)

    def parse_literal(self) -> str | int | float:
        token = self.peek()
        if token.kind == "number":
            self.advance()
            return float(token.text) if "." in token.text else int(token.text)
        if token.kind == "string":
            self.advance()
            return _unquote(token.text)
        raise ParseError(f"expected literal, got {token.text!r}", token.position)


def _unquote(text: str) -> str:
    return text[1:-1].replace("''", "'")


def parse_sql(sql: str) -> QueryAst:
    """Parse one SELECT statement of the subset grammar.

    Everything else, including any mutation statement, raises ParseError
    with the offending position.
    """
    return _Parser(tokenize(sql)).parse_query()


# -- renderer ----------------------------------------------------------------

def render_literal(value: str | int | float) -> str:
    if isinstance(value, bool):
        raise ValueError("boolean literals are not part of the subset")
    if isinstance(value, (int, float)):
        text = repr(value)
        if not re.fullmatch(r"-?\d+(\.\d+)?", text):
            raise ValueError(f"number {text} outside the plain-decimal subset")
        return text
    return "'" + str(value).replace("'", "''") + "'"


def render_node(node: Node) -> str:
    if isinstance(node, Atom):
        if node.op == "any":
            return f"{node.column} ANY"
        if node.op == "in":
            inner = ", ".join(render_literal(v) for v in node.value)
            return f"{node.column} IN ({inner})"
        if node.op == "like":
            return f"{node.column} LIKE {render_literal(node.value)}"
        return f"{node.column} {_OP_TO_SQL[node.op]} {render_literal(node.value)}"
    if isinstance(node, Not):
        return f"NOT ({render_node(node.child)})"
    joiner = " AND " if isinstance(node, And) else " OR "
    parts = [
        f"({render_node(child)})" if isinstance(child, (And, Or)) else render_node(child)
        for child in node.children
    ]
    return joiner.join(parts)


def render(ast: QueryAst) -> str:
    """Canonical text for an AST; inverse of parse_sql on parser output."""
    projection = "*" if ast.projection is None else ", ".join(ast.projection)
    sql = f"SELECT {projection} FROM {ast.source}"
    if ast.predicate is not None:
        sql += f" WHERE {render_node(ast.predicate)}"
    if ast.order_by is not None:
        column, direction = ast.order_by
        sql += f" ORDER BY {column} {direction.upper()}"
    if ast.limit is not None:
        sql += f" LIMIT {ast.limit}"
    return sql + ";"


def atoms_of(node: Node | None) -> list[Atom]:
    """All atoms anywhere in a predicate tree."""
    if node is None:
        return []
    if isinstance(node, Atom):
        return [node]
    if isinstance(node, Not):
        return atoms_of(node.child)
    result = []
    for child in node.children:
        result.extend(atoms_of(child))
    return result


def top_level_and_atoms(node: Node | None) -> list[Atom]:
    """Atoms conjoined at the top level (the ones safe to fold into state)."""
    if node is None:
        return []
    if isinstance(node, Atom):
        return [node]
    if isinstance(node, And):
        return [child for child in node.children if isinstance(child, Atom)]
    return []


def rewrite_atoms(node: Node, replace) -> Node:
    """Structurally rewrite atoms via ``replace(atom) -> atom``."""
    if isinstance(node, Atom):
        return replace(node)
    if isinstance(node, Not):
        return Not(rewrite_atoms(node.child, replace))
    children = tuple(rewrite_atoms(child, replace) for child in node.children)
    return And(children) if isinstance(node, And) else Or(children)
