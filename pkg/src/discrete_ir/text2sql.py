"""Compile questions to validated SQL over the joined view, then execute.

Validation grounds every generated query against the joined schema and the
enumeration catalog: unknown columns are fatal, near-miss enumeration
literals are repaired by edit distance, type mismatches are flagged. The
engine executes nothing that failed validation.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .errors import ContractError, ParseError, SemanticParseError
from .llm import LlmGateway, build_text2sql_prompt, estimate_tokens
from .model import DialogState, EnumerationCatalog, ValueKind
from .sql_subset import And, Atom, Node, Not, Or, QueryAst, parse_sql, render
from .store import JoinedSchema, Store

log = logging.getLogger(__name__)

REPAIR_DISTANCE_THRESHOLD = 0.25

VALID = "valid"
REPAIRED = "repaired"
REJECTED = "rejected"


@dataclass(frozen=True)
class Issue:
    kind: str  # unknown_column | non_enum_value | type_mismatch | unsupported_syntax
    location: str
    detail: str
    suggestion: str | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "location": self.location,
            "detail": self.detail,
            "suggestion": self.suggestion,
        }


@dataclass(frozen=True)
class Repair:
    location: str
    before: str
    after: str

    def to_dict(self) -> dict:
        return {"location": self.location, "before": self.before, "after": self.after}


@dataclass(frozen=True)
class ValidationReport:
    status: str
    issues: tuple[Issue, ...] = ()
    repairs: tuple[Repair, ...] = ()

    def __post_init__(self) -> None:
        if self.status == VALID and self.issues:
            raise ValueError("a valid report cannot carry issues")
        if self.status == REPAIRED and not self.repairs:
            raise ValueError("a repaired report must list repairs")

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "issues": [i.to_dict() for i in self.issues],
            "repairs": [r.to_dict() for r in self.repairs],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ValidationReport":
        return cls(
            status=doc["status"],
            issues=tuple(Issue(**i) for i in doc.get("issues", [])),
            repairs=tuple(Repair(**r) for r in doc.get("repairs", [])),
        )


@dataclass(frozen=True)
class GeneratedQuery:
    """A question with its compiled, validated query."""

    question: str
    raw_sql: str
    ast: QueryAst
    report: ValidationReport
    prompt_tokens: int = 0

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "raw_sql": self.raw_sql,
            "report": self.report.to_dict(),
            "prompt_tokens": self.prompt_tokens,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GeneratedQuery":
        return cls(
            question=doc["question"],
            raw_sql=doc["raw_sql"],
            ast=parse_sql(doc["raw_sql"]),
            report=ValidationReport.from_dict(doc["report"]),
            prompt_tokens=doc.get("prompt_tokens", 0),
        )


@dataclass(frozen=True)
class ResultSet:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "rows": [list(r) for r in self.rows]}

    def __len__(self) -> int:
        return len(self.rows)


# -- edit distance ------------------------------------------------------------

def edit_distance(a: str, b: str) -> int:
    """Optimal string alignment distance (transpositions count as one edit)."""
    rows, cols = len(a) + 1, len(b) + 1
    previous2: list[int] = []
    previous = list(range(cols))
    for i in range(1, rows):
        current = [i] + [0] * (cols - 1)
        for j in range(1, cols):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            current[j] = min(
                previous[j] + 1,        # deletion
                current[j - 1] + 1,     # insertion
                previous[j - 1] + cost, # substitution
            )
            if (
                i > 1 and j > 1
                and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]
            ):
                current[j] = min(current[j], previous2[j - 2] + 1)
        previous2, previous = previous, current
    return previous[-1]


def normalized_distance(a: str, b: str) -> float:
    return edit_distance(a, b) / max(len(a), len(b), 1)


def nearest_value(value: str, candidates: tuple[str, ...]) -> tuple[str, float]:
    """Closest enumeration value and its normalized distance."""
    best = min(candidates, key=lambda c: (normalized_distance(value, c), c))
    return best, normalized_distance(value, best)


# -- validation ---------------------------------------------------------------

_NUMERIC_KINDS = (ValueKind.NUMBER, ValueKind.BOOLEAN)


def _check_literal(
    atom: Atom,
    literal,
    location: str,
    kind: ValueKind,
    origin: str,
    enum: tuple[str, ...] | None,
) -> tuple[Issue | None, object]:
    """Validate one literal; returns (issue, possibly-repaired literal)."""
    is_number = isinstance(literal, (int, float)) and not isinstance(literal, bool)
    if atom.op in ("lt", "lte", "gt", "gte"):
        if kind not in _NUMERIC_KINDS:
            return Issue(
                "type_mismatch", location,
                f"numeric comparison on text column {atom.column!r}",
            ), literal
        if not is_number:
            return Issue(
                "type_mismatch", location,
                f"comparison against non-number {literal!r}",
            ), literal
        return None, literal
    if atom.op == "like":
        if kind in _NUMERIC_KINDS:
            return Issue(
                "type_mismatch", location,
                f"LIKE on non-text column {atom.column!r}",
            ), literal
        return None, literal
    # eq / neq / in
    if kind in _NUMERIC_KINDS:
        if not is_number:
            return Issue(
                "type_mismatch", location,
                f"number column {atom.column!r} compared to {literal!r}",
            ), literal
        return None, literal
    if is_number:
        return Issue(
            "type_mismatch", location,
            f"text column {atom.column!r} compared to number {literal!r}",
        ), literal
    if origin == "inference" and enum is not None and literal not in enum:
        suggestion, distance = nearest_value(str(literal), enum)
        if distance <= REPAIR_DISTANCE_THRESHOLD:
            return Issue(
                "non_enum_value", location,
                f"{literal!r} is not an enumerated value of {atom.column!r}",
                suggestion=suggestion,
            ), suggestion
        return Issue(
            "non_enum_value", location,
            f"{literal!r} is not an enumerated value of {atom.column!r}",
        ), literal
    return None, literal


def _check_atom(
    atom: Atom,
    index: int,
    schema: JoinedSchema,
    catalog: EnumerationCatalog,
) -> tuple[list[Issue], Atom]:
    location = f"predicate.atom[{index}].{atom.column}"
    kind = schema.kind_of(atom.column)
    if kind is None:
        return [Issue("unknown_column", location, f"unknown column {atom.column!r}")], atom
    if atom.op == "any":
        return [], atom
    origin = schema.origin_of(atom.column) or "context"
    enum = catalog.entries.get(atom.column)
    issues: list[Issue] = []
    if atom.op == "in":
        new_values = []
        for position, literal in enumerate(atom.value):
            issue, fixed = _check_literal(
                atom, literal, f"{location}[{position}]", kind, origin, enum
            )
            if issue:
                issues.append(issue)
            new_values.append(fixed)
        return issues, Atom(atom.column, atom.op, tuple(new_values))
    issue, fixed = _check_literal(atom, atom.value, location, kind, origin, enum)
    if issue:
        issues.append(issue)
    return issues, Atom(atom.column, atom.op, fixed)


def _walk_atoms(node: Node, visit, counter: list[int]) -> Node:
    if isinstance(node, Atom):
        index = counter[0]
        counter[0] += 1
        return visit(node, index)
    if isinstance(node, Not):
        return Not(_walk_atoms(node.child, visit, counter))
    children = tuple(_walk_atoms(child, visit, counter) for child in node.children)
    return And(children) if isinstance(node, And) else Or(children)


def validate_query(
    ast: QueryAst,
    schema: JoinedSchema,
    catalog: EnumerationCatalog,
) -> ValidationReport:
    """Ground a parsed query against the schema and enumerations."""
    issues: list[Issue] = []
    known = {c.normalized for c, _, _ in schema.columns}
    if ast.source != schema.view_name:
        issues.append(Issue(
            "unsupported_syntax", "source",
            f"query targets {ast.source!r}, expected {schema.view_name!r}",
        ))
    for name in ast.projection or ():
        if name not in known:
            issues.append(Issue(
                "unknown_column", f"projection.{name}", f"unknown column {name!r}"
            ))
    if ast.order_by and ast.order_by[0] not in known:
        issues.append(Issue(
            "unknown_column", "order_by", f"unknown column {ast.order_by[0]!r}"
        ))
    if ast.predicate is not None:
        def visit(atom: Atom, index: int) -> Atom:
            atom_issues, _ = _check_atom(atom, index, schema, catalog)
            issues.extend(atom_issues)
            return atom
        _walk_atoms(ast.predicate, visit, [0])
    status = VALID if not issues else REJECTED
    return ValidationReport(status=status, issues=tuple(issues))


def repair_query(
    ast: QueryAst,
    report: ValidationReport,
    schema: JoinedSchema,
    catalog: EnumerationCatalog,
) -> tuple[QueryAst, ValidationReport]:
    """Rewrite near-miss enumeration literals; never touch unknown columns.

    Issues that cannot be repaired stay in the report and force rejection.
    """
    if not report.issues:
        return ast, report
    repairs: list[Repair] = []
    remaining = [i for i in report.issues if i.kind != "non_enum_value"]
    new_predicate = ast.predicate
    if ast.predicate is not None:
        def visit(atom: Atom, index: int) -> Atom:
            atom_issues, fixed = _check_atom(atom, index, schema, catalog)
            remaining.extend(
                issue for issue in atom_issues
                if issue.kind == "non_enum_value" and issue.suggestion is None
            )
            if atom.op == "in":
                for position, (before, after) in enumerate(zip(atom.value, fixed.value)):
                    if before != after:
                        repairs.append(Repair(
                            location=f"predicate.atom[{index}].{atom.column}[{position}]",
                            before=str(before),
                            after=str(after),
                        ))
            elif fixed.value != atom.value:
                repairs.append(Repair(
                    location=f"predicate.atom[{index}].{atom.column}",
                    before=str(atom.value),
                    after=str(fixed.value),
                ))
            return fixed
        new_predicate = _walk_atoms(ast.predicate, visit, [0])
    new_ast = QueryAst(
        source=ast.source,
        projection=ast.projection,
        predicate=new_predicate,
        order_by=ast.order_by,
        limit=ast.limit,
    )
    if remaining:
        return new_ast, ValidationReport(
            status=REJECTED, issues=tuple(remaining), repairs=tuple(repairs)
        )
    if repairs:
        return new_ast, ValidationReport(status=REPAIRED, repairs=tuple(repairs))
    return new_ast, report


# -- question to query --------------------------------------------------------

_SELECT_RE = re.compile(r"\bSELECT\b.*?(?:;|$)", re.IGNORECASE | re.DOTALL)


def extract_sql(completion: str) -> str | None:
    """First SELECT statement in a completion, fences and prose tolerated."""
    text = completion.replace("```sql", " ").replace("```", " ")
    match = _SELECT_RE.search(text)
    return match.group(0).strip() if match else None


FEEDBACK_HEADER = "\n\nYour previous answer had problems:\n"
FEEDBACK_FOOTER = "\nRespond with a corrected SQL SELECT statement."


@dataclass(frozen=True)
class _Attempt:
    completion: str
    ast: QueryAst | None = None
    report: ValidationReport | None = None
    error: str | None = None

    @property
    def accepted(self) -> bool:
        return self.report is not None and self.report.status in (VALID, REPAIRED)


def _attempt(
    prompt: str,
    gateway: LlmGateway,
    schema: JoinedSchema,
    catalog: EnumerationCatalog,
) -> _Attempt:
    completion = gateway.complete(prompt)
    sql = extract_sql(completion)
    if sql is None:
        return _Attempt(completion, error="no SELECT statement found in completion")
    try:
        ast = parse_sql(sql)
    except ParseError as exc:
        return _Attempt(completion, error=f"SQL failed to parse: {exc}")
    report = validate_query(ast, schema, catalog)
    if report.issues:
        ast, report = repair_query(ast, report, schema, catalog)
    return _Attempt(completion, ast=ast, report=report)


def text_to_sql(
    question: str,
    schema: JoinedSchema,
    catalog: EnumerationCatalog,
    state: DialogState,
    gateway: LlmGateway,
) -> GeneratedQuery:
    """Full question-to-validated-query pipeline with one feedback retry."""
    if not question or not question.strip():
        raise ValueError("question is empty")
    prompt = build_text2sql_prompt(
        question, schema, catalog, state, gateway.text2sql_template
    )
    prompt_tokens = estimate_tokens(prompt)

    first = _attempt(prompt, gateway, schema, catalog)
    if first.accepted:
        return GeneratedQuery(
            question, render(first.ast), first.ast, first.report, prompt_tokens
        )

    if first.error is not None:
        feedback = f"* {first.error}"
    else:
        feedback = "\n".join(
            f"* {issue.kind}: {issue.detail}" for issue in first.report.issues
        )
    retry_prompt = prompt + FEEDBACK_HEADER + feedback + FEEDBACK_FOOTER
    second = _attempt(retry_prompt, gateway, schema, catalog)
    prompt_tokens += estimate_tokens(retry_prompt)

    outcome = second if second.ast is not None else first
    if outcome.ast is None:
        raise SemanticParseError(
            f"no usable SQL after retry: {second.error}", completion=second.completion
        )
    return GeneratedQuery(
        question, render(outcome.ast), outcome.ast, outcome.report, prompt_tokens
    )


# -- execution ----------------------------------------------------------------

def _compile_node(node: Node, params: list) -> str:
    if isinstance(node, Atom):
        column = f'"{node.column}"'
        if node.op == "any":
            return "1"
        if node.op == "in":
            placeholders = ", ".join("?" for _ in node.value)
            params.extend(node.value)
            return f"{column} IN ({placeholders})"
        if node.op == "like":
            params.append(node.value)
            return f"{column} LIKE ?"
        sql_op = {"eq": "=", "neq": "!=", "lt": "<", "lte": "<=", "gt": ">", "gte": ">="}[node.op]
        params.append(node.value)
        return f"{column} {sql_op} ?"
    if isinstance(node, Not):
        return f"NOT ({_compile_node(node.child, params)})"
    joiner = " AND " if isinstance(node, And) else " OR "
    return joiner.join(f"({_compile_node(c, params)})" for c in node.children)


def compile_for_store(ast: QueryAst) -> tuple[str, tuple]:
    """Translate the AST to parameterized SQLite SQL."""
    projection = "*" if ast.projection is None else ", ".join(
        f'"{c}"' for c in ast.projection
    )
    sql = f'SELECT {projection} FROM "{ast.source}"'
    params: list = []
    if ast.predicate is not None:
        sql += f" WHERE {_compile_node(ast.predicate, params)}"
    if ast.order_by is not None:
        column, direction = ast.order_by
        sql += f' ORDER BY "{column}" {direction.upper()}'
    if ast.limit is not None:
        sql += f" LIMIT {ast.limit}"
    return sql, tuple(params)


def execute(query: GeneratedQuery, store: Store) -> ResultSet:
    """Run a validated query against the joined view, read-only."""
    if query.report.status not in (VALID, REPAIRED):
        raise ContractError(
            f"refusing to execute a {query.report.status} query: {query.raw_sql}"
        )
    sql, params = compile_for_store(query.ast)
    cursor = store.execute(sql, params)
    columns = tuple(d[0] for d in cursor.description)
    rows = tuple(tuple(row) for row in cursor.fetchall())
    log.debug("executed %s -> %d rows", sql, len(rows))
    return ResultSet(columns=columns, rows=rows)
