"""Multi-turn agent: route the question, query the table, keep dialog state.

Each user utterance drives one Thought/Action/Observation cycle: the thought
records routing and parsing rationale, the action is a query against the
routed table, the observation summarizes the result set, and the response is
templated (deterministic, so sessions replay bit-identically with the mock
provider). Parsed queries fold into a per-column constraint state.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .errors import AgentBudgetError, RoutingError, SemanticParseError
from .llm import LlmGateway
from .model import Constraint, DialogState, EnumerationCatalog
from .sql_subset import top_level_and_atoms
from .store import JoinedSchema, Store
from .text2sql import GeneratedQuery, ResultSet, execute, text_to_sql

DEFAULT_SWITCH_MARGIN = 2.0
DEFAULT_MAX_ITERATIONS = 3
DEFAULT_SAMPLE_ROWS = 5

_WORD = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class AgentTurn:
    """One full cycle for one user utterance."""

    turn_index: int
    utterance: str
    thought: str
    action: tuple[str, dict]  # (tool, arguments); tool in {query_table, respond}
    observation: dict | None
    response: str
    state_after: DialogState
    query: GeneratedQuery | None = None
    routed_table: str | None = None

    def __post_init__(self) -> None:
        tool, _ = self.action
        if tool == "query_table" and self.observation is None:
            raise ValueError("query_table turns must carry an observation")

    def to_dict(self) -> dict:
        return {
            "turn_index": self.turn_index,
            "utterance": self.utterance,
            "thought": self.thought,
            "action": {"tool": self.action[0], "arguments": self.action[1]},
            "observation": self.observation,
            "response": self.response,
            "state_after": self.state_after.to_dict(),
            "query": self.query.to_dict() if self.query else None,
            "routed_table": self.routed_table,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AgentTurn":
        return cls(
            turn_index=doc["turn_index"],
            utterance=doc["utterance"],
            thought=doc["thought"],
            action=(doc["action"]["tool"], doc["action"]["arguments"]),
            observation=doc["observation"],
            response=doc["response"],
            state_after=DialogState.from_dict(doc["state_after"]),
            query=GeneratedQuery.from_dict(doc["query"]) if doc.get("query") else None,
            routed_table=doc.get("routed_table"),
        )


@dataclass
class Session:
    """Strictly sequential conversation over the registered tables."""

    session_id: str
    dialog_state: DialogState = field(default_factory=DialogState)
    turns: list[AgentTurn] = field(default_factory=list)
    routing_history: list[str] = field(default_factory=list)

    @property
    def routed_table(self) -> str | None:
        return self.routing_history[-1] if self.routing_history else None

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "dialog_state": self.dialog_state.to_dict(),
            "routing_history": list(self.routing_history),
            "turns": [t.to_dict() for t in self.turns],
        }


# -- routing -----------------------------------------------------------------

def _vocabulary_tokens(catalog: EnumerationCatalog, domain_id: str = "") -> set[str]:
    tokens: set[str] = set()
    for source in (catalog.table_id, domain_id):
        tokens.update(_WORD.findall(source.lower()))
    for column, values in catalog.entries.items():
        tokens.update(column.split("_"))
        for value in values:
            tokens.update(_WORD.findall(value.lower()))
    # Plural table names should still match singular mentions.
    tokens.update({t[:-1] for t in list(tokens) if t.endswith("s") and len(t) > 3})
    return tokens


def score_table(question: str, catalog: EnumerationCatalog, domain_id: str = "") -> int:
    """Count distinct question tokens found in the table's vocabulary."""
    question_tokens = set(_WORD.findall(question.lower()))
    question_tokens.update(
        {t[:-1] for t in list(question_tokens) if t.endswith("s") and len(t) > 3}
    )
    return len(question_tokens & _vocabulary_tokens(catalog, domain_id))


def route_table(
    question: str,
    catalogs: Sequence[EnumerationCatalog],
    domain_ids: Mapping[str, str] | None = None,
    current: str | None = None,
    switch_margin: float = DEFAULT_SWITCH_MARGIN,
) -> str:
    """Pick the best table for a question by lexical overlap.

    Routing is sticky: with a current table, another one takes over only if
    its score exceeds the current score by ``switch_margin``.
    """
    if not catalogs:
        raise RoutingError("no tables registered")
    if len(catalogs) == 1:
        return catalogs[0].table_id
    domain_ids = domain_ids or {}
    scores = {
        c.table_id: score_table(question, c, domain_ids.get(c.table_id, ""))
        for c in catalogs
    }
    best = min(scores, key=lambda t: (-scores[t], t))
    if current is None or current not in scores:
        if scores[best] == 0:
            raise RoutingError(f"no table matches the question: {question!r}")
        return best
    if best != current and scores[best] > switch_margin * scores[current]:
        return best
    return current


# -- dialog state -------------------------------------------------------------

def update_dialog_state(
    state: DialogState,
    query: GeneratedQuery,
    turn_index: int | None = None,
) -> DialogState:
    """Fold a parsed query into the constraint state.

    Only top-level AND-connected atoms are promoted (OR/NOT semantics across
    turns are ambiguous); an ANY atom clears its column's constraint; newer
    constraints replace older ones per column.
    """
    if query.report.status not in ("valid", "repaired"):
        raise ValueError(f"cannot fold a {query.report.status} query into state")
    if turn_index is None:
        existing = [c.turn_index for c in state.constraints.values()]
        turn_index = max(existing, default=-1) + 1
    result = state
    for atom in top_level_and_atoms(query.ast.predicate):
        if atom.op == "any":
            result = result.without_column(atom.column)
        else:
            result = result.with_constraint(
                Constraint(atom.column, atom.op, atom.value, turn_index)
            )
    return result


def replay_dialog_state(session: Session) -> DialogState:
    """Recompute state by folding every turn's query; must match stored state.

    A table switch resets constraints, exactly as the live agent does.
    """
    state = DialogState()
    for turn in session.turns:
        if turn.query is None or turn.query.report.status not in ("valid", "repaired"):
            continue
        if turn.routed_table and turn.routed_table != state.active_table:
            state = DialogState(active_table=turn.routed_table)
        state = update_dialog_state(state, turn.query, turn.turn_index)
    return state


# -- the step ------------------------------------------------------------------

@dataclass
class TableRuntime:
    """Everything the agent needs to query one table."""

    table_id: str
    domain_id: str
    schema: JoinedSchema
    catalog: EnumerationCatalog
    store: Store


@dataclass
class AgentRuntime:
    """Registered tables plus the shared completion gateway."""

    gateway: LlmGateway
    tables: dict[str, TableRuntime]
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    sample_rows: int = DEFAULT_SAMPLE_ROWS
    switch_margin: float = DEFAULT_SWITCH_MARGIN


RESPONSE_FOUND = "Found {count} matching item(s) in {table}."
RESPONSE_EMPTY = (
    "No items match the current constraints. "
    "You can relax one, for example: 'any {column}'."
)
RESPONSE_NO_ROUTE = (
    "I couldn't tell which table that question is about. "
    "Could you mention the product domain?"
)
RESPONSE_REJECTED = (
    "I couldn't turn that into a safe query ({reasons}). Could you rephrase?"
)


def step(session: Session, utterance: str, runtime: AgentRuntime) -> AgentTurn:
    """Run one agent cycle for a user utterance and append it to the session."""
    if not utterance or not utterance.strip():
        raise ValueError("utterance is empty")
    turn_index = len(session.turns)
    thought_lines: list[str] = []

    try:
        routed = route_table(
            utterance,
            [t.catalog for t in runtime.tables.values()],
            {t.table_id: t.domain_id for t in runtime.tables.values()},
            current=session.routed_table,
            switch_margin=runtime.switch_margin,
        )
    except RoutingError:
        thought_lines.append("No registered table overlaps the question; asking for help.")
        return _append(session, AgentTurn(
            turn_index=turn_index,
            utterance=utterance,
            thought="\n".join(thought_lines),
            action=("respond", {"reason": "routing_failed"}),
            observation=None,
            response=RESPONSE_NO_ROUTE,
            state_after=session.dialog_state,
            routed_table=None,
        ))

    thought_lines.append(f"Routing the question to table {routed!r} (sticky).")
    table = runtime.tables[routed]
    state = session.dialog_state
    if state.active_table != routed:
        thought_lines.append(f"Switching active table to {routed!r}; constraints reset.")
        state = DialogState(active_table=routed)

    tool_calls = 0
    if tool_calls >= runtime.max_iterations:
        raise AgentBudgetError(
            "tool-call budget exhausted before querying",
            partial_trace=thought_lines,
        )
    try:
        query = text_to_sql(utterance, table.schema, table.catalog, state, runtime.gateway)
    except SemanticParseError as exc:
        thought_lines.append(f"The parser produced no usable SQL: {exc}.")
        return _append(session, AgentTurn(
            turn_index=turn_index,
            utterance=utterance,
            thought="\n".join(thought_lines),
            action=("respond", {"reason": "unparseable"}),
            observation=None,
            response=RESPONSE_REJECTED.format(reasons="unparseable SQL"),
            state_after=session.dialog_state,
            routed_table=routed,
        ))
    tool_calls += 1
    thought_lines.append(
        f"Compiled the question to SQL with status {query.report.status!r}."
    )

    if query.report.status == "rejected":
        reasons = "; ".join(i.kind for i in query.report.issues) or "validation failed"
        return _append(session, AgentTurn(
            turn_index=turn_index,
            utterance=utterance,
            thought="\n".join(thought_lines),
            action=("respond", {"reason": "rejected_query"}),
            observation=None,
            response=RESPONSE_REJECTED.format(reasons=reasons),
            query=query,
            state_after=session.dialog_state,
            routed_table=routed,
        ))

    result = execute(query, table.store)
    observation = summarize_result(result, runtime.sample_rows)
    state_after = update_dialog_state(state, query, turn_index)
    if result.rows:
        response = RESPONSE_FOUND.format(count=len(result.rows), table=routed)
    else:
        relaxable = sorted(state_after.constraints) or ["color"]
        response = RESPONSE_EMPTY.format(column=relaxable[0])
    return _append(session, AgentTurn(
        turn_index=turn_index,
        utterance=utterance,
        thought="\n".join(thought_lines),
        action=("query_table", {"table_id": routed, "sql": query.raw_sql}),
        observation=observation,
        response=response,
        query=query,
        state_after=state_after,
        routed_table=routed,
    ))


def _append(session: Session, turn: AgentTurn) -> AgentTurn:
    session.turns.append(turn)
    if turn.routed_table is not None:
        session.routing_history.append(turn.routed_table)
    session.dialog_state = turn.state_after
    return turn


def summarize_result(result: ResultSet, sample_rows: int) -> dict:
    return {
        "columns": list(result.columns),
        "row_count": len(result.rows),
        "sample_rows": [list(r) for r in result.rows[:sample_rows]],
    }


# -- persistence ---------------------------------------------------------------

class SessionStorage:
    """Append-only JSONL persistence, one file per session."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        safe = re.sub(r"[^A-Za-z0-9_-]", "_", session_id)
        return self.directory / f"{safe}.jsonl"

    def append(self, session_id: str, turn: AgentTurn) -> None:
        with open(self._path(session_id), "a", encoding="utf-8") as stream:
            stream.write(json.dumps(turn.to_dict(), sort_keys=True) + "\n")

    def exists(self, session_id: str) -> bool:
        return self._path(session_id).exists()

    def load(self, session_id: str) -> Session:
        session = Session(session_id=session_id)
        path = self._path(session_id)
        if not path.exists():
            return session
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            turn = AgentTurn.from_dict(json.loads(line))
            session.turns.append(turn)
            if turn.routed_table is not None:
                session.routing_history.append(turn.routed_table)
            session.dialog_state = turn.state_after
        return session
