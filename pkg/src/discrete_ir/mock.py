"""Deterministic mock completion provider for hermetic runs.

Two behaviors, selected by inspecting the rendered prompt:

- discretize prompts: a keyword-lexicon extractor. The lexicon maps surface
  phrases to (key, value) pairs; the mock scans the prompt payload for those
  phrases (longest first, word-aligned) and emits a JSON array of pairs in
  order of first occurrence.
- text-to-SQL prompts: a rule-based compiler over a small constraint grammar.
  It grounds enum-value mentions to their columns, understands negation cues
  and price comparators, folds in the prompt's dialog-state constraints, and
  emits a single SELECT statement.

Completions are a pure function of the prompt text, so every pipeline test
can run end to end with no network and no nondeterminism.
"""

from __future__ import annotations

import json
import re
from typing import Mapping, Sequence

from .llm import ProviderConfig, TransportFailure, extract_payload

_T2S_BODY_MARKER = "Now answer for the following question."

_SCHEMA_LINE = re.compile(r"^- ([a-z0-9_]+) \((number|text|boolean), (context|inference)\)$")
_ENUM_LINE = re.compile(r"^- ([a-z0-9_]+): (.+)$")
_STATE_LINE = re.compile(r"^- ([a-z0-9_]+) (eq|neq|lt|lte|gt|gte|in|like) (.+)$")
_VIEW_LINE = re.compile(r"^View: (\S+)$")
_QUOTED = re.compile(r"'([^']*)'")

_NEGATION_CUES = {"non", "not", "no", "without", "except", "excluding", "isnt", "arent"}
_NEGATION_SKIPPABLE = {"a", "an", "the", "of", "in", "any"}


def _negated(tokens: Sequence[str], start: int) -> bool:
    """True when the nearest meaningful token before ``start`` is a negation cue."""
    j = start - 1
    skipped = 0
    while j >= 0 and skipped < 2 and tokens[j] in _NEGATION_SKIPPABLE:
        j -= 1
        skipped += 1
    return j >= 0 and tokens[j] in _NEGATION_CUES

_LTE_WORDS = r"at most|up to|no more than|within"
_LT_WORDS = r"under|below|less than|cheaper than"
_GTE_WORDS = r"at least|no less than|minimum of"
_GT_WORDS = r"over|above|more than"
_AMOUNT = r"\$?(\d+(?:\.\d+)?)(?:\s*dollars?)?"
_COMPARATOR = re.compile(
    rf"\b({_LTE_WORDS}|{_LT_WORDS}|{_GTE_WORDS}|{_GT_WORDS})\s+{_AMOUNT}"
)
_LTE_SET = set(_LTE_WORDS.split("|"))
_LT_SET = set(_LT_WORDS.split("|"))
_GTE_SET = set(_GTE_WORDS.split("|"))


def _normalize(text: str) -> str:
    text = text.lower().replace("-", " ")
    text = re.sub(r"[^a-z0-9$.' ]+", " ", text)
    return re.sub(r"\s+", " ", text).strip()


def _tokens(text: str) -> list[str]:
    return _normalize(text).replace("'", " ").replace(".", " . ").split()


class MockProvider:
    """Lexicon extractor + rule-based SQL compiler behind the Provider protocol."""

    def __init__(
        self,
        lexicon: Mapping[str, tuple[str, str]] | None = None,
        fail_times: int = 0,
        discretize_garbage: bool = False,
    ):
        self.lexicon = dict(lexicon or {})
        self.fail_times = fail_times
        self.discretize_garbage = discretize_garbage

    def complete_once(self, prompt: str, config: ProviderConfig) -> str:
        if self.fail_times > 0:
            self.fail_times -= 1
            raise TransportFailure("mock transport failure")
        if _T2S_BODY_MARKER in prompt:
            return self._compile_sql(prompt)
        return self._extract(prompt)

    # -- discretize ---------------------------------------------------------

    def _extract(self, prompt: str) -> str:
        if self.discretize_garbage:
            return "I could not find anything structured in that text."
        text = _normalize(extract_payload(prompt))
        hits: list[tuple[int, str, str]] = []
        consumed = text
        phrases = sorted(self.lexicon, key=lambda p: (-len(_normalize(p)), p))
        for phrase in phrases:
            pattern = re.compile(
                r"(?<![a-z0-9])" + re.escape(_normalize(phrase)) + r"(?![a-z0-9])"
            )
            match = pattern.search(consumed)
            if not match:
                continue
            key, value = self.lexicon[phrase]
            hits.append((match.start(), key, value))
            consumed = consumed[:match.start()] + "\x00" * (match.end() - match.start()) + consumed[match.end():]
        hits.sort()
        pairs = []
        seen = set()
        for _, key, value in hits:
            if (key, value) not in seen:
                seen.add((key, value))
                pairs.append([key, value])
        return json.dumps(pairs)

    # -- text-to-SQL --------------------------------------------------------

    def _compile_sql(self, prompt: str) -> str:
        body = prompt[prompt.rindex(_T2S_BODY_MARKER):]
        view = "unknown_view"
        numeric_columns: list[str] = []
        all_columns: list[str] = []
        enums: dict[str, list[str]] = {}
        state: dict[str, tuple[str, object]] = {}
        for line in body.splitlines():
            line = line.strip()
            view_match = _VIEW_LINE.match(line)
            if view_match:
                view = view_match.group(1)
                continue
            schema_match = _SCHEMA_LINE.match(line)
            if schema_match:
                name, kind, _origin = schema_match.groups()
                all_columns.append(name)
                if kind == "number":
                    numeric_columns.append(name)
                continue
            state_match = _STATE_LINE.match(line)
            if state_match:
                column, op, operand_text = state_match.groups()
                state[column] = (op, _parse_operand(operand_text))
                continue
            enum_match = _ENUM_LINE.match(line)
            if enum_match:
                enums[enum_match.group(1)] = _QUOTED.findall(enum_match.group(2))

        question = extract_payload(body)
        new_constraints, relaxed = self._question_constraints(
            question, all_columns, numeric_columns, enums
        )

        merged = dict(state)
        for column in relaxed:
            merged.pop(column, None)
        merged.update(new_constraints)

        clauses = [
            _render_clause(column, op, operand)
            for column, (op, operand) in sorted(merged.items())
        ]
        clauses.extend(f"{column} ANY" for column in sorted(relaxed))
        if clauses:
            return f"SELECT * FROM {view} WHERE " + " AND ".join(clauses) + ";"
        return f"SELECT * FROM {view};"

    def _question_constraints(
        self,
        question: str,
        all_columns: Sequence[str],
        numeric_columns: Sequence[str],
        enums: Mapping[str, Sequence[str]],
    ) -> tuple[dict[str, tuple[str, object]], list[str]]:
        normalized = _normalize(question)
        constraints: dict[str, tuple[str, object]] = {}
        relaxed: list[str] = []

        # Explicit relaxations: "any <column>".
        for column in all_columns:
            spaced = column.replace("_", " ")
            if re.search(rf"\bany {re.escape(spaced)}\b", normalized):
                relaxed.append(column)

        # Quoted literals bound to the nearest preceding column mention; kept
        # verbatim even when outside the enumeration (drives repair paths).
        for quote_match in _QUOTED.finditer(normalized):
            literal = quote_match.group(1).strip()
            if not literal:
                continue
            prefix = normalized[:quote_match.start()]
            best: tuple[int, str] | None = None
            for column in all_columns:
                mention = prefix.rfind(column.replace("_", " "))
                if mention >= 0 and (best is None or mention > best[0]):
                    best = (mention, column)
            if best is not None:
                constraints[best[1]] = ("eq", literal)

        # Price-style comparators.
        for comparator in _COMPARATOR.finditer(normalized):
            phrase, amount = comparator.groups()
            target = "price" if "price" in numeric_columns else next(iter(numeric_columns), None)
            if target is None:
                continue
            if phrase in _LTE_SET:
                op = "lte"
            elif phrase in _LT_SET:
                op = "lt"
            elif phrase in _GTE_SET:
                op = "gte"
            else:
                op = "gt"
            constraints[target] = (op, _parse_number_literal(amount))

        # Enum value mentions with negation detection, longest value first.
        tokens = _tokens(question)
        taken = [False] * len(tokens)
        positive: dict[str, list[str]] = {}
        negative: dict[str, list[str]] = {}
        candidates = sorted(
            (
                (value, column)
                for column, values in enums.items()
                for value in values
            ),
            key=lambda pair: (-len(_tokens(pair[0])), pair[0], pair[1]),
        )
        for value, column in candidates:
            value_tokens = _tokens(value)
            if not value_tokens:
                continue
            for i in range(len(tokens) - len(value_tokens) + 1):
                if any(taken[i:i + len(value_tokens)]):
                    continue
                if tokens[i:i + len(value_tokens)] != value_tokens:
                    continue
                for j in range(i, i + len(value_tokens)):
                    taken[j] = True
                bucket = negative if _negated(tokens, i) else positive
                bucket.setdefault(column, []).append(value)
                break

        for column, values in sorted(positive.items()):
            if column in constraints or column in relaxed:
                continue
            if len(values) == 1:
                constraints[column] = ("eq", values[0])
            else:
                constraints[column] = ("in", tuple(sorted(values)))
        for column, values in sorted(negative.items()):
            if column in constraints or column in relaxed:
                continue
            constraints[column] = ("neq", sorted(values)[0])

        return constraints, relaxed


def _parse_operand(text: str) -> object:
    text = text.strip()
    if text.startswith("("):
        return tuple(_QUOTED.findall(text))
    if text.startswith("'"):
        return text.strip("'")
    return _parse_number_literal(text)


def _parse_number_literal(text: str) -> object:
    return int(text) if re.fullmatch(r"-?\d+", text) else float(text)


_SQL_OPS = {"eq": "=", "neq": "!=", "lt": "<", "lte": "<=", "gt": ">", "gte": ">="}


def _render_clause(column: str, op: str, operand: object) -> str:
    if op == "in":
        values = ", ".join(_render_literal(v) for v in operand)
        return f"{column} IN ({values})"
    if op == "like":
        return f"{column} LIKE {_render_literal(operand)}"
    return f"{column} {_SQL_OPS[op]} {_render_literal(operand)}"


def _render_literal(value: object) -> str:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return repr(value)
    escaped = str(value).replace("'", "''")
    return f"'{escaped}'"


def load_lexicon(doc: Mapping[str, Sequence[str]]) -> dict[str, tuple[str, str]]:
    """Build a mock lexicon from a plain {phrase: [key, value]} document."""
    return {phrase: (pair[0], pair[1]) for phrase, pair in doc.items()}
