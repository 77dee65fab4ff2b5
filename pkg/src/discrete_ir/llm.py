"""Provider-agnostic completion transport and prompt construction.

Prompt templates live on disk as editable plain-text assets with
``{{slot}}`` placeholders; rendering is a pure function of its inputs.
Token counts are estimated with a fixed chars-per-token ratio, which is
deliberately provider-agnostic: the budget checks need an upper bound,
not exact counts.
"""

from __future__ import annotations

import logging
import math
import os
import time
from dataclasses import dataclass
from importlib import resources
from typing import TYPE_CHECKING, Protocol, Sequence

import requests

from .errors import BudgetError, ProviderError
from .model import ColumnName, DialogState, EnumerationCatalog

if TYPE_CHECKING:
    from .store import JoinedSchema

log = logging.getLogger(__name__)

CHARS_PER_TOKEN = 4.0

TEMPLATE_NAMES = ("discretize", "text2sql")

# Sentinels around the dynamic payload so deterministic mock providers can
# recover it from a rendered prompt.
PAYLOAD_OPEN = "<<<"
PAYLOAD_CLOSE = ">>>"


def estimate_tokens(text: str) -> int:
    """Upper-bound token estimate; monotone in text length."""
    return math.ceil(len(text) / CHARS_PER_TOKEN)


@dataclass(frozen=True)
class PromptTemplate:
    """A named few-shot prompt skeleton loaded from a plain-text asset."""

    name: str
    system_preamble: str
    exemplars: tuple[tuple[str, str], ...]
    body: str
    rendered_budget: int = 8192

    def __post_init__(self) -> None:
        if self.name not in TEMPLATE_NAMES:
            raise ValueError(f"unknown template name {self.name!r}")
        if len(self.exemplars) < 1:
            raise ValueError("few-shot template needs at least one exemplar")
        if self.rendered_budget <= 0:
            raise ValueError("rendered_budget must be positive")

    def render(self, slots: dict[str, str]) -> str:
        """Fill body slots and assemble the full prompt text."""
        body = self.body
        for slot, value in slots.items():
            body = body.replace("{{" + slot + "}}", value)
        parts = [self.system_preamble.strip(), ""]
        for i, (exemplar_in, exemplar_out) in enumerate(self.exemplars, start=1):
            parts.append(f"Example {i}:")
            parts.append(f"Input: {exemplar_in}")
            parts.append(f"Output: {exemplar_out}")
            parts.append("")
        parts.append(body.strip())
        rendered = "\n".join(parts)
        estimate = estimate_tokens(rendered)
        if estimate > self.rendered_budget:
            hint = "reduce the enumeration column cap" if self.name == "text2sql" else ""
            raise BudgetError(estimate, self.rendered_budget, hint=hint)
        return rendered


def parse_template(text: str, name: str, rendered_budget: int = 8192) -> PromptTemplate:
    """Parse the sectioned template asset format.

    Sections are introduced by ``<<system>>``, repeated
    ``<<example_input>>``/``<<example_output>>`` pairs, and ``<<body>>``.
    """
    sections: list[tuple[str, list[str]]] = []
    current: list[str] | None = None
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("<<") and stripped.endswith(">>") and not stripped.startswith(PAYLOAD_OPEN):
            current = []
            sections.append((stripped[2:-2], current))
        elif current is not None:
            current.append(line)
    named = {"system": "", "body": ""}
    inputs: list[str] = []
    outputs: list[str] = []
    for section, lines in sections:
        content = "\n".join(lines).strip("\n")
        if section == "system":
            named["system"] = content
        elif section == "body":
            named["body"] = content
        elif section == "example_input":
            inputs.append(content)
        elif section == "example_output":
            outputs.append(content)
        else:
            raise ValueError(f"unknown template section {section!r}")
    if len(inputs) != len(outputs):
        raise ValueError("unpaired example_input/example_output sections")
    return PromptTemplate(
        name=name,
        system_preamble=named["system"],
        exemplars=tuple(zip(inputs, outputs)),
        body=named["body"],
        rendered_budget=rendered_budget,
    )


def load_template(name: str, rendered_budget: int = 8192) -> PromptTemplate:
    """Load a packaged template asset by name."""
    text = resources.files("discrete_ir").joinpath(f"templates/{name}.txt").read_text("utf-8")
    return parse_template(text, name, rendered_budget)


@dataclass(frozen=True)
class ProviderConfig:
    """Where and how to run completions."""

    provider_id: str = "mock"
    endpoint: str = ""
    model_name: str = ""
    max_input_tokens: int = 8192
    temperature: float = 0.0
    max_retries: int = 2
    retry_backoff_seconds: float = 0.1

    def __post_init__(self) -> None:
        if self.max_input_tokens <= 0:
            raise ValueError("max_input_tokens must be positive")


class Provider(Protocol):
    """A completion backend; implementations raise TransportFailure when flaky."""

    def complete_once(self, prompt: str, config: ProviderConfig) -> str: ...


class TransportFailure(Exception):
    """A transient transport problem worth retrying."""


class HttpProvider:
    """Generic HTTP adapter: POST {model, prompt, temperature} as JSON.

    The API key is read from the ``<PROVIDER_ID>_API_KEY`` environment
    variable and sent as a bearer token when present.
    """

    def __init__(self, timeout_seconds: float = 60.0):
        self.timeout_seconds = timeout_seconds

    def complete_once(self, prompt: str, config: ProviderConfig) -> str:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(f"{config.provider_id.upper()}_API_KEY")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": config.model_name,
            "prompt": prompt,
            "temperature": config.temperature,
        }
        try:
            response = requests.post(
                config.endpoint, json=body, headers=headers, timeout=self.timeout_seconds
            )
        except requests.RequestException as exc:
            raise TransportFailure(str(exc)) from exc
        if response.status_code >= 500:
            raise TransportFailure(f"server error {response.status_code}")
        if response.status_code >= 400:
            raise ProviderError(f"provider rejected request: {response.status_code} {response.text[:200]}")
        payload = response.json()
        if "completion" in payload:
            return payload["completion"]
        choices = payload.get("choices")
        if choices:
            first = choices[0]
            if "text" in first:
                return first["text"]
            if "message" in first:
                return first["message"].get("content", "")
        raise ProviderError(f"unrecognized provider response shape: {list(payload)}")


def complete(prompt: str, provider: Provider, config: ProviderConfig) -> str:
    """Run one completion with budget enforcement and bounded retries."""
    estimate = estimate_tokens(prompt)
    if estimate > config.max_input_tokens:
        raise BudgetError(estimate, config.max_input_tokens)
    attempts = config.max_retries + 1
    last: Exception | None = None
    for attempt in range(attempts):
        try:
            return provider.complete_once(prompt, config)
        except TransportFailure as exc:
            last = exc
            if attempt + 1 < attempts:
                delay = config.retry_backoff_seconds * (2 ** attempt)
                log.warning("transport failure (attempt %d/%d): %s", attempt + 1, attempts, exc)
                time.sleep(delay)
    raise ProviderError(f"provider failed after {attempts} attempts: {last}")


class LlmGateway:
    """Bundles a provider, its config, and the two prompt templates.

    Keeps a running total of estimated prompt tokens for budget accounting.
    """

    def __init__(
        self,
        provider: Provider,
        config: ProviderConfig | None = None,
        discretize_template: PromptTemplate | None = None,
        text2sql_template: PromptTemplate | None = None,
    ):
        self.provider = provider
        self.config = config or ProviderConfig()
        self.discretize_template = discretize_template or load_template("discretize")
        self.text2sql_template = text2sql_template or load_template("text2sql")
        self.total_prompt_tokens = 0

    def complete(self, prompt: str) -> str:
        self.total_prompt_tokens += estimate_tokens(prompt)
        return complete(prompt, self.provider, self.config)


def build_discretize_prompt(
    text: str,
    mandatory_keys: Sequence[ColumnName],
    template: PromptTemplate,
) -> str:
    """Render the extraction prompt for one row's collected text."""
    if template.name != "discretize":
        raise ValueError(f"expected discretize template, got {template.name!r}")
    if mandatory_keys:
        names = ", ".join(k.normalized for k in mandatory_keys)
        grounding = f"Always extract these keys: {names}.\n"
    else:
        grounding = ""
    return template.render({"grounding": grounding, "text": text})


def render_schema_lines(schema: "JoinedSchema") -> str:
    return "\n".join(
        f"- {name.normalized} ({kind.value}, {origin})"
        for name, kind, origin in schema.columns
    )


def render_enum_lines(catalog: EnumerationCatalog) -> str:
    if not catalog.entries:
        return "(none)"
    return "\n".join(
        f"- {key}: " + ", ".join(f"'{v}'" for v in values)
        for key, values in sorted(catalog.entries.items())
    )


def render_state_lines(state: DialogState) -> str:
    lines = []
    for column in sorted(state.constraints):
        constraint = state.constraints[column]
        operand = constraint.operand
        if isinstance(operand, tuple):
            rendered = "(" + ", ".join(_render_operand(v) for v in operand) + ")"
        else:
            rendered = _render_operand(operand)
        lines.append(f"- {column} {constraint.op} {rendered}")
    return "\n".join(lines)


def _render_operand(value: object) -> str:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return repr(value)
    return f"'{value}'"


def build_text2sql_prompt(
    question: str,
    schema: "JoinedSchema",
    catalog: EnumerationCatalog,
    state: DialogState,
    template: PromptTemplate,
) -> str:
    """Render the text-to-SQL prompt with schema and enumeration grounding."""
    if template.name != "text2sql":
        raise ValueError(f"expected text2sql template, got {template.name!r}")
    known = {name.normalized for name, _, _ in schema.columns}
    for column in state.constraints:
        if column not in known:
            raise ValueError(f"dialog state column {column!r} not in joined schema")
    if state.constraints:
        state_block = "Current constraints:\n" + render_state_lines(state) + "\n\n"
    else:
        state_block = ""
    return template.render({
        "view": schema.view_name,
        "schema": render_schema_lines(schema),
        "enums": render_enum_lines(catalog),
        "state_block": state_block,
        "question": question,
    })


def extract_payload(prompt: str) -> str:
    """Recover the sentinel-delimited dynamic payload from a rendered prompt."""
    start = prompt.rfind(PAYLOAD_OPEN)
    end = prompt.rfind(PAYLOAD_CLOSE)
    if start < 0 or end < 0 or end <= start:
        raise ValueError("prompt has no payload sentinels")
    return prompt[start + len(PAYLOAD_OPEN):end]
