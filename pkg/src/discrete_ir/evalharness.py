"""Synthetic corpus with ground truth, plus recall/precision evaluation.

The generator samples attribute values per row and renders them into a
templated free-text description using seeded paraphrase variation, so the
corpus carries exact ground truth while its text still defeats naive string
matching. Three systems are compared per query intent:

- dir: the full pipeline (extraction catalog, joined view, text-to-SQL)
- like: conjunctive SQL LIKE over the raw text columns
- lexical: a bag-of-words overlap ranker returning the top |truth| rows

The oracle answers intents by exhaustive filtering of the ground-truth
attributes; it never touches the SQL store or the LLM path.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .agent import TableRuntime
from .catalog import CapPolicy
from .errors import SpecError
from .llm import LlmGateway
from .mock import MockProvider
from .model import ContextTable, DialogState, ValueKind, normalize_column_name
from .pipeline import run_full_pipeline
from .store import Store
from .text2sql import execute, text_to_sql

DIRECT = "direct"
EXPLORATORY = "exploratory"

STOPWORDS = {
    "a", "an", "and", "any", "do", "for", "have", "i", "in", "is", "it", "me",
    "need", "non", "not", "of", "or", "over", "preferably", "show", "something",
    "the", "there", "under", "with", "you",
}


@dataclass(frozen=True)
class AttributeSpec:
    """One inferred attribute: canonical values and their surface variants."""

    name: str
    variants: Mapping[str, tuple[str, ...]]  # canonical value -> surface phrases

    @property
    def values(self) -> tuple[str, ...]:
        return tuple(sorted(self.variants))


@dataclass(frozen=True)
class DomainSpec:
    domain_id: str
    product_type: str
    attributes: tuple[AttributeSpec, ...]
    price_range: tuple[float, float]
    fillers: tuple[str, ...] = (
        "ships within two days",
        "a favorite with our regulars",
        "backed by a two year warranty",
    )


@dataclass(frozen=True)
class CorpusSpec:
    domains: tuple[DomainSpec, ...]
    rows_per_domain: int
    seed: int


@dataclass(frozen=True)
class QueryIntent:
    """A question with its exact constraint semantics over generator attributes."""

    description: str
    constraints: tuple[tuple[str, str, object], ...]  # (column, op, value)
    kind: str
    domain_id: str

    def to_dict(self) -> dict:
        return {
            "description": self.description,
            "constraints": [list(c) for c in self.constraints],
            "kind": self.kind,
            "domain_id": self.domain_id,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "QueryIntent":
        return cls(
            description=doc["description"],
            constraints=tuple((c[0], c[1], c[2]) for c in doc["constraints"]),
            kind=doc["kind"],
            domain_id=doc["domain_id"],
        )


@dataclass(frozen=True)
class GroundTruth:
    """Sampled attributes (plus price) per row, per domain."""

    rows: Mapping[str, Mapping[str, Mapping[str, object]]]

    def to_dict(self) -> dict:
        return {
            domain: {pk: dict(attrs) for pk, attrs in rows.items()}
            for domain, rows in self.rows.items()
        }


# -- default desk-scale corpus -------------------------------------------------

def default_corpus_spec(rows_per_domain: int = 400, seed: int = 7) -> CorpusSpec:
    backpacks = DomainSpec(
        domain_id="backpacks",
        product_type="backpack",
        attributes=(
            AttributeSpec("product_size", {
                "15 liter": ("15-liter", "15 liter", "15L"),
                "22 liter": ("22-liter", "22 liter", "22L"),
                "35 liter": ("35-liter", "35 liter", "35L"),
            }),
            AttributeSpec("color", {
                "black": ("jet black", "matte black", "black"),
                "navy": ("navy", "deep navy"),
                "green": ("forest green", "green"),
                "red": ("crimson red", "red"),
            }),
            AttributeSpec("handle_type", {
                "strap": ("strap handle", "shoulder strap"),
                "grip": ("grip handle", "ergonomic grip"),
                "telescopic": ("telescopic handle",),
            }),
        ),
        price_range=(30, 500),
    )
    perfumes = DomainSpec(
        domain_id="perfumes",
        product_type="perfume",
        attributes=(
            AttributeSpec("scent_family", {
                "citrus": ("citrus", "zesty citrus"),
                "woody": ("woody", "warm woody"),
                "floral": ("floral", "soft floral"),
                "musk": ("musk", "white musk"),
            }),
            AttributeSpec("bottle_size", {
                "30 ml": ("30 ml", "30ml"),
                "50 ml": ("50 ml", "50ml"),
                "100 ml": ("100 ml", "100ml"),
            }),
        ),
        price_range=(20, 300),
    )
    laptops = DomainSpec(
        domain_id="laptops",
        product_type="laptop",
        attributes=(
            AttributeSpec("screen_size", {
                "13 inch": ("13-inch", "13 inch"),
                "15 inch": ("15-inch", "15 inch"),
                "17 inch": ("17-inch", "17 inch"),
            }),
            AttributeSpec("ram_size", {
                "8 gb": ("8 GB", "8gb"),
                "16 gb": ("16 GB", "16gb"),
                "32 gb": ("32 GB", "32gb"),
            }),
            AttributeSpec("finish", {
                "silver": ("brushed silver", "silver"),
                "gray": ("space gray", "gray"),
                "blue": ("midnight blue", "blue"),
            }),
        ),
        price_range=(400, 3000),
    )
    return CorpusSpec(
        domains=(backpacks, perfumes, laptops),
        rows_per_domain=rows_per_domain,
        seed=seed,
    )


def build_corpus_lexicon(spec: CorpusSpec) -> dict[str, tuple[str, str]]:
    """Surface phrase -> (attribute, canonical value), for the mock provider.

    Lossless by construction: every phrase the generator can emit is mapped.
    """
    lexicon: dict[str, tuple[str, str]] = {}
    for domain in spec.domains:
        lexicon[domain.product_type] = ("product_type", domain.product_type)
        for attribute in domain.attributes:
            for value, phrases in attribute.variants.items():
                for phrase in phrases:
                    target = (attribute.name, value)
                    if lexicon.get(phrase, target) != target:
                        raise SpecError(
                            f"phrase {phrase!r} maps to both {lexicon[phrase]} and {target}"
                        )
                    lexicon[phrase] = target
    return lexicon


_OPENINGS = (
    "A dependable {ptype}",
    "This {ptype} is built to last",
    "Meet our everyday {ptype}",
)
_CLAUSES = (
    "featuring {phrase}",
    "with {phrase}",
    "offering {phrase}",
)


def _validate_spec(spec: CorpusSpec) -> None:
    if spec.rows_per_domain < 0:
        raise SpecError("rows_per_domain must be >= 0")
    seen = set()
    for domain in spec.domains:
        if domain.domain_id in seen:
            raise SpecError(f"duplicate domain {domain.domain_id!r}")
        seen.add(domain.domain_id)
        if not domain.attributes:
            raise SpecError(f"domain {domain.domain_id!r} has no attributes")
        low, high = domain.price_range
        if low >= high:
            raise SpecError(f"empty price range for {domain.domain_id!r}")
        for attribute in domain.attributes:
            if not attribute.variants:
                raise SpecError(f"attribute {attribute.name!r} has no values")
    build_corpus_lexicon(spec)


def generate_corpus(spec: CorpusSpec) -> tuple[dict[str, ContextTable], GroundTruth]:
    """Deterministically sample tables and their ground-truth attributes."""
    _validate_spec(spec)
    tables: dict[str, ContextTable] = {}
    truth: dict[str, dict[str, dict[str, object]]] = {}
    for domain in spec.domains:
        rng = random.Random(f"{spec.seed}:{domain.domain_id}")
        rows = []
        domain_truth: dict[str, dict[str, object]] = {}
        prefix = domain.domain_id[:2]
        for i in range(spec.rows_per_domain):
            pk = f"{prefix}{i:04d}"
            price = round(rng.uniform(*domain.price_range), 2)
            sampled = {
                attribute.name: rng.choice(attribute.values)
                for attribute in domain.attributes
            }
            opening = rng.choice(_OPENINGS).format(ptype=domain.product_type)
            clauses = []
            for attribute in domain.attributes:
                phrase = rng.choice(attribute.variants[sampled[attribute.name]])
                clauses.append(rng.choice(_CLAUSES).format(phrase=phrase))
            filler = rng.choice(domain.fillers)
            description = f"{opening}, {', '.join(clauses)}; {filler}."
            title = f"{domain.product_type.title()} {i:04d}"
            rows.append({
                "product_id": pk,
                "title": title,
                "price": price,
                "description": description,
            })
            domain_truth[pk] = {"price": price, **sampled}
        pk_col = normalize_column_name("product_id")
        tables[domain.domain_id] = ContextTable(
            table_id=domain.domain_id,
            domain_id=domain.domain_id,
            primary_key=pk_col,
            structured_columns=(
                (normalize_column_name("title"), ValueKind.TEXT),
                (normalize_column_name("price"), ValueKind.NUMBER),
            ),
            text_columns=(normalize_column_name("description"),),
            rows=tuple(rows),
        )
        truth[domain.domain_id] = domain_truth
    return tables, GroundTruth(rows=truth)


# -- oracle ---------------------------------------------------------------------

def _satisfies(attrs: Mapping[str, object], constraints) -> bool:
    for column, op, value in constraints:
        cell = attrs.get(column)
        if cell is None:
            return False
        if op == "eq" and cell != value:
            return False
        if op == "neq" and cell == value:
            return False
        if op == "in" and cell not in value:
            return False
        if op == "lt" and not cell < value:
            return False
        if op == "lte" and not cell <= value:
            return False
        if op == "gt" and not cell > value:
            return False
        if op == "gte" and not cell >= value:
            return False
    return True


def oracle_answer(intent: QueryIntent, truth: GroundTruth) -> set[str]:
    """Exhaustive ground-truth filter; no SQL, no LLM."""
    rows = truth.rows.get(intent.domain_id, {})
    return {pk for pk, attrs in rows.items() if _satisfies(attrs, intent.constraints)}


# -- intents ----------------------------------------------------------------------

def render_question(intent: QueryIntent, product_type: str) -> str:
    """Deterministic NL rendering of a constraint set."""
    negations = [v for _, op, v in intent.constraints if op == "neq"]
    equalities = [
        v for c, op, v in intent.constraints if op == "eq" and c != "product_type"
    ]
    price_phrases = []
    for column, op, value in intent.constraints:
        if column != "price":
            continue
        if op in ("lt", "lte"):
            price_phrases.append(f"under ${value:g}")
        else:
            price_phrases.append(f"over ${value:g}")
    parts = [f"non-{v}" for v in negations] + list(equalities) + [product_type]
    question = "Do you have a " + " ".join(parts)
    if price_phrases:
        question += " " + " and ".join(price_phrases)
    return question + "?"


def generate_suite(
    spec: CorpusSpec,
    count: int = 50,
    seed: int = 11,
    kinds: Sequence[str] = (DIRECT, EXPLORATORY),
) -> list[QueryIntent]:
    """Sample a deterministic suite of enum-expressible intents."""
    rng = random.Random(f"suite:{seed}")
    intents: list[QueryIntent] = []
    for i in range(count):
        domain = spec.domains[i % len(spec.domains)]
        kind = kinds[i % len(kinds)] if len(kinds) > 1 else kinds[0]
        constraints: list[tuple[str, str, object]] = []
        if kind == DIRECT:
            picked = rng.sample(domain.attributes, k=min(2, len(domain.attributes)))
            for position, attribute in enumerate(picked):
                value = rng.choice(attribute.values)
                op = "neq" if (position == 0 and rng.random() < 0.5) else "eq"
                constraints.append((attribute.name, op, value))
            low, high = domain.price_range
            if rng.random() < 0.7:
                bound = round(rng.uniform(low + (high - low) * 0.2,
                                          low + (high - low) * 0.8))
                op = "lt" if rng.random() < 0.5 else "gt"
                constraints.append(("price", op, bound))
        else:
            if rng.random() < 0.5 and domain.attributes:
                attribute = rng.choice(domain.attributes)
                constraints.append((attribute.name, "eq", rng.choice(attribute.values)))
        intent = QueryIntent(
            description="",
            constraints=tuple(constraints),
            kind=kind,
            domain_id=domain.domain_id,
        )
        intents.append(replace(
            intent, description=render_question(intent, domain.product_type)
        ))
    return intents


def negation_paraphrase_suite(spec: CorpusSpec, count: int = 12, seed: int = 13) -> list[QueryIntent]:
    """Direct intents that lean on negation, where string matching breaks."""
    rng = random.Random(f"negation:{seed}")
    intents = []
    for i in range(count):
        domain = spec.domains[i % len(spec.domains)]
        attribute = domain.attributes[i % len(domain.attributes)]
        value = rng.choice(attribute.values)
        other = rng.choice([a for a in domain.attributes if a.name != attribute.name])
        constraints = (
            (attribute.name, "neq", value),
            (other.name, "eq", rng.choice(other.values)),
        )
        intent = QueryIntent(
            description="",
            constraints=constraints,
            kind=DIRECT,
            domain_id=domain.domain_id,
        )
        intents.append(replace(
            intent, description=render_question(intent, domain.product_type)
        ))
    return intents


# -- systems ------------------------------------------------------------------------

@dataclass
class EvalEnvironment:
    """Everything the three systems need, built once per corpus."""

    spec: CorpusSpec
    tables: dict[str, ContextTable]
    truth: GroundTruth
    runtimes: dict[str, TableRuntime]
    gateway: LlmGateway


def prepare_environment(
    spec: CorpusSpec,
    store_factory=None,
    mandatory_keys: Sequence[str] = ("product_type",),
) -> EvalEnvironment:
    """Generate the corpus and run the full pipeline with the lossless mock."""
    tables, truth = generate_corpus(spec)
    lexicon = build_corpus_lexicon(spec)
    gateway = LlmGateway(MockProvider(lexicon=lexicon))
    mandatory = tuple(normalize_column_name(k) for k in mandatory_keys)
    policy = CapPolicy(mandatory_keys=mandatory)
    runtimes: dict[str, TableRuntime] = {}
    for domain_id, table in tables.items():
        store = store_factory(domain_id) if store_factory else Store(":memory:")
        result = run_full_pipeline(table, gateway, policy, store)
        runtimes[domain_id] = TableRuntime(
            table_id=domain_id,
            domain_id=domain_id,
            schema=result.schema,
            catalog=result.catalog,
            store=store,
        )
    return EvalEnvironment(
        spec=spec, tables=tables, truth=truth, runtimes=runtimes, gateway=gateway
    )


def _content_tokens(question: str) -> list[str]:
    tokens = re.findall(r"[a-z]+", question.lower())
    return [t for t in tokens if t not in STOPWORDS]


def run_dir_system(intent: QueryIntent, env: EvalEnvironment) -> set[str]:
    runtime = env.runtimes[intent.domain_id]
    query = text_to_sql(
        intent.description,
        runtime.schema,
        runtime.catalog,
        DialogState(active_table=intent.domain_id),
        env.gateway,
    )
    if query.report.status == "rejected":
        return set()
    result = execute(query, runtime.store)
    pk_index = result.columns.index(runtime.schema.primary_key.normalized)
    return {str(row[pk_index]) for row in result.rows}


def run_like_baseline(intent: QueryIntent, env: EvalEnvironment) -> set[str]:
    """Conjunctive LIKE over the raw text columns; blind to negation/paraphrase."""
    runtime = env.runtimes[intent.domain_id]
    tokens = _content_tokens(intent.description)
    sql = f'SELECT "product_id" FROM "{intent.domain_id}__context"'
    params: list[str] = []
    if tokens:
        clauses = []
        for token in tokens:
            clauses.append('("description" LIKE ? OR "title" LIKE ?)')
            params.extend([f"%{token}%", f"%{token}%"])
        sql += " WHERE " + " AND ".join(clauses)
    return {str(row[0]) for row in runtime.store.execute(sql, tuple(params))}


def run_lexical_baseline(intent: QueryIntent, env: EvalEnvironment) -> set[str]:
    """Top-k bag-of-words overlap ranker with k = |truth|."""
    k = len(oracle_answer(intent, env.truth))
    if k == 0:
        return set()
    question_tokens = set(_content_tokens(intent.description))
    table = env.tables[intent.domain_id]
    scored = []
    for row in table.rows:
        text = f"{row['title']} {row['description']}".lower()
        row_tokens = set(re.findall(r"[a-z]+", text))
        scored.append((-len(question_tokens & row_tokens), str(row["product_id"])))
    scored.sort()
    return {pk for _, pk in scored[:k]}


SYSTEMS = {
    "dir": run_dir_system,
    "like": run_like_baseline,
    "lexical": run_lexical_baseline,
}


# -- metrics --------------------------------------------------------------------------

@dataclass(frozen=True)
class QueryMetrics:
    intent: QueryIntent
    returned: int
    truth: int
    recall: float
    precision: float

    def to_dict(self) -> dict:
        return {
            "description": self.intent.description,
            "kind": self.intent.kind,
            "domain_id": self.intent.domain_id,
            "returned": self.returned,
            "truth": self.truth,
            "recall": self.recall,
            "precision": self.precision,
        }


@dataclass(frozen=True)
class EvalReport:
    system: str
    per_query: tuple[QueryMetrics, ...]

    @property
    def macro_recall(self) -> float:
        if not self.per_query:
            return 0.0
        return sum(q.recall for q in self.per_query) / len(self.per_query)

    @property
    def macro_precision(self) -> float:
        if not self.per_query:
            return 0.0
        return sum(q.precision for q in self.per_query) / len(self.per_query)

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "macro_recall": self.macro_recall,
            "macro_precision": self.macro_precision,
            "queries": [q.to_dict() for q in self.per_query],
        }


def recall_precision(returned: set[str], truth: set[str]) -> tuple[float, float]:
    """Spec'd conventions: empty truth and empty return are both perfect."""
    if truth:
        recall = len(returned & truth) / len(truth)
    else:
        recall = 1.0
    if returned:
        precision = len(returned & truth) / len(returned) if truth else 0.0
    else:
        precision = 1.0
    return recall, precision


def evaluate(system: str, suite: Sequence[QueryIntent], env: EvalEnvironment) -> EvalReport:
    """Score one system over a suite of intents against the oracle."""
    if system not in SYSTEMS:
        raise ValueError(f"unknown system {system!r}; pick from {sorted(SYSTEMS)}")
    runner = SYSTEMS[system]
    per_query = []
    for intent in suite:
        truth = oracle_answer(intent, env.truth)
        returned = runner(intent, env)
        recall, precision = recall_precision(returned, truth)
        per_query.append(QueryMetrics(
            intent=intent,
            returned=len(returned),
            truth=len(truth),
            recall=recall,
            precision=precision,
        ))
    return EvalReport(system=system, per_query=tuple(per_query))


def format_report_table(reports: Sequence[EvalReport]) -> str:
    """Plain-text comparison table across systems."""
    lines = [f"{'system':<10} {'queries':>8} {'recall':>8} {'precision':>10}"]
    for report in reports:
        lines.append(
            f"{report.system:<10} {len(report.per_query):>8} "
            f"{report.macro_recall:>8.3f} {report.macro_precision:>10.3f}"
        )
    return "\n".join(lines)
