"""Configuration file loading and workspace layout for the CLI and service.

One TOML file configures every stage; flags override config values. Stage
artifacts live under a workspace directory so any stage can be inspected and
rerun on its own.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .catalog import CapPolicy
from .errors import ConfigError
from .ingest import IngestConfig
from .llm import LlmGateway, HttpProvider, ProviderConfig, load_template
from .mock import MockProvider, load_lexicon
from .model import normalize_column_name


@dataclass(frozen=True)
class AppConfig:
    workspace: Path = Path("workspace")
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    lexicon_path: Path | None = None
    discretize_budget: int = 8192
    text2sql_budget: int = 8192
    cap_policy: CapPolicy = field(default_factory=CapPolicy)
    ingest: IngestConfig = field(default_factory=lambda: IngestConfig(primary_key="product_id"))
    store_max_columns: int = 2048
    host: str = "127.0.0.1"
    port: int = 8787


def load_config(path: str | Path | None) -> AppConfig:
    """Read a TOML config; a missing explicit path is a user error."""
    if path is None:
        return AppConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc

    provider_doc = doc.get("provider", {})
    provider = ProviderConfig(
        provider_id=provider_doc.get("id", "mock"),
        endpoint=provider_doc.get("endpoint", ""),
        model_name=provider_doc.get("model", ""),
        max_input_tokens=provider_doc.get("max_input_tokens", 8192),
        temperature=provider_doc.get("temperature", 0.0),
        max_retries=provider_doc.get("max_retries", 2),
    )
    budgets = doc.get("budgets", {})
    cap_doc = doc.get("cap_policy", {})
    policy = CapPolicy(
        max_columns=cap_doc.get("max_columns", 2048),
        max_key_words=cap_doc.get("max_key_words", 2),
        min_row_support=cap_doc.get("min_row_support", 0.05),
        mandatory_keys=tuple(
            normalize_column_name(k) for k in cap_doc.get("mandatory_keys", [])
        ),
    )
    ingest_doc = doc.get("ingest", {})
    declared = ingest_doc.get("text_columns", None)
    ingest = IngestConfig(
        primary_key=ingest_doc.get("primary_key", "product_id"),
        declared_text_columns=tuple(declared) if declared else None,
        text_detection_threshold=ingest_doc.get("text_detection_threshold", 0.5),
        min_avg_text_length=ingest_doc.get("min_avg_text_length", 40),
    )
    lexicon = provider_doc.get("lexicon")
    service_doc = doc.get("service", {})
    return AppConfig(
        workspace=Path(doc.get("workspace", "workspace")),
        provider=provider,
        lexicon_path=Path(lexicon) if lexicon else None,
        discretize_budget=budgets.get("discretize_prompt_tokens", 8192),
        text2sql_budget=budgets.get("text2sql_prompt_tokens", 8192),
        cap_policy=policy,
        ingest=ingest,
        store_max_columns=doc.get("store", {}).get("max_columns", 2048),
        host=service_doc.get("host", "127.0.0.1"),
        port=service_doc.get("port", 8787),
    )


def build_gateway(config: AppConfig) -> LlmGateway:
    """Instantiate the configured provider behind a gateway."""
    if config.provider.provider_id == "mock":
        lexicon = {}
        if config.lexicon_path is not None:
            if not config.lexicon_path.exists():
                raise ConfigError(f"lexicon file not found: {config.lexicon_path}")
            lexicon = load_lexicon(
                json.loads(config.lexicon_path.read_text(encoding="utf-8"))
            )
        provider = MockProvider(lexicon=lexicon)
    else:
        provider = HttpProvider()
    return LlmGateway(
        provider,
        config.provider,
        discretize_template=load_template("discretize", config.discretize_budget),
        text2sql_template=load_template("text2sql", config.text2sql_budget),
    )


class Workspace:
    """On-disk layout of the staged pipeline artifacts."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def table_path(self, table_id: str) -> Path:
        return self.root / "tables" / f"{table_id}.table.json"

    def extractions_path(self, table_id: str) -> Path:
        return self.root / "extractions" / f"{table_id}.extractions.json"

    def catalog_path(self, table_id: str) -> Path:
        return self.root / "catalogs" / f"{table_id}.catalog.json"

    def store_path(self, table_id: str) -> Path:
        return self.root / "stores" / f"{table_id}.sqlite"

    def schema_path(self, table_id: str) -> Path:
        return self.root / "schemas" / f"{table_id}.schema.json"

    def sessions_dir(self) -> Path:
        return self.root / "sessions"

    def table_ids(self) -> list[str]:
        tables_dir = self.root / "tables"
        if not tables_dir.exists():
            return []
        return sorted(
            p.name.removesuffix(".table.json") for p in tables_dir.glob("*.table.json")
        )

    def write_json(self, path: Path, doc: dict) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    def read_json(self, path: Path) -> dict:
        if not path.exists():
            raise ConfigError(f"artifact not found: {path} (run the earlier stage first)")
        return json.loads(path.read_text(encoding="utf-8"))
