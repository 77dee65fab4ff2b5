"""Operator command line: staged pipeline, one-shot queries, chat, eval, serve.

Each pipeline stage reads and writes workspace artifacts so operators can
inspect or rerun any stage. Exit codes: 0 success, 1 user error, 2 internal
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import uuid
from pathlib import Path

from .agent import AgentRuntime, Session, SessionStorage, step
from .catalog import load_catalog, save_catalog, cap_columns, consolidate_keys, enumerate_catalog
from .config import AppConfig, Workspace, build_gateway, load_config
from .discretize import discretize_table
from .errors import DirError
from .evalharness import (
    default_corpus_spec,
    evaluate,
    format_report_table,
    generate_suite,
    prepare_environment,
    QueryIntent,
)
from .ingest import collect_text_fields, load_context_table
from .model import ContextTable, DialogState, ExtractionSet
from .store import JoinedSchema, Store, generate_inference_table, materialize_joined_view
from .text2sql import execute, text_to_sql

log = logging.getLogger(__name__)


def _runtime_for(config: AppConfig, workspace: Workspace, table_id: str):
    from .agent import TableRuntime

    table = ContextTable.from_dict(workspace.read_json(workspace.table_path(table_id)))
    catalog = load_catalog(workspace.catalog_path(table_id))
    schema = JoinedSchema.from_dict(workspace.read_json(workspace.schema_path(table_id)))
    store = Store(workspace.store_path(table_id), max_columns=config.store_max_columns)
    return TableRuntime(
        table_id=table_id,
        domain_id=table.domain_id,
        schema=schema,
        catalog=catalog,
        store=store,
    )


def cmd_ingest(args, config: AppConfig) -> int:
    workspace = Workspace(config.workspace)
    table = load_context_table(
        args.input,
        config.ingest,
        table_id=args.table,
        domain_id=args.domain or args.table,
    )
    collected = collect_text_fields(table, config.ingest)
    workspace.write_json(workspace.table_path(args.table), table.to_dict())
    print(f"ingested {len(table.rows)} rows into {workspace.table_path(args.table)}")
    print("text fields:", ", ".join(c.normalized for c in collected) or "(none)")
    return 0


def cmd_discretize(args, config: AppConfig) -> int:
    workspace = Workspace(config.workspace)
    table = ContextTable.from_dict(workspace.read_json(workspace.table_path(args.table)))
    gateway = build_gateway(config)
    extractions = discretize_table(
        table, table.text_columns, list(config.cap_policy.mandatory_keys), gateway
    )
    workspace.write_json(
        workspace.extractions_path(args.table), extractions.to_dict()
    )
    extracted = sum(1 for t in extractions.per_row.values() if t)
    print(f"extracted tuples for {extracted}/{len(extractions.per_row)} rows "
          f"({len(extractions.failed)} failed)")
    return 0


def cmd_enumerate(args, config: AppConfig) -> int:
    workspace = Workspace(config.workspace)
    extractions = ExtractionSet.from_dict(
        workspace.read_json(workspace.extractions_path(args.table))
    )
    table = ContextTable.from_dict(workspace.read_json(workspace.table_path(args.table)))
    catalog = cap_columns(
        consolidate_keys(enumerate_catalog(extractions)),
        config.cap_policy,
        len(table.rows),
    )
    save_catalog(catalog, workspace.catalog_path(args.table))
    print(f"catalog has {len(catalog.entries)} columns "
          f"({len(catalog.dropped)} dropped, "
          f"{sum(1 for k, v in catalog.consolidation_map.items() if k != v)} consolidated)")
    return 0


def cmd_generate(args, config: AppConfig) -> int:
    workspace = Workspace(config.workspace)
    table = ContextTable.from_dict(workspace.read_json(workspace.table_path(args.table)))
    extractions = ExtractionSet.from_dict(
        workspace.read_json(workspace.extractions_path(args.table))
    )
    catalog = load_catalog(workspace.catalog_path(args.table))
    store_path = workspace.store_path(args.table)
    store_path.parent.mkdir(parents=True, exist_ok=True)
    if store_path.exists():
        store_path.unlink()  # regeneration is deterministic from the artifacts
    store = Store(store_path, max_columns=config.store_max_columns)
    inference = generate_inference_table(catalog, extractions, store, table.primary_key)
    schema = materialize_joined_view(table, inference, store)
    workspace.write_json(workspace.schema_path(args.table), schema.to_dict())
    store.close()
    print(f"store written to {store_path} with view {schema.view_name}")
    return 0


def cmd_query(args, config: AppConfig) -> int:
    workspace = Workspace(config.workspace)
    gateway = build_gateway(config)
    table_ids = workspace.table_ids()
    if not table_ids:
        print("no tables in workspace; run ingest/discretize/enumerate/generate first",
              file=sys.stderr)
        return 1
    runtimes = {t: _runtime_for(config, workspace, t) for t in table_ids}
    if args.table:
        if args.table not in runtimes:
            print(f"unknown table {args.table!r}", file=sys.stderr)
            return 1
        target = runtimes[args.table]
    else:
        from .agent import route_table

        routed = route_table(
            args.question, [r.catalog for r in runtimes.values()]
        )
        target = runtimes[routed]
    query = text_to_sql(
        args.question,
        target.schema,
        target.catalog,
        DialogState(active_table=target.table_id),
        gateway,
    )
    print(f"-- table: {target.table_id}")
    print(f"-- status: {query.report.status}")
    print(query.raw_sql)
    for issue in query.report.issues:
        print(f"-- issue: {issue.kind} at {issue.location}: {issue.detail}")
    for repair in query.report.repairs:
        print(f"-- repair: {repair.before!r} -> {repair.after!r}")
    if query.report.status == "rejected":
        return 1
    result = execute(query, target.store)
    print("\t".join(result.columns))
    for row in result.rows:
        print("\t".join("" if cell is None else str(cell) for cell in row))
    print(f"-- {len(result.rows)} row(s)")
    return 0


def cmd_chat(args, config: AppConfig) -> int:
    workspace = Workspace(config.workspace)
    gateway = build_gateway(config)
    table_ids = workspace.table_ids()
    if not table_ids:
        print("no tables in workspace", file=sys.stderr)
        return 1
    runtime = AgentRuntime(
        gateway=gateway,
        tables={t: _runtime_for(config, workspace, t) for t in table_ids},
    )
    storage = SessionStorage(workspace.sessions_dir())
    session = Session(session_id=args.session or uuid.uuid4().hex[:12])
    print(f"session {session.session_id}; empty line to quit")
    stream = open(args.script, encoding="utf-8") if args.script else sys.stdin
    try:
        while True:
            if stream is sys.stdin:
                print("you> ", end="", flush=True)
            line = stream.readline()
            if not line or not line.strip():
                break
            if stream is not sys.stdin:
                print(f"you> {line.strip()}")
            turn = step(session, line.strip(), runtime)
            storage.append(session.session_id, turn)
            print(f"dir> {turn.response}")
            if turn.query is not None:
                print(f"     sql: {turn.query.raw_sql} [{turn.query.report.status}]")
            constraints = ", ".join(
                f"{c.column} {c.op} {c.operand}"
                for c in turn.state_after.constraints.values()
            )
            print(f"     state: {constraints or '(no constraints)'}")
    finally:
        if stream is not sys.stdin:
            stream.close()
    return 0


def cmd_eval(args, config: AppConfig) -> int:
    spec = default_corpus_spec(rows_per_domain=args.rows, seed=args.seed)
    env = prepare_environment(spec)
    if args.suite:
        suite = [
            QueryIntent.from_dict(json.loads(line))
            for line in Path(args.suite).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    else:
        suite = generate_suite(spec, count=args.count, seed=args.seed)
    systems = [s.strip() for s in args.systems.split(",") if s.strip()]
    reports = [evaluate(system, suite, env) for system in systems]
    print(format_report_table(reports))
    if args.out:
        Path(args.out).write_text(
            json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        print(f"report written to {args.out}")
    return 0


def cmd_serve(args, config: AppConfig) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(config)
    uvicorn.run(app, host=args.host or config.host, port=args.port or config.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dir",
        description="Query free text and structured columns through one SQL interface.",
    )
    parser.add_argument("--config", help="path to the TOML configuration file")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a CSV/JSONL file into the workspace")
    p.add_argument("--input", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--domain", default=None)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("discretize", help="extract key-value tuples from text fields")
    p.add_argument("--table", required=True)
    p.set_defaults(handler=cmd_discretize)

    p = sub.add_parser("enumerate", help="build the enumeration catalog")
    p.add_argument("--table", required=True)
    p.set_defaults(handler=cmd_enumerate)

    p = sub.add_parser("generate", help="materialize the store and joined view")
    p.add_argument("--table", required=True)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("query", help="run one natural-language question")
    p.add_argument("question")
    p.add_argument("--table", default=None)
    p.set_defaults(handler=cmd_query)

    p = sub.add_parser("chat", help="interactive multi-turn session")
    p.add_argument("--session", default=None)
    p.add_argument("--script", default=None, help="read utterances from a file")
    p.set_defaults(handler=cmd_chat)

    p = sub.add_parser("eval", help="compare systems on the synthetic corpus")
    p.add_argument("--systems", default="dir,like,lexical")
    p.add_argument("--rows", type=int, default=400)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--suite", default=None, help="JSONL intent file")
    p.add_argument("--out", default=None, help="write the JSON report here")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(handler=cmd_serve)

    return parser


def run_command(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config)
        return args.handler(args, config)
    except DirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort boundary
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
