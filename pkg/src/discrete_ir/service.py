"""HTTP facade over ingestion, querying, and chat sessions.

Errors carry a machine-readable kind: 4xx for user problems, 5xx for
internal ones, body shape {"error": {"kind": ..., "detail": ...}}.
Turn posts to one session are serialized; GET endpoints never mutate.
"""

from __future__ import annotations

import io
import logging
import threading
import uuid
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .agent import AgentRuntime, Session, SessionStorage, TableRuntime, step
from .catalog import save_catalog
from .config import AppConfig, Workspace, build_gateway
from .errors import DirError, RoutingError
from .ingest import IngestConfig, load_context_table
from .llm import LlmGateway
from .model import DialogState
from .pipeline import run_full_pipeline
from .store import Store
from .text2sql import execute, text_to_sql

log = logging.getLogger(__name__)


class ServiceError(Exception):
    def __init__(self, status_code: int, kind: str, detail: str):
        super().__init__(detail)
        self.status_code = status_code
        self.kind = kind
        self.detail = detail


class TableRequest(BaseModel):
    table_id: str
    domain_id: Optional[str] = None
    csv_text: str
    primary_key: str = "product_id"
    text_columns: Optional[list[str]] = None


class QueryRequest(BaseModel):
    question: str
    table_id: Optional[str] = None


class TurnRequest(BaseModel):
    utterance: str


class ServiceState:
    """Mutable service-wide state: registered tables, sessions, jobs."""

    def __init__(self, config: AppConfig, gateway: LlmGateway):
        self.config = config
        self.workspace = Workspace(config.workspace)
        self.gateway = gateway
        self.tables: dict[str, TableRuntime] = {}
        self.row_counts: dict[str, int] = {}
        self.jobs: dict[str, dict] = {}
        self.sessions: dict[str, Session] = {}
        self.session_locks: dict[str, threading.Lock] = {}
        self.registry_lock = threading.Lock()
        self.storage = SessionStorage(self.workspace.sessions_dir())
        self._load_workspace()

    def _load_workspace(self) -> None:
        """Register tables whose artifacts already exist (restart safety)."""
        from .catalog import load_catalog
        from .model import ContextTable
        from .store import JoinedSchema

        for table_id in self.workspace.table_ids():
            try:
                catalog = load_catalog(self.workspace.catalog_path(table_id))
                schema = JoinedSchema.from_dict(
                    self.workspace.read_json(self.workspace.schema_path(table_id))
                )
                table = ContextTable.from_dict(
                    self.workspace.read_json(self.workspace.table_path(table_id))
                )
                store_path = self.workspace.store_path(table_id)
                if not store_path.exists():
                    raise FileNotFoundError(store_path)
                store = Store(store_path, max_columns=self.config.store_max_columns)
            except Exception as exc:  # noqa: BLE001 - partial artifacts are skippable
                log.warning("skipping table %r at startup: %s", table_id, exc)
                continue
            self.tables[table_id] = TableRuntime(
                table_id=table_id,
                domain_id=table.domain_id,
                schema=schema,
                catalog=catalog,
                store=store,
            )
            self.row_counts[table_id] = len(table.rows)
            self.jobs[table_id] = {"status": "ready"}

    @property
    def agent_runtime(self) -> AgentRuntime:
        return AgentRuntime(gateway=self.gateway, tables=self.tables)

    def require_table(self, table_id: str) -> TableRuntime:
        runtime = self.tables.get(table_id)
        if runtime is None:
            raise ServiceError(404, "unknown_table", f"no table {table_id!r}")
        return runtime

    def require_session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None and self.storage.exists(session_id):
            with self.registry_lock:
                session = self.sessions.get(session_id)
                if session is None:
                    session = self.storage.load(session_id)
                    self.sessions[session_id] = session
                    self.session_locks[session_id] = threading.Lock()
        if session is None:
            raise ServiceError(404, "unknown_session", f"no session {session_id!r}")
        return session

    def run_pipeline_job(self, request: TableRequest) -> None:
        table_id = request.table_id
        try:
            ingest = IngestConfig(
                primary_key=request.primary_key,
                declared_text_columns=(
                    tuple(request.text_columns) if request.text_columns else None
                ),
                text_detection_threshold=self.config.ingest.text_detection_threshold,
                min_avg_text_length=self.config.ingest.min_avg_text_length,
            )
            table = load_context_table(
                io.StringIO(request.csv_text),
                ingest,
                table_id=table_id,
                domain_id=request.domain_id or table_id,
            )
            store_path = self.workspace.store_path(table_id)
            store_path.parent.mkdir(parents=True, exist_ok=True)
            if store_path.exists():
                store_path.unlink()
            store = Store(store_path, max_columns=self.config.store_max_columns)
            result = run_full_pipeline(table, self.gateway, self.config.cap_policy, store)
            self.workspace.write_json(
                self.workspace.table_path(table_id), table.to_dict()
            )
            save_catalog(result.catalog, self.workspace.catalog_path(table_id))
            self.workspace.write_json(
                self.workspace.schema_path(table_id), result.schema.to_dict()
            )
            with self.registry_lock:
                self.tables[table_id] = TableRuntime(
                    table_id=table_id,
                    domain_id=table.domain_id,
                    schema=result.schema,
                    catalog=result.catalog,
                    store=store,
                )
                self.row_counts[table_id] = len(table.rows)
                self.jobs[table_id] = {"status": "ready"}
        except Exception as exc:  # noqa: BLE001 - job boundary
            log.exception("pipeline job for %r failed", table_id)
            with self.registry_lock:
                self.jobs[table_id] = {"status": "failed", "error": str(exc)}


def create_app(
    config: AppConfig | None = None,
    gateway: LlmGateway | None = None,
    synchronous_jobs: bool = False,
) -> FastAPI:
    """Build the application; tests may inject a gateway and run jobs inline."""
    config = config or AppConfig()
    state = ServiceState(config, gateway or build_gateway(config))
    app = FastAPI(title="discrete-ir")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.service = state

    @app.exception_handler(ServiceError)
    async def service_error_handler(_request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status_code,
            content={"error": {"kind": exc.kind, "detail": exc.detail}},
        )

    @app.exception_handler(DirError)
    async def dir_error_handler(_request: Request, exc: DirError):
        return JSONResponse(
            status_code=400,
            content={"error": {"kind": type(exc).__name__, "detail": str(exc)}},
        )

    @app.post("/tables", status_code=202)
    def create_table(request: TableRequest):
        if not request.csv_text.strip():
            raise ServiceError(400, "empty_table", "csv_text is empty")
        with state.registry_lock:
            state.jobs[request.table_id] = {"status": "running"}
        if synchronous_jobs:
            state.run_pipeline_job(request)
        else:
            threading.Thread(
                target=state.run_pipeline_job, args=(request,), daemon=True
            ).start()
        return {"table_id": request.table_id, "status": state.jobs[request.table_id]["status"]}

    @app.get("/tables")
    def list_tables():
        with state.registry_lock:
            return {
                "tables": [
                    {
                        "table_id": t.table_id,
                        "domain_id": t.domain_id,
                        "rows": state.row_counts.get(t.table_id, 0),
                        "columns": len(t.schema.columns),
                    }
                    for t in state.tables.values()
                ]
            }

    @app.get("/tables/{table_id}/status")
    def table_status(table_id: str):
        job = state.jobs.get(table_id)
        if job is None:
            raise ServiceError(404, "unknown_table", f"no pipeline ran for {table_id!r}")
        return {"table_id": table_id, **job}

    @app.get("/tables/{table_id}/schema")
    def table_schema(table_id: str):
        return state.require_table(table_id).schema.to_dict()

    @app.get("/tables/{table_id}/catalog")
    def table_catalog(table_id: str):
        return state.require_table(table_id).catalog.to_dict()

    @app.post("/query")
    def query(request: QueryRequest):
        if not request.question.strip():
            raise ServiceError(400, "empty_question", "question is empty")
        if request.table_id is not None:
            runtime = state.require_table(request.table_id)
        else:
            if not state.tables:
                raise ServiceError(404, "no_tables", "no tables registered")
            from .agent import route_table

            try:
                routed = route_table(
                    request.question,
                    [t.catalog for t in state.tables.values()],
                    {t.table_id: t.domain_id for t in state.tables.values()},
                )
            except RoutingError as exc:
                raise ServiceError(422, "routing_failed", str(exc)) from exc
            runtime = state.tables[routed]
        generated = text_to_sql(
            request.question,
            runtime.schema,
            runtime.catalog,
            DialogState(active_table=runtime.table_id),
            state.gateway,
        )
        body = {
            "table_id": runtime.table_id,
            "query": generated.to_dict(),
            "columns": [],
            "rows": [],
        }
        if generated.report.status != "rejected":
            result = execute(generated, runtime.store)
            body["columns"] = list(result.columns)
            body["rows"] = [list(r) for r in result.rows]
        return body

    @app.post("/sessions", status_code=201)
    def create_session():
        session_id = uuid.uuid4().hex[:12]
        with state.registry_lock:
            state.sessions[session_id] = Session(session_id=session_id)
            state.session_locks[session_id] = threading.Lock()
        return {"session_id": session_id}

    @app.post("/sessions/{session_id}/turns")
    def post_turn(session_id: str, request: TurnRequest):
        session = state.require_session(session_id)
        if not request.utterance.strip():
            raise ServiceError(400, "empty_utterance", "utterance is empty")
        if not state.tables:
            raise ServiceError(409, "no_tables", "no tables registered yet")
        lock = state.session_locks[session_id]
        with lock:  # one in-flight turn per session
            turn = step(session, request.utterance, state.agent_runtime)
            state.storage.append(session_id, turn)
        return turn.to_dict()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return state.require_session(session_id).to_dict()

    return app


def serve(config: AppConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port)
