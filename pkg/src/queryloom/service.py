"""HTTP service: sessions, multi-turn context, pipeline invocation, trace
retrieval, and the two feedback loops (human SQL corrections into memory,
machine-to-human clarification)."""
# note: no postponed annotations here -- the HTTP layer's request models are
# defined inside create_app and FastAPI must see real (non-string) types
import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .catalog import Catalog
from .errors import NotFound, SessionBusy, UnknownDomain
from .execution import EmbeddedConnection
from .memory import MemoryStore
from .resultgen import ClarificationRequest
from .sqlkit import extract_lineage, validate
from .synthesizer import (
    Pipeline,
    PipelineConfig,
    Refusal,
    SessionState,
    TurnOutcome,
)


@dataclass
class Turn:
    question: str
    kind: str  # "answered" | "clarifying" | "refused"
    response: dict
    trace_id: Optional[str] = None


@dataclass
class Session:
    session_id: str
    user_id: str
    domain_id: str
    turns: list = field(default_factory=list)  # append-only
    state: SessionState = None
    pending_clarification: Optional[dict] = None
    pending_question: Optional[str] = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    def __post_init__(self):
        if self.state is None:
            self.state = SessionState(domain_id=self.domain_id)


class AnalysisService:
    """Transport-independent core the HTTP layer delegates to."""

    def __init__(self, catalog: Catalog, memory: MemoryStore, provider,
                 connection_factory, config: Optional[PipelineConfig] = None,
                 sessions_dir: Optional[str | Path] = None):
        self.catalog = catalog
        self.memory = memory
        self.provider = provider
        self.connection_factory = connection_factory  # domain_id -> connection
        self.config = config or PipelineConfig()
        self.sessions_dir = Path(sessions_dir) if sessions_dir else None
        self._sessions: dict[str, Session] = {}
        self._traces: dict[str, dict] = {}
        self._connections: dict[str, object] = {}

    # -- sessions -----------------------------------------------------------

    def create_session(self, user_id: str, domain_id: str) -> str:
        self.catalog.domain(domain_id)  # raises UnknownDomain
        session_id = uuid.uuid4().hex[:12]
        self._sessions[session_id] = Session(session_id, user_id, domain_id)
        self._log(session_id, {"event": "created", "user_id": user_id,
                               "domain_id": domain_id})
        return session_id

    def session(self, session_id: str) -> Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise NotFound(f"session {session_id!r} does not exist") from None

    def _log(self, session_id: str, record: dict) -> None:
        if self.sessions_dir is None:
            return
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        path = self.sessions_dir / f"{session_id}.jsonl"
        with path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True,
                                default=str) + "\n")

    def _connection(self, domain_id: str):
        if domain_id not in self._connections:
            self._connections[domain_id] = self.connection_factory(domain_id)
        return self._connections[domain_id]

    # -- messages -----------------------------------------------------------

    def post_message(self, session_id: str, question: str) -> dict:
        session = self.session(session_id)
        if not session.lock.acquire(blocking=False):
            raise SessionBusy(f"session {session_id!r} has a turn in flight")
        try:
            return self._handle_message(session, question)
        finally:
            session.lock.release()

    def _handle_message(self, session: Session, question: str) -> dict:
        if session.pending_clarification is not None:
            response = self._resolve_clarification(session, question)
        else:
            response = self._run_turn(session, question)
        kind = response["state"]
        session.turns.append(Turn(question=question, kind=kind,
                                  response=response,
                                  trace_id=response.get("trace_id")))
        self._log(session.session_id,
                  {"event": "turn", "question": question, "response": response})
        return response

    def _resolve_clarification(self, session: Session, answer: str) -> dict:
        pending = session.pending_clarification
        original = session.pending_question
        if pending["kind"] == "formula":
            session.state.formulas[pending["parameter"]] = answer
        else:
            acceptable = pending.get("acceptable_values") or []
            if acceptable and answer not in acceptable:
                # the message cleared the old pending state; an invalid value
                # arms a fresh clarification for the same parameter
                renewed = dict(pending,
                               reason=f"{answer!r} is not an acceptable value")
                session.pending_clarification = renewed
                return {"state": "clarifying", "clarification": renewed}
            original = f"{original} [{pending['parameter']}: {answer}]"
        session.pending_clarification = None
        session.pending_question = None
        return self._run_turn(session, original)

    def _run_turn(self, session: Session, question: str) -> dict:
        pipeline = Pipeline(
            catalog=self.catalog,
            memory=self.memory,
            provider=self.provider,
            connection=self._connection(session.domain_id),
            config=self.config,
        )
        outcome = pipeline.run(session.user_id, session.state, question)

        if isinstance(outcome, ClarificationRequest):
            trace_id = self._store_trace(outcome.trace)
            session.pending_clarification = outcome.to_dict()
            session.pending_question = question
            return {"state": "clarifying", "clarification": outcome.to_dict(),
                    "trace_id": trace_id}
        if isinstance(outcome, Refusal):
            trace_id = self._store_trace(outcome.trace)
            return {"state": "refused",
                    "refusal": {"stage": outcome.stage, "reason": outcome.reason},
                    "trace_id": trace_id}

        assert isinstance(outcome, TurnOutcome)
        trace_id = self._store_trace(outcome.trace)
        session.state.history.append(
            {"question": question, "answer": outcome.narrative}
        )
        return {
            "state": "answered",
            "text": outcome.narrative,
            "sql": outcome.sql,
            "chart": outcome.chart,
            "result": outcome.result.to_dict() if outcome.result else None,
            "trace_id": trace_id,
        }

    def _store_trace(self, trace) -> Optional[str]:
        if trace is None:
            return None
        doc = trace.to_dict()
        self._traces[doc["trace_id"]] = doc
        return doc["trace_id"]

    # -- feedback -----------------------------------------------------------

    def post_feedback(self, session_id: str, turn_index: int,
                      corrected_sql: str, submitted_by: str = "") -> dict:
        session = self.session(session_id)
        try:
            turn = session.turns[turn_index]
        except IndexError:
            raise NotFound(f"turn {turn_index} does not exist") from None
        dialect = self._domain_dialect(session.domain_id)
        diagnostics = validate(corrected_sql, dialect, self.catalog)
        if diagnostics:
            return {"status": "rejected",
                    "diagnostics": [str(d) for d in diagnostics]}
        lineage = extract_lineage(corrected_sql, dialect, self.catalog)
        self.memory.upsert_text(
            query=turn.question,
            sql=corrected_sql,
            tables=lineage.tables,
            fields=lineage.fields,
            domain_id=session.domain_id,
            origin="feedback",
        )
        self._log(session_id, {"event": "feedback", "turn_index": turn_index,
                               "corrected_sql": corrected_sql,
                               "submitted_by": submitted_by})
        return {"status": "accepted"}

    def _domain_dialect(self, domain_id: str) -> str:
        schemas = self.catalog.domain_schemas(domain_id)
        return schemas[0].dialect if schemas else "embedded"

    # -- traces -------------------------------------------------------------

    def get_trace(self, trace_id: str) -> dict:
        try:
            return self._traces[trace_id]
        except KeyError:
            raise NotFound(f"trace {trace_id!r} does not exist") from None


# --- HTTP layer ------------------------------------------------------------

def create_app(service: AnalysisService):
    from fastapi import FastAPI, Header, HTTPException
    from pydantic import BaseModel

    class CreateSessionBody(BaseModel):
        domain_id: str

    class MessageBody(BaseModel):
        question: str

    class FeedbackBody(BaseModel):
        turn_index: int
        corrected_sql: str

    app = FastAPI(title="queryloom", version="1.0")

    @app.get("/v1/health")
    def health():
        return {"status": "ok"}

    @app.post("/v1/sessions", status_code=201)
    def create_session(body: CreateSessionBody,
                       x_user_id: str = Header(default="anonymous")):
        try:
            session_id = service.create_session(x_user_id, body.domain_id)
        except UnknownDomain as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {"session_id": session_id}

    @app.post("/v1/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageBody):
        try:
            return service.post_message(session_id, body.question)
        except NotFound as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except SessionBusy as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    @app.post("/v1/sessions/{session_id}/feedback")
    def post_feedback(session_id: str, body: FeedbackBody):
        try:
            return service.post_feedback(session_id, body.turn_index,
                                         body.corrected_sql)
        except NotFound as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.get("/v1/traces/{trace_id}")
    def get_trace(trace_id: str):
        try:
            return service.get_trace(trace_id)
        except NotFound as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    return app


def embedded_service(catalog: Catalog, memory: MemoryStore, provider,
                     fixtures: dict, config: Optional[PipelineConfig] = None,
                     sessions_dir: Optional[str | Path] = None) -> AnalysisService:
    """Convenience constructor: one embedded sqlite connection per domain,
    loaded from the given DDL+INSERT scripts."""

    def factory(domain_id: str):
        conn = EmbeddedConnection()
        script = fixtures.get(domain_id)
        if script:
            conn.load_script(script)
        return conn

    return AnalysisService(catalog, memory, provider, factory, config,
                           sessions_dir)
