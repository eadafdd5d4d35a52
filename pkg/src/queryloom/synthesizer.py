"""Online back half of SQL production: in-context generation under a token
budget, validation-triggered reflection, zero-trust authorization,
execution, and the end-to-end pipeline."""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import Optional

from . import resultgen
from .catalog import AuthVerdict, Catalog
from .errors import (
    BudgetUnsatisfiable,
    ExecutionError,
    LlmMalformedOutput,
    NotConfigured,
    QueryloomError,
    ReflectionFailed,
    ReflectionNotApplicable,
)
from .execution import DEFAULT_ROW_LIMIT, ExecutionResult
from .gateway import extract_fenced
from .gateway.providers import estimate_tokens
from .memory import Demonstration, MemoryStore
from .planner import (
    RecallBundle,
    SchemaLink,
    call_model,
    decide_intent,
    hybrid_recall,
    multi_recall,
    render_schema_info,
    schema_link,
)
from .sqlkit import extract_lineage, validate
from .sqlkit.diagnostics import SqlDiagnostic

DEFAULT_TOKEN_BUDGET = 3000
DEFAULT_MAX_REFLECTION_ROUNDS = 2


# --- trace -----------------------------------------------------------------

def _digest(payload) -> str:
    # to_dict() forms are canonical (they exclude timings); anything else
    # falls back to its repr
    def default(obj):
        if hasattr(obj, "to_dict"):
            return obj.to_dict()
        return str(obj)

    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, default=default)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass
class StageRecord:
    stage: str
    verdict: str
    input_digest: str
    output_digest: str
    elapsed_ms: float

    def canonical(self) -> dict:
        # timings excluded: the canonical form is what determinism is judged on
        return {
            "stage": self.stage,
            "verdict": self.verdict,
            "input_digest": self.input_digest,
            "output_digest": self.output_digest,
        }


class PipelineTrace:
    def __init__(self):
        self.records: list[StageRecord] = []

    def add(self, stage: str, verdict: str, inputs, outputs, elapsed_ms: float) -> None:
        self.records.append(
            StageRecord(stage, verdict, _digest(inputs), _digest(outputs), elapsed_ms)
        )

    def stages(self) -> list[str]:
        return [r.stage for r in self.records]

    def canonical(self) -> list[dict]:
        return [r.canonical() for r in self.records]

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.canonical(), sort_keys=True).encode("utf-8")

    @property
    def trace_id(self) -> str:
        return hashlib.sha256(self.canonical_bytes()).hexdigest()[:20]

    def to_dict(self) -> dict:
        return {
            "trace_id": self.trace_id,
            "stages": [
                dict(r.canonical(), elapsed_ms=r.elapsed_ms) for r in self.records
            ],
        }


# --- outcomes --------------------------------------------------------------

@dataclass
class TurnOutcome:
    sql: Optional[str]
    result: Optional[ExecutionResult]
    narrative: str
    chart: Optional[dict]
    trace: PipelineTrace


ClarificationRequest = resultgen.ClarificationRequest


@dataclass
class Refusal:
    stage: str
    reason: str
    trace: Optional[PipelineTrace] = None


# --- generation ------------------------------------------------------------

@dataclass
class GenerationContext:
    dialect: str
    schema_links: SchemaLink
    examples: RecallBundle
    completed_question: str
    table_info: str
    token_budget: int = DEFAULT_TOKEN_BUDGET


def format_examples(demos: list[Demonstration]) -> str:
    blocks = []
    for i, demo in enumerate(demos, 1):
        blocks.append(f"--Query{i}: {demo.query}\n--SQL{i}:\n{demo.sql}")
    return "\n\n".join(blocks)


def _fit_examples(ctx: GenerationContext) -> list[Demonstration]:
    """Drop the weakest examples until the rendered prompt fits the budget.
    The kernel example (last in the merged bundle when evicted in) survives
    any budget that admits at least one example."""
    demos = list(ctx.examples.examples)
    kernel = demos[-1] if ctx.examples.kernel_included and demos else None

    def estimate(selection: list[Demonstration]) -> int:
        prompt = _render_generation_prompt(ctx, selection)
        return estimate_tokens(prompt)

    while demos and estimate(demos) > ctx.token_budget:
        # evict the lowest-ranked non-kernel example
        for idx in range(len(demos) - 1, -1, -1):
            if kernel is None or demos[idx].id != kernel.id:
                del demos[idx]
                break
        else:
            demos = []
    if not demos and estimate([]) > ctx.token_budget:
        raise BudgetUnsatisfiable(
            f"prompt exceeds token budget {ctx.token_budget} with zero examples"
        )
    return demos


def _render_generation_prompt(ctx: GenerationContext,
                              demos: list[Demonstration]) -> str:
    from .gateway import render

    return render("sql_generation", {
        "dialect": ctx.dialect,
        "table_info": ctx.table_info,
        "examples": format_examples(demos),
        "query": ctx.completed_question,
    })


def generate_sql(ctx: GenerationContext, provider) -> str:
    demos = _fit_examples(ctx)
    bindings = {
        "dialect": ctx.dialect,
        "table_info": ctx.table_info,
        "examples": format_examples(demos),
        "query": ctx.completed_question,
    }

    def parser(text: str) -> str:
        sql = extract_fenced(text, "sql")
        if not sql.strip():
            raise LlmMalformedOutput("empty SQL")
        return sql

    return call_model(provider, "sql_generation", bindings, parser)


# --- reflection ------------------------------------------------------------

def reflect(sql: str, diagnostics: list[SqlDiagnostic], table_info: str,
            dialect: str, catalog: Catalog, provider,
            max_rounds: int = DEFAULT_MAX_REFLECTION_ROUNDS) -> str:
    """LLM repair loop, activated solely on concrete diagnostics. Stops early
    once the SQL validates clean; raises ReflectionFailed after max_rounds."""
    if not diagnostics:
        raise ReflectionNotApplicable("reflection must not run on clean SQL")

    current_sql = sql
    current_diags = list(diagnostics)
    for _ in range(max_rounds):
        bindings = {
            "dialect": dialect,
            "table_info": table_info,
            "sql": current_sql,
            "diagnostics": "\n".join(f"- {d}" for d in current_diags),
        }

        def parser(text: str) -> str:
            fixed = extract_fenced(text, "sql")
            if not fixed.strip():
                raise LlmMalformedOutput("empty SQL")
            return fixed

        try:
            current_sql = call_model(provider, "sql_reflection", bindings, parser)
        except LlmMalformedOutput:
            raise ReflectionFailed("reflection output malformed", current_diags)
        current_diags = validate(current_sql, dialect, catalog)
        if not current_diags:
            return current_sql
    raise ReflectionFailed(
        f"still invalid after {max_rounds} reflection rounds", current_diags
    )


# --- authorization ---------------------------------------------------------

def authorize(user_id: str, sql: str, dialect: str, catalog: Catalog) -> AuthVerdict:
    """Zero-trust gate: extracted lineage must be fully covered by grants.
    Unresolvable lineage fails closed."""
    lineage = extract_lineage(sql, dialect, catalog)
    if lineage.unresolved_columns:
        return AuthVerdict(
            False,
            missing=[("?", c) for c in sorted(lineage.unresolved_columns)],
            reason="inadequate authorization: unresolved column lineage",
        )
    verdict = catalog.check_access(user_id, lineage.fields)
    # tables referenced without any column (e.g. COUNT(*)) still need a grant
    grants = catalog.grants_for(user_id)
    columned = {t.lower() for t, _ in lineage.fields}
    for table in sorted(lineage.tables):
        if table.lower() in columned:
            continue
        if not any(g.table_name.lower() == table.lower() for g in grants):
            verdict.allowed = False
            verdict.missing.append((table, "*"))
            verdict.reason = verdict.reason or "inadequate authorization"
    return verdict


def execute(sql: str, connection, row_limit: int = DEFAULT_ROW_LIMIT) -> ExecutionResult:
    return connection.execute(sql, row_limit=row_limit)


# --- pipeline --------------------------------------------------------------

@dataclass
class PipelineConfig:
    k_examples: int = 5
    token_budget: int = DEFAULT_TOKEN_BUDGET
    max_reflection_rounds: int = DEFAULT_MAX_REFLECTION_ROUNDS
    row_limit: int = DEFAULT_ROW_LIMIT
    recall_strategy: str = "direct"
    metric_lexicon: tuple = ()
    # per-domain clarification parameters: name -> list of acceptable values
    clarification_parameters: dict = field(default_factory=dict)
    reflection_enabled: bool = True
    slot_extraction_enabled: bool = True
    examples_enabled: bool = True


@dataclass
class SessionState:
    """Minimal per-session context the pipeline needs; the service layer
    wraps this with persistence."""

    domain_id: str
    history: list[dict] = field(default_factory=list)
    cached_result: Optional[ExecutionResult] = None
    cached_question: str = ""
    formulas: dict = field(default_factory=dict)  # metric name -> user formula


class Pipeline:
    def __init__(self, catalog: Catalog, memory: MemoryStore, provider,
                 connection, config: Optional[PipelineConfig] = None):
        self.catalog = catalog
        self.memory = memory
        self.provider = provider
        self.connection = connection
        self.config = config or PipelineConfig()

    def run(self, user_id: str, session: SessionState, question: str):
        trace = PipelineTrace()
        try:
            return self._run(user_id, session, question, trace)
        except QueryloomError as exc:
            stage = getattr(exc, "pipeline_stage", "internal")
            trace.add(stage, f"error:{type(exc).__name__}", question, str(exc), 0.0)
            return Refusal(stage=stage, reason=str(exc), trace=trace)

    def _timed(self, trace: PipelineTrace, stage: str, inputs, fn):
        start = time.perf_counter()
        try:
            output = fn()
        except QueryloomError as exc:
            exc.pipeline_stage = stage
            raise
        elapsed = (time.perf_counter() - start) * 1000.0
        trace.add(stage, "ok", inputs, output, elapsed)
        return output

    def _run(self, user_id: str, session: SessionState, question: str,
             trace: PipelineTrace):
        config = self.config
        domain = self.catalog.domain(session.domain_id)
        schemas = self.catalog.domain_schemas(session.domain_id)
        dialect = schemas[0].dialect if schemas else "embedded"

        # 1. intent understanding & decision-making
        nearby = [h.demonstration.query for h in
                  self.memory.search(question, k=3, domain_id=session.domain_id)] \
            if len(self.memory.records(session.domain_id)) else []
        decision = self._timed(trace, "intent", question, lambda: decide_intent(
            session.history, question, nearby, self.provider,
            topic=f"domain {domain.domain_id}: tables {', '.join(domain.tables)}",
        ))

        # clarification-parameter rule: an inferred value outside its
        # acceptable range halts the turn with a machine-to-human question
        for name, value in sorted(decision.bindings.items()):
            acceptable = config.clarification_parameters.get(name)
            if acceptable is not None and value not in acceptable:
                trace.add("clarify", "out_of_range", question,
                          {"parameter": name, "value": value}, 0.0)
                return ClarificationRequest(
                    parameter=name, kind="parameter",
                    acceptable_values=list(acceptable),
                    reason=f"inferred value {value!r} for {name!r} is outside "
                           f"the acceptable range",
                    trace=trace,
                )

        if not decision.relevant:
            trace.add("refusal", "irrelevant", question, decision.completed_question, 0.0)
            return Refusal(stage="intent",
                           reason="question is outside the scope of this domain",
                           trace=trace)

        # 2. direct-plot shortcut from the cached result
        if decision.direct_plot and session.cached_result is not None:
            chart = self._timed(trace, "resultgen", decision.completed_question,
                                lambda: self._chart(decision,
                                                    session.cached_question or question,
                                                    session.cached_result))
            return TurnOutcome(sql=None, result=session.cached_result,
                               narrative="", chart=chart, trace=trace)

        completed = decision.completed_question

        # 3. multiple recall of candidate tables
        candidates = self._timed(trace, "recall", completed, lambda: multi_recall(
            completed, session.domain_id, self.catalog, self.memory,
            strategy=config.recall_strategy,
        ))
        if not candidates:
            return Refusal(stage="recall",
                           reason="no candidate tables matched the question; "
                                  "please rephrase with more detail",
                           trace=trace)
        candidate_schemas = [self.catalog.table(t) for t in candidates]

        # 4. schema linking
        link = self._timed(trace, "schema_link", completed, lambda: schema_link(
            completed, candidate_schemas, [], self.provider))

        # 5. knowledge enhancement: uncomputable metric terms need a formula
        gap = resultgen.knowledge_gap(
            completed, link, config.metric_lexicon, known_formulas=session.formulas)
        if gap is not None:
            trace.add("knowledge_gap", "clarify", completed, gap.parameter, 0.0)
            gap.trace = trace
            return gap

        # 6. in-context example recall
        if config.examples_enabled:
            if config.slot_extraction_enabled:
                bundle = self._timed(trace, "example_recall", completed,
                                     lambda: hybrid_recall(completed, config.k_examples,
                                                           session.domain_id, self.memory,
                                                           self.provider))
            else:
                hits = self.memory.search(completed, k=config.k_examples,
                                          domain_id=session.domain_id)
                bundle = RecallBundle([h.demonstration for h in hits],
                                      kernel_included=False,
                                      channels_used={"similarity"})
                trace.add("example_recall", "ok", completed,
                          [d.id for d in bundle.examples], 0.0)
        else:
            bundle = RecallBundle([], kernel_included=False, channels_used=set())
            trace.add("example_recall", "disabled", completed, [], 0.0)

        # 7. SQL generation
        table_info = render_schema_info(
            [self.catalog.table(t) for t in link.tables()] or candidate_schemas,
            enum_fields=link.pairs(),
        )
        if session.formulas:
            table_info += "\n" + "\n".join(
                f"Formula {name}: {formula}" for name, formula in sorted(session.formulas.items())
            )
        ctx = GenerationContext(
            dialect=dialect, schema_links=link, examples=bundle,
            completed_question=completed, table_info=table_info,
            token_budget=config.token_budget,
        )
        sql = self._timed(trace, "generate", completed,
                          lambda: generate_sql(ctx, self.provider))

        # 8. validate, then reflect only on concrete diagnostics
        diagnostics = validate(sql, dialect, self.catalog)
        trace.add("validate", "clean" if not diagnostics else "diagnostics",
                  sql, [str(d) for d in diagnostics], 0.0)
        if diagnostics:
            if not config.reflection_enabled:
                return Refusal(stage="validate",
                               reason="; ".join(str(d) for d in diagnostics),
                               trace=trace)
            sql = self._timed(trace, "reflect", sql, lambda: reflect(
                sql, diagnostics, table_info, dialect, self.catalog,
                self.provider, config.max_reflection_rounds))

        # 9. zero-trust authorization precedes execution on every path
        verdict = self._timed(trace, "authorize", (user_id, sql),
                              lambda: authorize(user_id, sql, dialect, self.catalog))
        if not verdict.allowed:
            missing = ", ".join(f"{t}.{c}" for t, c in verdict.missing)
            return Refusal(stage="authorize",
                           reason=f"inadequate authorization: missing grants for {missing}",
                           trace=trace)

        # 10. execution
        result = self._timed(trace, "execute", sql,
                             lambda: execute(sql, self.connection,
                                             row_limit=config.row_limit))

        # 11. result generation: narrative and optional chart
        narrative = self._timed(trace, "resultgen", completed,
                                lambda: resultgen.text_analysis(
                                    completed, result, self.provider))
        chart = None
        if decision.chart_hint:
            chart = self._timed(trace, "chart", decision.chart_hint,
                                lambda: self._chart(decision, completed, result))

        session.cached_result = result
        session.cached_question = completed
        return TurnOutcome(sql=sql, result=result, narrative=narrative,
                           chart=chart, trace=trace)

    def _chart(self, decision, question: str, result: ExecutionResult) -> dict:
        chart_type = decision.chart_hint or "bar"
        # two-column tabular results take the deterministic normalized path;
        # anything else goes through the full LLM chart builder
        if len(result.columns) == 2:
            axis = resultgen.AxisChoice(
                x_axis=result.columns[0], y_axis=result.columns[1], chart_type=chart_type
            )
            spec = resultgen.chart_normalized(result, axis)
        else:
            spec = resultgen.chart_full(question, chart_type, result, self.provider)
        return spec.option_json
