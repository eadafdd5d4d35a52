"""Measurement machinery: EM, EX and HA metrics, the four-dimension
difficulty classifier, the augmentation-arm ablation runner, and the recall
and slot/reflection experiments."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import resultgen
from .augment import sql2nl
from .catalog import Catalog
from .errors import (
    ExecutionError,
    GoldExecutionFailed,
    LlmMalformedOutput,
)
from .execution import EmbeddedConnection, ExecutionResult
from .gateway import extract_fenced
from .memory import MemoryStore
from .planner import call_model, render_schema_info
from .sqlkit import canonical_equal, parse
from .synthesizer import Pipeline, PipelineConfig, SessionState, TurnOutcome

DIFFICULTY_DIMENSIONS = (
    "question_comprehension",
    "external_knowledge",
    "data_complexity",
    "sql_complexity",
)


# --- types -----------------------------------------------------------------

@dataclass
class MetricSample:
    question: str
    gold_sql: str
    db_fixture: str  # DDL+INSERT script (or a path the loader resolved)
    domain_id: str = ""
    pred_sql: Optional[str] = None

    def __post_init__(self):
        if not parse(self.gold_sql).ok:
            raise ValueError(f"gold SQL does not parse: {self.gold_sql!r}")


@dataclass
class SampleVerdict:
    index: int
    em: Optional[bool] = None
    ex: Optional[bool] = None
    ha: Optional[bool] = None
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "index": self.index, "em": self.em, "ex": self.ex, "ha": self.ha,
            "flags": list(self.flags),
        }


@dataclass
class MetricReport:
    n: int
    em: Optional[float] = None
    ex: Optional[float] = None
    ha: Optional[float] = None
    per_sample: list = field(default_factory=list)

    def __post_init__(self):
        for value in (self.em, self.ex, self.ha):
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"metric fraction {value} out of [0, 1]")

    @classmethod
    def from_verdicts(cls, verdicts: list[SampleVerdict],
                      metrics: tuple = ("em", "ex")) -> "MetricReport":
        n = len(verdicts)

        def fraction(name):
            if name not in metrics or n == 0:
                return None
            return sum(1 for v in verdicts if getattr(v, name)) / n

        return cls(n=n, em=fraction("em"), ex=fraction("ex"),
                   ha=fraction("ha"), per_sample=list(verdicts))

    def to_dict(self) -> dict:
        return {
            "n": self.n, "em": self.em, "ex": self.ex, "ha": self.ha,
            "per_sample": [v.to_dict() for v in self.per_sample],
        }


@dataclass
class DifficultyRating:
    dims: dict  # dimension name -> score in {1, 2, 3}
    total: int = 0
    label: str = ""

    def __post_init__(self):
        for name in DIFFICULTY_DIMENSIONS:
            score = self.dims.get(name)
            if score not in (1, 2, 3):
                raise ValueError(f"dimension {name!r} score {score!r} not in 1..3")
        self.total = sum(self.dims[name] for name in DIFFICULTY_DIMENSIONS)
        if self.total <= 4:
            self.label = "easy"
        elif self.total <= 6:
            self.label = "medium"
        else:
            self.label = "challenging"


# --- core metrics ----------------------------------------------------------

def em(pred: str, gold: str, dialect: str = "embedded") -> bool:
    """Exact-match via canonical AST equality; unparseable pred is false,
    never an error."""
    if not parse(pred, dialect).ok:
        return False
    return canonical_equal(pred, gold, dialect)


def _has_top_level_order_by(sql: str, dialect: str) -> bool:
    result = parse(sql, dialect)
    return bool(result.ok and result.statement.order_by)


def _results_match(pred_result: ExecutionResult, gold_result: ExecutionResult,
                   ordered: bool) -> bool:
    if len(pred_result.columns) != len(gold_result.columns):
        return False
    if ordered:
        return pred_result.rows == gold_result.rows
    return Counter(pred_result.rows) == Counter(gold_result.rows)


def ex(pred: str, gold: str, connection, dialect: str = "embedded") -> bool:
    """Execution accuracy: row-for-row value equality, ordered only when the
    gold query itself orders."""
    try:
        gold_result = connection.execute(gold)
    except ExecutionError as exc:
        raise GoldExecutionFailed(str(exc)) from exc
    try:
        pred_result = connection.execute(pred)
    except ExecutionError:
        return False
    return _results_match(pred_result, gold_result,
                          ordered=_has_top_level_order_by(gold, dialect))


def ha(pred: str, gold: str, question: str, connection, provider,
       dialect: str = "embedded") -> tuple[bool, list]:
    """Human-aligned judgement of the pred-derived narrative against the
    gold-derived reference. Returns (verdict, flags)."""
    try:
        gold_result = connection.execute(gold)
    except ExecutionError as exc:
        raise GoldExecutionFailed(str(exc)) from exc
    try:
        pred_result = connection.execute(pred)
    except ExecutionError:
        return False, ["pred_execution_failed"]

    reference = resultgen.text_analysis(question, gold_result, provider)
    candidate = resultgen.text_analysis(question, pred_result, provider)

    bindings = {
        "question": question,
        "reference_answer": reference,
        "candidate_answer": candidate,
    }

    def parser(text: str) -> bool:
        word = text.strip().rstrip(".").lower()
        if word == "yes":
            return True
        if word == "no":
            return False
        raise LlmMalformedOutput(f"judge said {text!r}, expected Yes or No")

    try:
        return call_model(provider, "ha_judge", bindings, parser,
                          reminder="Reply with exactly one word: Yes or No."), []
    except LlmMalformedOutput:
        return False, ["judge_malformed"]


def difficulty(question: str, sql: str, provider) -> DifficultyRating:
    def parser(text: str) -> DifficultyRating:
        doc = json.loads(extract_fenced(text, "json"))
        return DifficultyRating({name: doc[name] for name in DIFFICULTY_DIMENSIONS})

    return call_model(provider, "difficulty_rater",
                      {"question": question, "sql": sql}, parser)


# --- dataset + evaluation --------------------------------------------------

def load_dataset(path: str | Path, fixtures_dir: Optional[str | Path] = None
                 ) -> list[MetricSample]:
    """JSONL rows {question, gold_sql, db_fixture, domain_id}; db_fixture is
    inline SQL or a filename under fixtures_dir."""
    samples = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        fixture = row["db_fixture"]
        if fixtures_dir is not None and (Path(fixtures_dir) / fixture).exists():
            fixture = (Path(fixtures_dir) / fixture).read_text(encoding="utf-8")
        samples.append(MetricSample(
            question=row["question"], gold_sql=row["gold_sql"],
            db_fixture=fixture, domain_id=row.get("domain_id", ""),
            pred_sql=row.get("pred_sql"),
        ))
    return samples


def _fixture_connection(sample: MetricSample) -> EmbeddedConnection:
    conn = EmbeddedConnection()
    conn.load_script(sample.db_fixture)
    return conn


def evaluate(samples: list[MetricSample], metrics: tuple = ("em", "ex"),
             provider=None, dialect: str = "embedded") -> MetricReport:
    """Score pred_sql against gold on each sample; per-sample failures are
    flagged, never fatal."""
    verdicts = []
    for idx, sample in enumerate(samples):
        verdict = SampleVerdict(index=idx)
        pred = sample.pred_sql or ""
        if "em" in metrics:
            verdict.em = em(pred, sample.gold_sql, dialect)
        conn = _fixture_connection(sample)
        try:
            if "ex" in metrics:
                try:
                    verdict.ex = ex(pred, sample.gold_sql, conn, dialect)
                except GoldExecutionFailed:
                    verdict.ex = False
                    verdict.flags.append("gold_execution_failed")
            if "ha" in metrics:
                if provider is None:
                    raise ValueError("ha metric needs an LLM provider")
                try:
                    verdict.ha, flags = ha(pred, sample.gold_sql,
                                           sample.question, conn, provider,
                                           dialect)
                    verdict.flags.extend(flags)
                except GoldExecutionFailed:
                    verdict.ha = False
                    verdict.flags.append("gold_execution_failed")
        finally:
            conn.close()
        verdicts.append(verdict)
    return MetricReport.from_verdicts(verdicts, metrics)


# --- pipeline-backed experiments -------------------------------------------

ARMS = ("zero_shot", "ER", "ER_SA", "ER_D2N")


def _predict(sample: MetricSample, catalog: Catalog, memory: MemoryStore,
             provider, config: PipelineConfig) -> Optional[str]:
    conn = _fixture_connection(sample)
    try:
        pipeline = Pipeline(catalog, memory, provider, conn, config)
        outcome = pipeline.run("eval", SessionState(domain_id=sample.domain_id),
                               sample.question)
    finally:
        conn.close()
    if isinstance(outcome, TurnOutcome):
        return outcome.sql
    return None


def run_ablation(samples: list[MetricSample], arms: list[str],
                 catalog: Catalog, stores: dict, provider,
                 config: Optional[PipelineConfig] = None,
                 metrics: tuple = ("em", "ex")) -> dict:
    """One MetricReport per augmentation arm. `stores` maps arm name to the
    MemoryStore embodying that arm's offline build (zero_shot ignores its
    entry and disables in-context examples)."""
    reports = {}
    for arm in arms:
        if arm not in ARMS:
            raise ValueError(f"unknown arm {arm!r}; expected one of {ARMS}")
        arm_config = PipelineConfig(**vars(config or PipelineConfig()))
        if arm == "zero_shot":
            arm_config.examples_enabled = False
            memory = stores.get(arm) or MemoryStore()
        else:
            memory = stores[arm]
        scored = []
        for sample in samples:
            clone = MetricSample(sample.question, sample.gold_sql,
                                 sample.db_fixture, sample.domain_id)
            clone.pred_sql = _predict(clone, catalog, memory, provider,
                                      arm_config)
            scored.append(clone)
        reports[arm] = evaluate(scored, metrics, provider)
    return reports


def ablation_table(reports: dict) -> str:
    """Aligned text table over the machine-readable reports."""
    lines = [f"{'arm':<10} {'n':>4} {'EM':>7} {'EX':>7}"]
    for arm, report in reports.items():
        em_s = "-" if report.em is None else f"{report.em:.3f}"
        ex_s = "-" if report.ex is None else f"{report.ex:.3f}"
        lines.append(f"{arm:<10} {report.n:>4} {em_s:>7} {ex_s:>7}")
    return "\n".join(lines)


def recall_experiment(seed_sqls: list[str], distractor_counts: list[int],
                      provider, catalog: Catalog, domain_id: str,
                      k: int = 3, distractor_texts: Optional[list[str]] = None
                      ) -> dict:
    """SQL2NL the seeds, index the questions, then measure top-k recall of
    each question's own demonstration as distractors are added."""
    table_info = render_schema_info(catalog.domain_schemas(domain_id))
    questions = []  # (question, sql)
    for sql in seed_sqls:
        for pair in sql2nl(sql, table_info, provider, domain_id):
            questions.append((pair.query, pair.sql))

    def build_store(n_distractors: int) -> MemoryStore:
        store = MemoryStore()
        for i, (q, sql) in enumerate(questions):
            store.upsert_text(query=q, sql=sql, tables=set(), fields=set(),
                              domain_id=domain_id, origin="sql2nl")
        for i in range(n_distractors):
            text = (distractor_texts[i] if distractor_texts
                    else f"unrelated distractor question number {i} about "
                         f"topic {i % 17} and metric {i % 13}")
            store.upsert_text(query=text, sql=f"SELECT {i}", tables=set(),
                              fields=set(), domain_id=domain_id, origin="seed")
        return store

    rates = {}
    for count in distractor_counts:
        store = build_store(count)
        hit = 0
        for q, sql in questions:
            top = store.search(q, k=k, domain_id=domain_id)
            if any(h.demonstration.query == q and h.demonstration.sql == sql
                   for h in top):
                hit += 1
        rates[count] = hit / len(questions) if questions else 0.0
    return {"questions": len(questions), "k": k, "recall": rates}


def paired_ablation(samples, catalog, memory, provider, on_config, off_config,
                    metrics=("em", "ex")) -> dict:
    def arm(config):
        scored = []
        for sample in samples:
            clone = MetricSample(sample.question, sample.gold_sql,
                                 sample.db_fixture, sample.domain_id)
            clone.pred_sql = _predict(clone, catalog, memory, provider, config)
            scored.append(clone)
        return evaluate(scored, metrics, provider)

    with_report = arm(on_config)
    without_report = arm(off_config)
    diff = {
        name: (getattr(with_report, name) or 0.0)
        - (getattr(without_report, name) or 0.0)
        for name in metrics
    }
    return {"with": with_report, "without": without_report, "diff": diff}


def slot_ablation(samples, catalog, memory, provider,
                  config: Optional[PipelineConfig] = None) -> dict:
    base = config or PipelineConfig()
    on = PipelineConfig(**vars(base))
    on.slot_extraction_enabled = True
    off = PipelineConfig(**vars(base))
    off.slot_extraction_enabled = False
    return paired_ablation(samples, catalog, memory, provider, on, off)


def reflection_ablation(samples, catalog, memory, provider,
                        config: Optional[PipelineConfig] = None) -> dict:
    base = config or PipelineConfig()
    on = PipelineConfig(**vars(base))
    on.reflection_enabled = True
    off = PipelineConfig(**vars(base))
    off.reflection_enabled = False
    return paired_ablation(samples, catalog, memory, provider, on, off)
