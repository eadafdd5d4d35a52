"""Online front half: intent understanding, multiple recall of candidate
tables, LLM schema linking, and slot-feature hybrid example recall."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .catalog import Catalog, TableSchema
from .errors import LlmMalformedOutput, NoFence
from .gateway import (
    CompletionRequest,
    complete,
    extract_fenced,
    render,
)
from .memory import MemoryStore, RecallHit

CHART_TYPES = ("line", "bar", "pie")

# Schema-text strategies for the similarity recall channel. Direct schema
# text is the default (it recalled best in our experiments); the weaker
# variants exist so the eval harness can compare all four.
SCHEMA_TEXT_STRATEGIES = ("direct", "summary", "keywords", "keyword_values")


@dataclass
class IntentDecision:
    completed_question: str
    relevant: bool
    direct_plot: bool = False
    chart_hint: Optional[str] = None
    bindings: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.chart_hint is not None and self.chart_hint not in CHART_TYPES:
            raise LlmMalformedOutput(f"chart type {self.chart_hint!r} not in {CHART_TYPES}")
        if self.relevant and not self.completed_question.strip():
            raise LlmMalformedOutput("relevant question must have a completed form")


@dataclass
class SchemaLink:
    entries: list[dict]  # {"table": name, "fields": [names]}
    warnings: list[str] = field(default_factory=list)

    def tables(self) -> list[str]:
        return [e["table"] for e in self.entries]

    def pairs(self) -> set[tuple[str, str]]:
        return {(e["table"], f) for e in self.entries for f in e["fields"]}


@dataclass
class RecallBundle:
    examples: list  # ordered Demonstrations
    kernel_included: bool = False
    channels_used: set = field(default_factory=set)

    def __post_init__(self):
        ids = [d.id for d in self.examples]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate demonstration ids in bundle")


def call_model(provider, template_id: str, bindings: dict, parser,
               reminder: str = "Follow the required output format exactly."):
    """Render, complete, parse; one retry with a format reminder on malformed
    output, then LlmMalformedOutput."""
    prompt = render(template_id, bindings)
    response = complete(
        CompletionRequest(prompt=prompt, template_id=template_id, bindings=bindings),
        provider,
    )
    try:
        return parser(response.text)
    except (LlmMalformedOutput, NoFence, json.JSONDecodeError, KeyError, TypeError, ValueError):
        pass
    retry_bindings = dict(bindings, _retry="1")
    retry_prompt = prompt + "\n" + reminder
    response = complete(
        CompletionRequest(prompt=retry_prompt, template_id=template_id,
                          bindings=retry_bindings),
        provider,
    )
    try:
        return parser(response.text)
    except (LlmMalformedOutput, NoFence, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise LlmMalformedOutput(
            f"{template_id} output malformed after retry: {exc}"
        ) from exc


# --- schema text -----------------------------------------------------------

def schema_text(schema: TableSchema, strategy: str = "direct") -> str:
    """Text embedded for the similarity recall channel."""
    if strategy == "direct":
        parts = [schema.table_name, schema.description]
        parts += [f"{f.name}: {f.description}" for f in schema.fields]
        return "\n".join(p for p in parts if p)
    if strategy == "summary":
        return f"{schema.table_name}: {schema.description}"
    if strategy == "keywords":
        return " ".join([schema.table_name] + [f.name for f in schema.fields])
    if strategy == "keyword_values":
        parts = [schema.table_name]
        for f in schema.fields:
            parts.append(f.name)
            if f.enum_values:
                parts.extend(f.enum_values.keys())
        return " ".join(parts)
    raise ValueError(f"unknown schema-text strategy {strategy!r}")


def render_schema_info(schemas: list[TableSchema],
                       enum_fields: Optional[set[tuple[str, str]]] = None) -> str:
    """Prompt-facing schema rendering. Enum value meanings are injected only
    for the requested (table, field) pairs to respect the token budget."""
    blocks = []
    for schema in schemas:
        lines = [f"Table {schema.table_name} ({schema.dialect}): {schema.description}"]
        for f in schema.fields:
            line = f"  - {f.name} {f.data_type}: {f.description}"
            if enum_fields and (schema.table_name, f.name) in enum_fields and f.enum_values:
                pairs = ", ".join(f"{k}={v}" for k, v in f.enum_values.items())
                line += f" [values: {pairs}]"
            if f.nested_keys:
                pairs = ", ".join(f"{k}={v}" for k, v in f.nested_keys.items())
                line += f" [keys: {pairs}]"
            lines.append(line)
        blocks.append("\n".join(lines))
    return "\n".join(blocks)


# --- intent ----------------------------------------------------------------

def decide_intent(history: list[dict], question: str, nearby_examples: list[str],
                  provider, topic: str = "") -> IntentDecision:
    """The four decision components: completion, relevance, direct plotting,
    chart type."""
    if not question.strip():
        raise ValueError("question must be non-empty")
    history_text = "\n".join(
        f"user: {t['question']}\nassistant: {t.get('answer', '')}" for t in history
    ) or "(no prior turns)"
    examples_text = "\n".join(nearby_examples)
    bindings = {
        "topic": topic,
        "history": history_text,
        "question": question,
        "examples": examples_text,
    }

    def parser(text: str) -> IntentDecision:
        doc = json.loads(extract_fenced(text, "json"))
        return IntentDecision(
            completed_question=str(doc["completed_question"]),
            relevant=bool(doc["relevant"]),
            direct_plot=bool(doc.get("direct_plot", False)),
            chart_hint=doc.get("chart_type") or None,
            bindings=dict(doc.get("bindings") or {}),
        )

    return call_model(provider, "intent_decision", bindings, parser)


# --- multiple recall -------------------------------------------------------

def similarity_channel(question: str, schemas: list[TableSchema],
                       memory: MemoryStore,
                       strategy: str = "direct") -> list[tuple[str, float]]:
    """Rank candidate tables by inner product between the question embedding
    and each table's schema-text embedding."""
    if not schemas:
        return []
    vec = memory.embed(question)
    scored = []
    for idx, schema in enumerate(schemas):
        table_vec = memory.embed(schema_text(schema, strategy))
        scored.append((float(np.dot(vec, table_vec)), idx, schema.table_name))
    scored.sort(key=lambda t: (-t[0], t[1]))
    return [(name, score) for score, _, name in scored]


def homologous_channel(question: str, domain_id: str,
                       memory: MemoryStore) -> list[str]:
    hit = memory.homologous_lookup(question, domain_id)
    if hit is None:
        return []
    tables, _ = hit
    return sorted(tables)


def multi_recall(completed_question: str, domain_id: str, catalog: Catalog,
                 memory: MemoryStore, strategy: str = "direct",
                 max_tables: int = 10) -> list[str]:
    """Merge the two autonomous channels; homologous tables (exact past
    traffic) are promoted to the front of the candidate list."""
    schemas = catalog.domain_schemas(domain_id)
    similar = similarity_channel(completed_question, schemas, memory, strategy)
    homologous = homologous_channel(completed_question, domain_id, memory)

    ordered: list[str] = []
    for name in homologous + [name for name, _ in similar]:
        if name not in ordered:
            ordered.append(name)
    return ordered[:max_tables]


# --- schema linking --------------------------------------------------------

def schema_link(completed_question: str, candidate_schemas: list[TableSchema],
                examples: list[str], provider) -> SchemaLink:
    if not candidate_schemas:
        raise ValueError("schema linking needs at least one candidate table")
    by_name = {s.table_name.lower(): s for s in candidate_schemas}
    bindings = {
        "schema_info": render_schema_info(candidate_schemas),
        "examples": "\n".join(examples),
        "query": completed_question,
    }

    def parser(text: str) -> SchemaLink:
        doc = json.loads(extract_fenced(text, "json"))
        if not isinstance(doc, list):
            raise LlmMalformedOutput("schema link output must be a JSON array")
        entries, warnings = [], []
        for item in doc:
            table = item["TABLE"]
            fields = item["FIELD"]
            if not isinstance(fields, list):
                raise LlmMalformedOutput("FIELD must be an array")
            schema = by_name.get(str(table).lower())
            if schema is None:
                warnings.append(f"dropped non-candidate table {table!r}")
                continue
            kept = []
            for f in fields:
                if schema.field(str(f)) is not None:
                    kept.append(str(f))
                else:
                    warnings.append(f"dropped unknown field {table}.{f}")
            entries.append({"table": schema.table_name, "fields": kept})
        return SchemaLink(entries, warnings)

    return call_model(provider, "schema_linking", bindings, parser)


# --- hybrid example recall -------------------------------------------------

def extract_slots(question: str, provider) -> dict:
    def parser(text: str) -> dict:
        doc = json.loads(extract_fenced(text, "json"))
        terms = doc["key_terms"]
        short = doc["shortened_query"]
        if not isinstance(terms, list) or not str(short).strip():
            raise LlmMalformedOutput("bad slot extraction payload")
        return {"key_terms": [str(t) for t in terms], "shortened_query": str(short)}

    return call_model(provider, "slot_extraction", {"query": question}, parser)


def hybrid_recall(completed_question: str, k: int, domain_id: str,
                  memory: MemoryStore, provider) -> RecallBundle:
    """Full-length top-k recall merged with the kernel example retrieved for
    the slot-extracted shortened query; the kernel is always kept, evicting
    the weakest full-length hit when the bundle is full."""
    if k < 1:
        raise ValueError("k must be >= 1")
    full_hits = memory.search(completed_question, k=k, domain_id=domain_id)

    try:
        slots = extract_slots(completed_question, provider)
    except LlmMalformedOutput:
        return RecallBundle(
            examples=[h.demonstration for h in full_hits],
            kernel_included=False,
            channels_used={"similarity"},
        )

    kernel_hits = memory.search(
        slots["shortened_query"], k=1, domain_id=domain_id, channel="slot_kernel"
    )
    if not kernel_hits:
        return RecallBundle(
            examples=[h.demonstration for h in full_hits],
            kernel_included=False,
            channels_used={"similarity"},
        )

    kernel = kernel_hits[0].demonstration
    merged = [h.demonstration for h in full_hits]
    if kernel.id not in {d.id for d in merged}:
        if len(merged) >= k:
            merged = merged[: k - 1]  # evict the lowest-scoring hit
        merged.append(kernel)
    return RecallBundle(
        examples=merged,
        kernel_included=True,
        channels_used={"similarity", "slot_kernel"},
    )
