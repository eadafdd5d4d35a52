"""Offline data construction: seed ingestion, SQL2NL question generation,
semantic-preserving augmentation, domain-to-NL&SQL generation with human
vetting, and the build orchestrator that populates the memory store."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional

from .catalog import Catalog
from .errors import LlmMalformedOutput, NoFence, NotParsed
from .gateway import UNSCRIPTED, CompletionRequest, complete, extract_fenced
from .memory import MemoryStore
from .planner import call_model, render_schema_info
from .sqlkit import extract_lineage, parse


@dataclass
class SeedPair:
    query: str
    sql: str
    domain_id: str
    vetted: bool = True  # d2n output starts unvetted


@dataclass
class BuildReport:
    domain_id: str
    counts: dict = field(default_factory=dict)  # origin -> accepted count
    rejects: list = field(default_factory=list)  # {query, sql, reason}
    attempted: int = 0

    @property
    def accepted(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> dict:
        return {
            "domain_id": self.domain_id,
            "attempted": self.attempted,
            "accepted": self.accepted,
            "counts": dict(sorted(self.counts.items())),
            "rejects": list(self.rejects),
        }


# --- sql2nl ----------------------------------------------------------------

_LIST_ITEM_RE = re.compile(r"^\s*(?:\d+[.):]|[-*•])\s*(.+?)\s*$")


def _parse_question_list(text: str) -> list[str]:
    """Accept a numbered or bulleted list; fall back to bare non-empty lines."""
    items = []
    for line in text.splitlines():
        match = _LIST_ITEM_RE.match(line)
        if match:
            items.append(match.group(1))
    if not items:
        items = [ln.strip() for ln in text.splitlines() if ln.strip()]
    return items


def sql2nl(sql: str, table_info: str, provider, domain_id: str = "") -> list[SeedPair]:
    """Generate exactly 3 user questions for an existing SQL statement."""
    result = parse(sql)
    if not result.ok:
        raise NotParsed(f"sql2nl input does not parse: {sql!r}")

    def parser(text: str) -> list[str]:
        questions = _parse_question_list(text)
        if len(questions) != 3 or not all(q for q in questions):
            raise LlmMalformedOutput(
                f"expected exactly 3 questions, got {len(questions)}"
            )
        return questions

    questions = call_model(
        provider, "sql2nl", {"table_info": table_info, "sql": sql}, parser,
        reminder="Return exactly 3 questions as a numbered list.",
    )
    return [SeedPair(query=q, sql=sql, domain_id=domain_id) for q in questions]


# --- semantic augmentation -------------------------------------------------

def _squash(text: str) -> str:
    return " ".join(text.split())


def semantic_augment(query: str, provider) -> str:
    """Semantically equivalent but syntactically varied restatement; must
    differ from the input after whitespace normalization."""
    if not query.strip():
        raise ValueError("query must be non-empty")
    prompt = (
        "Rewrite the following user question so that it is semantically "
        "equivalent but syntactically varied. Return only the rewritten "
        f"question.\n[question]: {query}\nRewritten question:"
    )

    def attempt(bindings: dict) -> str:
        response = complete(
            CompletionRequest(prompt=prompt, template_id="semantic_augment",
                              bindings=bindings),
            provider,
        )
        text = response.text.strip()
        return "" if text == UNSCRIPTED else text

    rewritten = attempt({"query": query})
    if _squash(rewritten) != _squash(query) and rewritten:
        return rewritten
    rewritten = attempt({"query": query, "_retry": "1"})
    if _squash(rewritten) != _squash(query) and rewritten:
        return rewritten
    raise LlmMalformedOutput(
        "semantic augmentation did not produce a distinct restatement"
    )


# --- domain -> NL & SQL ----------------------------------------------------

def domain_to_nlsql(catalog: Catalog, domain_id: str, provider,
                    count: int = 5) -> list[SeedPair]:
    """LLM-generated candidate pairs straight from the schemas. Output is
    always unvetted; indexing refuses unvetted d2n pairs until a human
    review marks them vetted."""
    table_info = render_schema_info(catalog.domain_schemas(domain_id))
    prompt = (
        f"Given the following tables, generate {count} useful analytical "
        "user questions together with the SQL statement answering each. "
        "Return a ```json``` array of objects with keys \"query\" and "
        f"\"sql\".\n[table info]: {table_info}\n```json"
    )

    def attempt(bindings: dict) -> list[SeedPair]:
        response = complete(
            CompletionRequest(prompt=prompt, template_id="domain_to_nlsql",
                              bindings=bindings),
            provider,
        )
        doc = json.loads(extract_fenced(response.text, "json"))
        if not isinstance(doc, list) or not doc:
            raise LlmMalformedOutput("d2n output must be a non-empty JSON array")
        return [
            SeedPair(query=str(item["query"]), sql=str(item["sql"]),
                     domain_id=domain_id, vetted=False)
            for item in doc
        ]

    bindings = {"domain_id": domain_id, "table_info": table_info}
    malformed = (LlmMalformedOutput, NoFence, json.JSONDecodeError, KeyError,
                 TypeError)
    try:
        return attempt(bindings)
    except malformed:
        pass
    try:
        return attempt(dict(bindings, _retry="1"))
    except malformed as exc:
        raise LlmMalformedOutput(f"d2n output malformed after retry: {exc}") from exc


# --- offline build ---------------------------------------------------------

@dataclass
class BuildOptions:
    semantic_aug: bool = False
    origin: str = "seed"  # origin recorded for the direct input pairs


def index_pair(pair: SeedPair, origin: str, memory: MemoryStore,
               catalog: Catalog, dialect: str = "embedded") -> None:
    """Extract lineage, embed, upsert. Raises on unparseable SQL or
    unvetted d2n input."""
    if origin == "d2n" and not pair.vetted:
        raise ValueError("unvetted d2n pair cannot be indexed")
    lineage = extract_lineage(pair.sql, dialect, catalog)
    memory.upsert_text(
        query=pair.query,
        sql=pair.sql,
        tables=lineage.tables,
        fields=lineage.fields,
        domain_id=pair.domain_id,
        origin=origin,
    )


def build_offline(domain_id: str, seeds: list[SeedPair], memory: MemoryStore,
                  catalog: Catalog, provider=None,
                  options: Optional[BuildOptions] = None) -> BuildReport:
    """Populate the memory store from seed pairs; per-record failures are
    recorded as rejects and never abort the batch. Idempotent: the memory
    upsert keyed on (domain, query, sql) makes reruns byte-identical."""
    options = options or BuildOptions()
    schemas = catalog.domain_schemas(domain_id)  # raises UnknownDomain
    dialect = schemas[0].dialect if schemas else "embedded"
    report = BuildReport(domain_id=domain_id)

    def reject(pair: SeedPair, reason: str) -> None:
        report.rejects.append(
            {"query": pair.query, "sql": pair.sql, "reason": reason}
        )

    def accept(pair: SeedPair, origin: str) -> bool:
        report.attempted += 1
        try:
            index_pair(pair, origin, memory, catalog, dialect)
        except Exception as exc:
            reject(pair, f"{type(exc).__name__}: {exc}")
            return False
        report.counts[origin] = report.counts.get(origin, 0) + 1
        return True

    for pair in seeds:
        if pair.domain_id != domain_id:
            report.attempted += 1
            reject(pair, f"pair belongs to domain {pair.domain_id!r}")
            continue
        if not accept(pair, options.origin):
            continue
        if options.semantic_aug:
            if provider is None:
                raise ValueError("semantic augmentation needs a provider")
            aug = SeedPair(query=pair.query, sql=pair.sql, domain_id=domain_id)
            try:
                aug.query = semantic_augment(pair.query, provider)
            except LlmMalformedOutput as exc:
                report.attempted += 1
                reject(aug, f"LlmMalformedOutput: {exc}")
                continue
            accept(aug, "semantic_aug")
    return report
