"""Demonstration memory: the vector database bridging the offline build and
the online pipeline.

Embeddings are L2-normalized at ingestion so inner product equals cosine
similarity. Search is exhaustive (flat) - exact and simple at desk scale.
A key-value uniqueness ledger is written before vector insertion so
re-upserting the same (domain, query, sql) replaces instead of duplicating.
"""
from __future__ import annotations

import json
import threading
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, ProviderUnavailable

ORIGINS = ("seed", "sql2nl", "semantic_aug", "d2n", "feedback")

DEFAULT_DIMENSION = 256
DEFAULT_HOMOLOGOUS_THRESHOLD = 0.80


class HashedNgramEmbedder:
    """Deterministic embedding provider: hashed bag of character 3-grams,
    L2-normalized. Order-insensitive at the bag level, lexically meaningful,
    and requires no model."""

    def __init__(self, dimension: int = DEFAULT_DIMENSION, n: int = 3):
        self.dimension = dimension
        self.n = n

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ProviderUnavailable("cannot embed empty text")
        normalized = " ".join(text.lower().split())
        padded = f" {normalized} "
        vec = np.zeros(self.dimension, dtype=np.float64)
        if len(padded) < self.n:
            padded = padded.ljust(self.n)
        for i in range(len(padded) - self.n + 1):
            gram = padded[i : i + self.n]
            bucket = zlib.crc32(gram.encode("utf-8")) % self.dimension
            vec[bucket] += 1.0
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ProviderUnavailable(f"text {text!r} produced a zero embedding")
        return vec / norm


@dataclass
class Demonstration:
    """A <Query, SQL, Tables, Fields> record with embedding and provenance."""

    id: str
    query: str
    sql: str
    tables: frozenset[str]
    fields: frozenset[tuple[str, str]]
    domain_id: str
    origin: str
    embedding: np.ndarray

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise ValueError(f"origin {self.origin!r} not in {ORIGINS}")
        self.tables = frozenset(self.tables)
        self.fields = frozenset(tuple(f) for f in self.fields)
        self.embedding = np.asarray(self.embedding, dtype=np.float64)

    def key(self) -> tuple[str, str, str]:
        return (self.domain_id, self.query, self.sql)

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "query": self.query,
            "sql": self.sql,
            "tables": sorted(self.tables),
            "fields": [list(f) for f in sorted(self.fields)],
            "domain_id": self.domain_id,
            "origin": self.origin,
            "embedding": [repr(x) for x in self.embedding.tolist()],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Demonstration":
        return cls(
            id=rec["id"],
            query=rec["query"],
            sql=rec["sql"],
            tables=frozenset(rec["tables"]),
            fields=frozenset(tuple(f) for f in rec["fields"]),
            domain_id=rec["domain_id"],
            origin=rec["origin"],
            embedding=np.array([float(x) for x in rec["embedding"]]),
        )


@dataclass
class RecallHit:
    demonstration: Demonstration
    score: float
    channel: str  # "similarity" | "homologous" | "slot_kernel"


class MemoryStore:
    """Flat inner-product store over unit-normalized demonstration embeddings."""

    def __init__(self, embedder: Optional[HashedNgramEmbedder] = None,
                 dimension: Optional[int] = None,
                 homologous_threshold: float = DEFAULT_HOMOLOGOUS_THRESHOLD):
        self.embedder = embedder or HashedNgramEmbedder(dimension or DEFAULT_DIMENSION)
        self.dimension = dimension or self.embedder.dimension
        self.homologous_threshold = homologous_threshold
        self._records: list[Demonstration] = []
        self._ledger: dict[tuple[str, str, str], int] = {}  # uniqueness index
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._records)

    def embed(self, text: str) -> np.ndarray:
        return self.embedder.embed(text)

    def upsert(self, demo: Demonstration) -> str:
        if demo.embedding.shape != (self.dimension,):
            raise DimensionMismatch(
                f"expected dimension {self.dimension}, got {demo.embedding.shape}"
            )
        norm = float(np.linalg.norm(demo.embedding))
        if abs(norm - 1.0) > 1e-6:
            demo = replace(demo, embedding=demo.embedding / norm)
        with self._lock:
            # ledger first: the relational key decides replace-vs-insert
            existing = self._ledger.get(demo.key())
            if existing is not None:
                demo = replace(demo, id=self._records[existing].id)
                self._records[existing] = demo
            else:
                self._ledger[demo.key()] = len(self._records)
                self._records.append(demo)
        return demo.id

    def upsert_text(self, *, query: str, sql: str, tables, fields, domain_id: str,
                    origin: str, demo_id: Optional[str] = None) -> Demonstration:
        demo = Demonstration(
            id=demo_id or f"{domain_id}:{len(self._records)}",
            query=query,
            sql=sql,
            tables=frozenset(tables),
            fields=frozenset(fields),
            domain_id=domain_id,
            origin=origin,
            embedding=self.embed(query),
        )
        self.upsert(demo)
        return demo

    def records(self, domain_id: Optional[str] = None) -> list[Demonstration]:
        snapshot = list(self._records)
        if domain_id is None:
            return snapshot
        return [d for d in snapshot if d.domain_id == domain_id]

    def search(self, query_text: str, k: int = 5,
               domain_id: Optional[str] = None,
               channel: str = "similarity") -> list[RecallHit]:
        """Top-k by inner product, descending; exact ties keep insertion order."""
        if k < 1:
            raise ValueError("k must be >= 1")
        pool = self.records(domain_id)
        if not pool:
            return []
        vec = self.embed(query_text)
        scored = [
            (float(np.dot(vec, d.embedding)), idx, d) for idx, d in enumerate(pool)
        ]
        scored.sort(key=lambda t: (-t[0], t[1]))
        return [RecallHit(d, score, channel) for score, _, d in scored[:k]]

    def homologous_lookup(self, query_text: str,
                          domain_id: Optional[str] = None
                          ) -> Optional[tuple[frozenset, frozenset]]:
        """Stored schema-linking data of the nearest demonstration, if close
        enough to count as homologous traffic."""
        hits = self.search(query_text, k=1, domain_id=domain_id, channel="homologous")
        if not hits or hits[0].score < self.homologous_threshold:
            return None
        top = hits[0].demonstration
        return (top.tables, top.fields)

    # -- persistence (JSONL, one record per line) ---------------------------

    def save(self, path: str | Path) -> None:
        with self._lock:
            lines = [
                json.dumps(d.to_record(), ensure_ascii=False, sort_keys=True)
                for d in self._records
            ]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")

    def load(self, path: str | Path) -> None:
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                self.upsert(Demonstration.from_record(json.loads(line)))
