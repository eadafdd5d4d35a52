import zlib

import numpy as np
import pytest

from queryloom.errors import DimensionMismatch
from queryloom.memory import (
    Demonstration,
    HashedNgramEmbedder,
    MemoryStore,
)


def demo(store, query, sql="SELECT 1", domain="d", origin="seed", **kw):
    return store.upsert_text(
        query=query, sql=sql, tables=set(), fields=set(),
        domain_id=domain, origin=origin, **kw
    )


class TestEmbedder:
    def test_deterministic(self):
        emb = HashedNgramEmbedder()
        a, b = emb.embed("monthly sales"), emb.embed("monthly sales")
        assert np.array_equal(a, b)

    def test_unit_norm(self):
        emb = HashedNgramEmbedder()
        for text in ["a", "monthly sales for Zhou Hui", "closure rate"]:
            assert abs(np.linalg.norm(emb.embed(text)) - 1.0) < 1e-6

    def test_distinct_texts_distinct_vectors(self):
        # oracle: the two trigram bags differ, so at least one bucket count differs
        emb = HashedNgramEmbedder()
        a, b = emb.embed("abc"), emb.embed("abd")
        grams_a = {" ab", "abc", "bc "}
        grams_b = {" ab", "abd", "bd "}
        buckets_a = {zlib.crc32(g.encode()) % 256 for g in grams_a}
        buckets_b = {zlib.crc32(g.encode()) % 256 for g in grams_b}
        assert buckets_a != buckets_b
        assert not np.array_equal(a, b)


class TestUpsert:
    def test_idempotent(self):
        store = MemoryStore()
        demo(store, "q1")
        demo(store, "q1")
        assert len(store) == 1

    def test_same_query_different_sql_inserts(self):
        store = MemoryStore()
        demo(store, "q1", sql="SELECT 1")
        demo(store, "q1", sql="SELECT 2")
        assert len(store) == 2

    def test_dimension_mismatch(self):
        store = MemoryStore()
        bad = Demonstration(
            id="x", query="q", sql="s", tables=set(), fields=set(),
            domain_id="d", origin="seed", embedding=np.ones(8),
        )
        with pytest.raises(DimensionMismatch):
            store.upsert(bad)


class TestSearch:
    def test_self_similarity_rank_one(self):
        store = MemoryStore()
        demo(store, "what are monthly sales")
        demo(store, "count the users")
        hits = store.search("what are monthly sales", k=2)
        assert hits[0].demonstration.query == "what are monthly sales"
        assert abs(hits[0].score - 1.0) < 1e-6

    def test_k_larger_than_store(self):
        store = MemoryStore()
        demo(store, "a question")
        assert len(store.search("a question", k=10)) == 1

    def test_empty_store_returns_empty(self):
        store = MemoryStore()
        assert store.search("anything", k=3) == []

    def test_scores_bounded_and_descending(self):
        store = MemoryStore()
        for i in range(20):
            demo(store, f"question number {i} about topic {i % 3}")
        hits = store.search("question about topic 1", k=20)
        scores = [h.score for h in hits]
        assert all(-1.0 - 1e-9 <= s <= 1.0 + 1e-9 for s in scores)
        assert scores == sorted(scores, reverse=True)

    def test_domain_filter(self):
        store = MemoryStore()
        demo(store, "sales question", domain="sales")
        demo(store, "sales question", domain="hr")
        hits = store.search("sales question", k=5, domain_id="sales")
        assert len(hits) == 1
        assert hits[0].demonstration.domain_id == "sales"

    def test_permutation_invariance_up_to_ties(self):
        queries = [f"distinct question {i} wording" for i in range(10)]
        fwd, rev = MemoryStore(), MemoryStore()
        for q in queries:
            demo(fwd, q)
        for q in reversed(queries):
            demo(rev, q)
        a = [h.demonstration.query for h in fwd.search("distinct question 3 wording", k=4)]
        b = [h.demonstration.query for h in rev.search("distinct question 3 wording", k=4)]
        sa = [round(h.score, 12) for h in fwd.search("distinct question 3 wording", k=4)]
        sb = [round(h.score, 12) for h in rev.search("distinct question 3 wording", k=4)]
        assert sa == sb
        assert a[0] == b[0] == "distinct question 3 wording"


class TestHomologous:
    def test_exact_stored_query(self):
        store = MemoryStore()
        store.upsert_text(
            query="monthly sales of Zhou Hui",
            sql="SELECT month, sales_amount FROM employee",
            tables={"employee"},
            fields={("employee", "month"), ("employee", "sales_amount")},
            domain_id="sales", origin="seed",
        )
        hit = store.homologous_lookup("monthly sales of Zhou Hui", "sales")
        assert hit is not None
        tables, fields = hit
        assert tables == {"employee"}
        assert ("employee", "month") in fields

    def test_empty_store_none(self):
        assert MemoryStore().homologous_lookup("whatever") is None

    def test_paraphrase_above_threshold(self):
        store = MemoryStore()
        store.upsert_text(
            query="monthly sales trend of employee Zhou Hui",
            sql="SELECT 1", tables={"employee"}, fields=set(),
            domain_id="sales", origin="seed",
        )
        paraphrase = "monthly sales trend of employee Zhou Hui please"
        score = float(np.dot(store.embed(paraphrase),
                             store.records()[0].embedding))
        assert score >= store.homologous_threshold  # engineered overlap
        assert store.homologous_lookup(paraphrase, "sales") is not None

    def test_unrelated_below_threshold(self):
        store = MemoryStore()
        store.upsert_text(
            query="monthly sales trend of employee Zhou Hui",
            sql="SELECT 1", tables={"employee"}, fields=set(),
            domain_id="sales", origin="seed",
        )
        assert store.homologous_lookup("weather in beijing today", "sales") is None


class TestPersistence:
    def test_roundtrip_rankings(self, tmp_path):
        store = MemoryStore()
        for i in range(12):
            demo(store, f"question {i} about widgets and gadgets {i}")
        path = tmp_path / "mem.jsonl"
        store.save(path)
        loaded = MemoryStore()
        loaded.load(path)
        q = "question 7 about widgets"
        assert [h.demonstration.id for h in store.search(q, 5)] == \
               [h.demonstration.id for h in loaded.search(q, 5)]

    def test_double_apply_byte_identical(self, tmp_path):
        store = MemoryStore()
        batch = [("q one", "SELECT 1"), ("q two", "SELECT 2")]
        for q, s in batch:
            demo(store, q, sql=s)
        p1 = tmp_path / "a.jsonl"
        store.save(p1)
        for q, s in batch:
            demo(store, q, sql=s)
        p2 = tmp_path / "b.jsonl"
        store.save(p2)
        assert p1.read_bytes() == p2.read_bytes()
