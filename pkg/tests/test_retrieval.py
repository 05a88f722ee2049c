import math

import numpy as np
import pytest

from vocablens.datastore import CorpusRecord, EmbeddingStore, QueryRecord
from vocablens.errors import ValidationError
from vocablens.retrieval import (Bm25Index, DenseIndex, Judgments, RunList, answer_hit,
                                 bm25_search, bm25_search_all, build_bm25_index,
                                 dense_search, load_bm25_index, ndcg_at_10, read_qrels,
                                 read_run, run_mrr, save_bm25_index, topk_accuracy,
                                 write_qrels, write_run)


# ---------------------------------------------------------------------------
# Dense search

def brute_force_dense(store, query, k, similarity):
    p = store.vectors
    q = query
    if similarity == "cosine":
        p = p / np.where(np.linalg.norm(p, axis=1, keepdims=True) == 0, 1,
                         np.linalg.norm(p, axis=1, keepdims=True))
        q = q / (np.linalg.norm(q) or 1.0)
    scores = p @ q
    ranked = sorted(zip(store.ids, scores.tolist()), key=lambda e: (-e[1], e[0]))
    return [pid for pid, _ in ranked[:k]]


def test_self_match_ranks_first():
    rng = np.random.default_rng(0)
    vecs = rng.standard_normal((20, 8)).astype(np.float32)
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    store = EmbeddingStore([f"p{i}" for i in range(20)], vecs, "dot")
    queries = EmbeddingStore(["q"], vecs[7:8], "dot")
    run = dense_search(DenseIndex(store), queries, k=5)
    assert run.by_query["q"][0][0] == "p7"


def test_full_ranking_is_permutation():
    rng = np.random.default_rng(1)
    store = EmbeddingStore([f"p{i}" for i in range(15)],
                           rng.standard_normal((15, 4)).astype(np.float32))
    queries = EmbeddingStore(["q"], rng.standard_normal((1, 4)).astype(np.float32))
    run = dense_search(DenseIndex(store), queries, k=50)
    assert sorted(p for p, _ in run.by_query["q"]) == sorted(store.ids)


@pytest.mark.parametrize("similarity", ["dot", "cosine"])
def test_matches_brute_force(similarity):
    rng = np.random.default_rng(2)
    store = EmbeddingStore([f"p{i:03d}" for i in range(50)],
                           rng.standard_normal((50, 8)).astype(np.float32), similarity)
    queries = EmbeddingStore([f"q{i}" for i in range(5)],
                             rng.standard_normal((5, 8)).astype(np.float32), similarity)
    run = dense_search(DenseIndex(store), queries, k=50)
    for i, qid in enumerate(queries.ids):
        expected = brute_force_dense(store, queries.vectors[i], 50, similarity)
        assert [p for p, _ in run.by_query[qid]] == expected


def test_cosine_scale_invariance():
    rng = np.random.default_rng(3)
    vecs = rng.standard_normal((30, 6)).astype(np.float32)
    q = EmbeddingStore(["q"], rng.standard_normal((1, 6)).astype(np.float32), "cosine")
    a = dense_search(DenseIndex(EmbeddingStore([f"p{i}" for i in range(30)], vecs, "cosine")), q, 30)
    b = dense_search(DenseIndex(EmbeddingStore([f"p{i}" for i in range(30)], 7.5 * vecs, "cosine")), q, 30)
    assert [p for p, _ in a.by_query["q"]] == [p for p, _ in b.by_query["q"]]


def test_dot_scaling_preserves_order():
    rng = np.random.default_rng(4)
    vecs = rng.standard_normal((30, 6)).astype(np.float32)
    q = EmbeddingStore(["q"], rng.standard_normal((1, 6)).astype(np.float32), "dot")
    a = dense_search(DenseIndex(EmbeddingStore([f"p{i}" for i in range(30)], vecs, "dot")), q, 30)
    b = dense_search(DenseIndex(EmbeddingStore([f"p{i}" for i in range(30)], 2.0 * vecs, "dot")), q, 30)
    assert [p for p, _ in a.by_query["q"]] == [p for p, _ in b.by_query["q"]]
    for (_, sa), (_, sb) in zip(a.by_query["q"], b.by_query["q"]):
        assert sb == pytest.approx(2.0 * sa, rel=1e-5)


def test_similarity_tag_mismatch():
    store = EmbeddingStore(["p"], np.ones((1, 2), dtype=np.float32), "dot")
    q = EmbeddingStore(["q"], np.ones((1, 2), dtype=np.float32), "cosine")
    with pytest.raises(ValidationError, match="similarity"):
        dense_search(DenseIndex(store), q, 1)


def test_threads_do_not_change_results():
    rng = np.random.default_rng(5)
    store = EmbeddingStore([f"p{i}" for i in range(40)],
                           rng.standard_normal((40, 5)).astype(np.float32))
    qs = EmbeddingStore([f"q{i}" for i in range(8)],
                        rng.standard_normal((8, 5)).astype(np.float32))
    assert dense_search(DenseIndex(store), qs, 10, threads=1) == \
        dense_search(DenseIndex(store), qs, 10, threads=4)


# ---------------------------------------------------------------------------
# BM25

def test_bm25_single_doc_hand_value():
    # one doc "a b", query "a": idf = ln(1 + 0.5/1.5), tf=1, len=avglen
    # score = ln(4/3) * (1 * 1.9) / (1 + 0.9) = ln(4/3)
    index = build_bm25_index([CorpusRecord("d", "", "a b")], k1=0.9, b=0.4)
    results = bm25_search(index, "a", k=1)
    assert results[0][0] == "d"
    assert results[0][1] == pytest.approx(math.log(4 / 3), abs=1e-9)


def test_bm25_absent_term_contributes_zero():
    index = build_bm25_index([CorpusRecord("d", "", "a b")])
    assert bm25_search(index, "a zz", 1)[0][1] == pytest.approx(
        bm25_search(index, "a", 1)[0][1], abs=1e-12)
    assert bm25_search(index, "zz", 5) == []


def test_bm25_empty_query():
    index = build_bm25_index([CorpusRecord("d", "", "a b")])
    assert bm25_search(index, "", 5) == []
    assert bm25_search(index, "...", 5) == []


def test_bm25_tf_monotonicity():
    # same length docs, increasing tf of the query term
    corpus = [
        CorpusRecord("d1", "", "t f0 f0 f0"),
        CorpusRecord("d2", "", "t t f1 f1"),
        CorpusRecord("d3", "", "t t t f2"),
    ]
    index = build_bm25_index(corpus)
    by_id = dict(bm25_search(index, "t", 3))
    assert by_id["d1"] < by_id["d2"] < by_id["d3"]


def test_bm25_overlap_monotonicity():
    corpus = [
        CorpusRecord("d1", "", "t u x x"),
        CorpusRecord("d2", "", "t u v x"),
    ]
    index = build_bm25_index(corpus)
    by_id = dict(bm25_search(index, "t u v", 2))
    assert by_id["d2"] > by_id["d1"]


def test_bm25_random_monotonicity():
    rng = np.random.default_rng(6)
    for trial in range(100):
        n_docs = int(rng.integers(3, 8))
        doc_len = int(rng.integers(3, 7))
        tfs = sorted(rng.choice(np.arange(1, doc_len + 1), size=n_docs, replace=True))
        corpus = [
            CorpusRecord(f"d{i}", "", " ".join(["t"] * tf + [f"f{i}"] * (doc_len - tf)))
            for i, tf in enumerate(tfs)
        ]
        index = build_bm25_index(corpus)
        scores = dict(bm25_search(index, "t", n_docs))
        for i in range(n_docs - 1):
            if tfs[i + 1] > tfs[i]:
                assert scores[f"d{i + 1}"] > scores[f"d{i}"]
            else:
                assert scores[f"d{i + 1}"] == pytest.approx(scores[f"d{i}"], abs=1e-12)


def test_bm25_wordpiece_mode(toy_vocab):
    corpus = [
        CorpusRecord("match", "", "Reba sings"),
        CorpusRecord("other", "", "deep water"),
    ]
    index = build_bm25_index(corpus, mode="wordpiece", vocab=toy_vocab)
    results = bm25_search(index, "Reba", 2)
    assert results and results[0][0] == "match"
    assert all(pid != "other" for pid, _ in results)


def test_bm25_title_indexed():
    index = build_bm25_index([CorpusRecord("d", "Unique Title", "body words")])
    assert bm25_search(index, "unique", 1)[0][0] == "d"


def test_bm25_index_round_trip(tmp_path):
    corpus = [CorpusRecord("d1", "", "a b c"), CorpusRecord("d2", "", "b c d")]
    index = build_bm25_index(corpus, k1=1.2, b=0.75)
    save_bm25_index(index, tmp_path / "idx.json")
    back = load_bm25_index(tmp_path / "idx.json")
    assert back.k1 == 1.2 and back.mode == "word"
    assert bm25_search(back, "b d", 2) == bm25_search(index, "b d", 2)


def test_bm25_search_all_threads():
    corpus = [CorpusRecord(f"d{i}", "", f"w{i} common") for i in range(10)]
    index = build_bm25_index(corpus)
    queries = [QueryRecord(f"q{i}", f"w{i} common", [], []) for i in range(6)]
    assert bm25_search_all(index, queries, 5, threads=1) == \
        bm25_search_all(index, queries, 5, threads=3)


# ---------------------------------------------------------------------------
# Run lists and TREC I/O

def test_run_list_invariants():
    with pytest.raises(ValidationError, match="duplicate"):
        RunList({"q": [("p1", 2.0), ("p1", 1.0)]})
    with pytest.raises(ValidationError, match="non-increasing"):
        RunList({"q": [("p1", 1.0), ("p2", 2.0)]})


def test_run_round_trip(tmp_path):
    run = RunList({"q2": [("pB", 2.5), ("pA", 1.25)], "q1": [("pC", 0.5)]})
    write_run(run, tmp_path / "run.trec")
    back = read_run(tmp_path / "run.trec")
    assert back == run
    first = (tmp_path / "run.trec").read_text().splitlines()[0].split()
    assert first[0] == "q1" and first[1] == "Q0" and first[3] == "1"


def test_qrels_round_trip(tmp_path):
    judg = Judgments(graded={"q1": {"p1": 1, "p2": 0}, "q2": {"p3": 2}})
    write_qrels(judg, tmp_path / "qrels.txt")
    back = read_qrels(tmp_path / "qrels.txt")
    assert back.graded == judg.graded
    assert back.gold_set("q1") == {"p1"}


# ---------------------------------------------------------------------------
# Metrics

def make_run_with_gold_ranks(ranks):
    """ranks: qid -> gold rank (None = absent). 100 filler passages."""
    run, graded = {}, {}
    for qid, rank in ranks.items():
        entries = []
        for i in range(100):
            entries.append((f"{qid}filler{i:03d}", float(100 - i)))
        if rank is not None:
            entries[rank - 1] = (f"{qid}gold", float(100 - (rank - 1)))
        run[qid] = entries
        graded[qid] = {f"{qid}gold": 1}
    return RunList(run), Judgments(graded=graded)


def test_topk_accuracy_all_rank_one():
    run, judg = make_run_with_gold_ranks({"a": 1, "b": 1})
    acc = topk_accuracy(run, judg, [1, 5, 20])
    assert all(v == 1.0 for v in acc.fractions.values())


def test_topk_accuracy_rank_six():
    run, judg = make_run_with_gold_ranks({"a": 6})
    acc = topk_accuracy(run, judg, [5, 20])
    assert acc.fractions[5] == 0.0 and acc.fractions[20] == 1.0


def test_topk_accuracy_mixed_fixture():
    run, judg = make_run_with_gold_ranks({"a": 1, "b": 3, "c": 25, "d": None})
    acc = topk_accuracy(run, judg, [5, 20, 100])
    assert acc.fractions[5] == 0.5
    assert acc.fractions[20] == 0.5
    assert acc.fractions[100] == 0.75


def test_topk_accuracy_unjudged_query():
    run, judg = make_run_with_gold_ranks({"a": 1})
    run.by_query["zz"] = [("p", 1.0)]
    with pytest.raises(ValidationError, match="zz"):
        topk_accuracy(run, judg, [5])


def test_topk_accuracy_answer_mode():
    run = RunList({"q": [("p1", 2.0), ("p2", 1.0)]})
    judg = Judgments(answers={"q": ["the saint lawrence river"]})
    texts = {"p1": "nothing here", "p2": "It flows to the Saint Lawrence River."}
    acc = topk_accuracy(run, judg, [1, 2], corpus_texts=texts)
    assert acc.mode == "answer"
    assert acc.fractions[1] == 0.0 and acc.fractions[2] == 1.0


def test_ndcg_hand_values():
    judg = Judgments(graded={"q": {"gold": 1}})
    run = RunList({"q": [("gold", 2.0), ("x", 1.0)]})
    assert ndcg_at_10(run, judg).value == pytest.approx(1.0)
    run = RunList({"q": [("x", 2.0), ("gold", 1.0)]})
    assert ndcg_at_10(run, judg).value == pytest.approx(1 / math.log2(3), abs=1e-12)
    entries = [(f"x{i}", float(20 - i)) for i in range(10)] + [("gold", 1.0)]
    run = RunList({"q": entries})
    assert ndcg_at_10(run, judg).value == 0.0


def test_ndcg_range_and_ideal_iff():
    # 1.0 exactly when the top-min(10, #rel) positions are ideally ordered
    judg = Judgments(graded={"q": {"g1": 2, "g2": 1}})
    ideal = RunList({"q": [("g1", 3.0), ("g2", 2.0), ("x", 1.0)]})
    assert ndcg_at_10(ideal, judg).value == pytest.approx(1.0)
    swapped = RunList({"q": [("g2", 3.0), ("g1", 2.0), ("x", 1.0)]})
    value = ndcg_at_10(swapped, judg).value
    assert 0.0 <= value < 1.0


def test_ndcg_excludes_unrelevant_queries():
    judg = Judgments(graded={"q1": {"gold": 1}, "q2": {"p": 0, "pp": 1}})
    run = RunList({"q1": [("gold", 1.0)], "q2": [("x", 1.0)]})
    res = ndcg_at_10(run, judg)
    assert res.n_evaluated == 2 and res.n_excluded == 0
    judg2 = Judgments(graded={"q1": {"gold": 1}, "q2": {"p": 0}})
    with pytest.raises(ValidationError):
        Judgments(graded={"q2": {}})
    res2 = ndcg_at_10(RunList({"q1": [("gold", 1.0)], "q2": [("x", 1.0)]}), judg2)
    assert res2.n_evaluated == 1 and res2.n_excluded == 1


def test_run_mrr():
    run, judg = make_run_with_gold_ranks({"a": 1, "b": 4})
    assert run_mrr(run, judg) == pytest.approx((1.0 + 0.25) / 2)


# ---------------------------------------------------------------------------
# Answer containment

def test_answer_hit_paper_example():
    passage = "... which connect to the atlantic ocean through the saint lawrence river ."
    assert answer_hit(passage, ["the saint lawrence river"])


def test_answer_hit_empty_answer():
    assert not answer_hit("anything at all", [""])
    assert not answer_hit("anything at all", [])


def test_answer_hit_token_boundary():
    assert not answer_hit("concatenate strings", ["cat"])
    assert answer_hit("the cat sat", ["cat"])
    assert answer_hit("a cat, basically", ["cat"])


def test_answer_hit_whitespace_and_case():
    assert answer_hit("The   Saint\nLawrence  RIVER flows", ["the saint lawrence river"])
