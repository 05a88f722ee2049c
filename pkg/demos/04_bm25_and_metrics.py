# Okapi BM25 over words or wordpieces, TREC run files, and the metric kit.

import math
import tempfile
from pathlib import Path

from vocablens import Vocabulary
from vocablens.datastore import CorpusRecord, QueryRecord
from vocablens.retrieval import (Judgments, answer_hit, bm25_search, bm25_search_all,
                                 build_bm25_index, ndcg_at_10, read_run, run_mrr,
                                 topk_accuracy, write_run)

corpus = [
    CorpusRecord("p1", "", "the great lakes connect to the ocean through the river"),
    CorpusRecord("p2", "", "soul music came from the motown record label"),
    CorpusRecord("p3", "", "reba recorded the duet with linda davis"),
    CorpusRecord("p4", "", "rivers and lakes carry fresh water north"),
]

# --- word-level BM25 ----------------------------------------------------------
index = build_bm25_index(corpus, k1=0.9, b=0.4)
print("query 'ocean river' over words:")
for pid, score in bm25_search(index, "ocean river", 3):
    print(f"  {pid}  {score:.4f}")

# the one-document worked example: score reduces to ln(4/3)
tiny = build_bm25_index([CorpusRecord("d", "", "a b")], k1=0.9, b=0.4)
print(f"\nsingle-doc sanity value: {bm25_search(tiny, 'a', 1)[0][1]:.5f} "
      f"(ln 4/3 = {math.log(4 / 3):.5f})")

# --- wordpiece-level BM25 ------------------------------------------------------
# "reba" segments into pieces, so a wordpiece index matches it even when the
# surface word never occurs as one unit.
vocab = Vocabulary(["[UNK]", "re", "##ba", "reba", "duet", "record", "soul",
                    "music", "lakes", "ocean", "river", "water"])
wp = build_bm25_index(corpus, mode="wordpiece", vocab=vocab)
print("\nquery 'Reba' over wordpieces:")
for pid, score in bm25_search(wp, "Reba", 2):
    print(f"  {pid}  {score:.4f}")

# --- run files and metrics ------------------------------------------------------
queries = [
    QueryRecord("q1", "where do lakes meet the ocean", ["river"], ["p1"]),
    QueryRecord("q2", "what label defined soul", ["motown"], ["p2"]),
]
run = bm25_search_all(index, queries, k=4)
with tempfile.TemporaryDirectory() as tmp:
    run_path = Path(tmp) / "run.trec"
    write_run(run, run_path)
    print(f"\nTREC run file, first line: {run_path.read_text().splitlines()[0]}")
    run = read_run(run_path)

judgments = Judgments.from_queries(queries)
acc = topk_accuracy(run, judgments, [1, 2, 4])
print(f"\ngold-id accuracy ({acc.mode} mode): " +
      ", ".join(f"top-{k}={v:.2f}" for k, v in acc.fractions.items()))
print(f"MRR: {run_mrr(run, judgments):.3f}")
ndcg = ndcg_at_10(run, judgments)
print(f"nDCG@10: {ndcg.value:.3f} over {ndcg.n_evaluated} queries")

# answer-containment matching is boundary-aware and case/whitespace-tolerant
print(f"\nanswer_hit('...concatenate...', 'cat') = "
      f"{answer_hit('let us concatenate strings', ['cat'])}")
print(f"answer_hit('the cat sat', 'cat') = {answer_hit('the cat sat', ['cat'])}")
