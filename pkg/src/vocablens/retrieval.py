"""Exact dense search, Okapi BM25 over words or wordpieces, retrieval metrics.

Searches are exact (full scoring, no approximation). Ranking ties break by
ascending passage id everywhere, and per-query score accumulation is
sequential, so results are reproducible bit for bit.
"""
from __future__ import annotations

import json
import math
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .datastore import CorpusRecord, EmbeddingStore, QueryRecord
from .errors import ValidationError
from .lexical import Vocabulary, basic_words, is_punct_token, tokenize


@dataclass
class RunList:
    """Ranked retrieval output: query id -> [(passage id, score)] descending."""

    by_query: dict[str, list[tuple[str, float]]] = field(default_factory=dict)

    def __post_init__(self):
        for qid, entries in self.by_query.items():
            pids = [p for p, _ in entries]
            if len(set(pids)) != len(pids):
                raise ValidationError(f"query {qid!r}: duplicate passage ids in run")
            scores = [s for _, s in entries]
            if any(scores[i] < scores[i + 1] for i in range(len(scores) - 1)):
                raise ValidationError(f"query {qid!r}: scores must be non-increasing")

    def rank_of(self, qid: str, pid: str) -> int | None:
        """1-based rank of pid for qid, or None if absent."""
        for rank, (p, _) in enumerate(self.by_query.get(qid, []), start=1):
            if p == pid:
                return rank
        return None

    def __eq__(self, other) -> bool:
        if not isinstance(other, RunList):
            return NotImplemented
        return self.by_query == other.by_query


def write_run(run: RunList, path, tag: str = "vocablens") -> None:
    """TREC run format: qid Q0 pid rank score tag."""
    with open(path, "w", encoding="utf-8") as f:
        for qid in sorted(run.by_query):
            for rank, (pid, score) in enumerate(run.by_query[qid], start=1):
                f.write(f"{qid} Q0 {pid} {rank} {float(score)!r} {tag}\n")


def read_run(path) -> RunList:
    rows: dict[str, list[tuple[int, str, float]]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise ValidationError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
            qid, _, pid, rank, score, _ = parts
            rows.setdefault(qid, []).append((int(rank), pid, float(score)))
    by_query = {}
    for qid, entries in rows.items():
        entries.sort(key=lambda e: e[0])
        by_query[qid] = [(pid, score) for _, pid, score in entries]
    return RunList(by_query)


@dataclass
class Judgments:
    """Gold passage ids and/or answer strings per query; graded rels for nDCG."""

    graded: dict[str, dict[str, int]] = field(default_factory=dict)
    answers: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        for qid in set(self.graded) | set(self.answers):
            if not self.graded.get(qid) and not self.answers.get(qid):
                raise ValidationError(f"query {qid!r}: judgments must be non-empty")

    @property
    def query_ids(self) -> set[str]:
        return set(self.graded) | set(self.answers)

    def gold_set(self, qid: str) -> set[str]:
        return {pid for pid, rel in self.graded.get(qid, {}).items() if rel > 0}

    @classmethod
    def from_queries(cls, queries: list[QueryRecord]) -> "Judgments":
        graded = {q.id: {pid: 1 for pid in q.gold_pids} for q in queries if q.gold_pids}
        answers = {q.id: list(q.answers) for q in queries if q.answers}
        return cls(graded, answers)


def read_qrels(path) -> Judgments:
    """TREC qrels format: qid 0 pid rel."""
    graded: dict[str, dict[str, int]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ValidationError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            qid, _, pid, rel = parts
            graded.setdefault(qid, {})[pid] = int(rel)
    return Judgments(graded=graded)


def write_qrels(judgments: Judgments, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for qid in sorted(judgments.graded):
            for pid in sorted(judgments.graded[qid]):
                f.write(f"{qid} 0 {pid} {judgments.graded[qid][pid]}\n")


# ---------------------------------------------------------------------------
# Dense search

@dataclass
class DenseIndex:
    store: EmbeddingStore

    @property
    def similarity(self) -> str:
        return self.store.similarity


def _l2_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=-1, keepdims=True)
    return m / np.where(norms == 0, 1.0, norms)


def dense_search(index: DenseIndex, queries: EmbeddingStore, k: int, threads: int = 1) -> RunList:
    """Exact top-k by dot product (or cosine), ties by ascending passage id."""
    if index.store.vectors.shape[0] == 0:
        raise ValidationError("dense index is empty")
    if queries.dim != index.store.dim:
        raise ValidationError(
            f"query dim {queries.dim} does not match index dim {index.store.dim}"
        )
    if queries.similarity != index.similarity:
        raise ValidationError(
            f"query store similarity {queries.similarity!r} != index similarity {index.similarity!r}"
        )
    if k < 1:
        raise ValidationError("k must be at least 1")
    passages = index.store.vectors
    qvecs = queries.vectors
    if index.similarity == "cosine":
        passages = _l2_rows(passages)
        qvecs = _l2_rows(qvecs)
    pid_arr = np.array(index.store.ids)
    id_order = np.arange(len(pid_arr))

    def one(qi: int) -> list[tuple[str, float]]:
        scores = passages @ qvecs[qi]
        order = np.lexsort((id_order, -scores))[:k]
        return [(str(pid_arr[j]), float(scores[j])) for j in order]

    n = qvecs.shape[0]
    if threads > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(n)))
    else:
        results = [one(i) for i in range(n)]
    return RunList({queries.ids[i]: results[i] for i in range(n)})


# ---------------------------------------------------------------------------
# BM25

def _bm25_terms(text: str, mode: str, vocab: Vocabulary | None) -> list[str]:
    """Index/query terms: words or wordpieces, pure-punctuation tokens dropped."""
    if mode == "word":
        return [w for w in basic_words(text) if not is_punct_token(w)]
    assert vocab is not None
    return [vocab.token_of(t) for t in tokenize(vocab, text) if not vocab.is_punct_piece(t)]


@dataclass
class Bm25Index:
    """Okapi BM25 inverted index. Query occurrences each contribute a term score."""

    mode: str
    k1: float
    b: float
    doc_ids: list[str]
    doc_lens: list[int]
    postings: dict[str, list[tuple[int, int]]]   # term -> [(doc index, tf)], doc order
    vocab: Vocabulary | None = None

    def __post_init__(self):
        if self.mode not in ("word", "wordpiece"):
            raise ValidationError(f"tokenization mode must be word or wordpiece, got {self.mode!r}")
        self.n_docs = len(self.doc_ids)
        total = sum(self.doc_lens)
        self.avgdl = total / self.n_docs if self.n_docs else 0.0
        if self.n_docs and self.avgdl <= 0:
            raise ValidationError("average document length must be positive")

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))


def build_bm25_index(corpus: list[CorpusRecord], mode: str = "word",
                     vocab: Vocabulary | None = None,
                     k1: float = 0.9, b: float = 0.4) -> Bm25Index:
    if mode == "wordpiece" and vocab is None:
        raise ValidationError("wordpiece mode requires a vocabulary")
    if not corpus:
        raise ValidationError("cannot index an empty corpus")
    doc_ids, doc_lens = [], []
    postings: dict[str, list[tuple[int, int]]] = {}
    for i, rec in enumerate(corpus):
        text = f"{rec.title} {rec.text}" if rec.title else rec.text
        terms = _bm25_terms(text, mode, vocab)
        doc_ids.append(rec.id)
        doc_lens.append(len(terms))
        for term, tf in sorted(Counter(terms).items()):
            postings.setdefault(term, []).append((i, tf))
    return Bm25Index(mode, k1, b, doc_ids, doc_lens, postings, vocab)


def bm25_scores(index: Bm25Index, query_text: str) -> dict[int, float]:
    """Accumulated scores for documents matching at least one query term."""
    scores: dict[int, float] = {}
    for term in _bm25_terms(query_text, index.mode, index.vocab):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for doc, tf in plist:
            norm = tf + index.k1 * (1.0 - index.b + index.b * index.doc_lens[doc] / index.avgdl)
            scores[doc] = scores.get(doc, 0.0) + idf * tf * (index.k1 + 1.0) / norm
    return scores


def bm25_search(index: Bm25Index, query_text: str, k: int) -> list[tuple[str, float]]:
    if k < 1:
        raise ValidationError("k must be at least 1")
    scores = bm25_scores(index, query_text)
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], index.doc_ids[kv[0]]))
    return [(index.doc_ids[doc], score) for doc, score in ranked[:k]]


def bm25_search_all(index: Bm25Index, queries: list[QueryRecord], k: int,
                    threads: int = 1) -> RunList:
    def one(q: QueryRecord) -> list[tuple[str, float]]:
        return bm25_search(index, q.text, k)

    if threads > 1 and len(queries) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, queries))
    else:
        results = [one(q) for q in queries]
    return RunList({q.id: results[i] for i, q in enumerate(queries)})


def save_bm25_index(index: Bm25Index, path) -> None:
    obj = {
        "mode": index.mode,
        "k1": index.k1,
        "b": index.b,
        "doc_ids": index.doc_ids,
        "doc_lens": index.doc_lens,
        "postings": {t: [[d, tf] for d, tf in pl] for t, pl in index.postings.items()},
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, sort_keys=True)
        f.write("\n")


def load_bm25_index(path, vocab: Vocabulary | None = None) -> Bm25Index:
    with open(path, encoding="utf-8") as f:
        obj = json.load(f)
    if obj.get("mode") == "wordpiece" and vocab is None:
        raise ValidationError(f"{path}: wordpiece index requires a vocabulary to search")
    return Bm25Index(
        obj["mode"], obj["k1"], obj["b"], obj["doc_ids"], obj["doc_lens"],
        {t: [(int(d), int(tf)) for d, tf in pl] for t, pl in obj["postings"].items()},
        vocab,
    )


# ---------------------------------------------------------------------------
# Metrics

def answer_hit(passage_text: str, answers: list[str]) -> bool:
    """Case-insensitive, whitespace-normalized, token-boundary substring match."""
    hay = re.sub(r"\s+", " ", passage_text).strip().lower()
    for ans in answers:
        needle = re.sub(r"\s+", " ", ans).strip().lower()
        if not needle:
            continue
        if re.search(rf"(?<!\w){re.escape(needle)}(?!\w)", hay):
            return True
    return False


@dataclass
class AccuracyResult:
    fractions: dict[int, float]
    mode: str            # "gold" or "answer"
    n_queries: int


def topk_accuracy(run: RunList, judgments: Judgments, k_grid: list[int],
                  corpus_texts: dict[str, str] | None = None,
                  mode: str = "auto") -> AccuracyResult:
    """Fraction of queries with >= 1 hit in the top k, for each k in the grid.

    A hit is a gold passage id, or (in answer mode) a passage containing one
    of the query's answer strings. Mode "auto" uses gold when every judged
    run query has gold ids, else answers.
    """
    qids = sorted(run.by_query)
    unjudged = [q for q in qids if q not in judgments.query_ids]
    if unjudged:
        raise ValidationError(f"unjudged run queries: {', '.join(unjudged)}")
    if mode == "auto":
        mode = "gold" if all(judgments.gold_set(q) for q in qids) else "answer"
    if mode not in ("gold", "answer"):
        raise ValidationError(f"unknown accuracy mode {mode!r}")
    if mode == "answer":
        missing = [q for q in qids if not judgments.answers.get(q)]
        if missing:
            raise ValidationError(f"answer mode but no answers for: {', '.join(missing)}")
        if corpus_texts is None:
            raise ValidationError("answer mode requires corpus texts")

    def hit_rank(qid: str) -> int | None:
        if mode == "gold":
            gold = judgments.gold_set(qid)
            for rank, (pid, _) in enumerate(run.by_query[qid], start=1):
                if pid in gold:
                    return rank
        else:
            ans = judgments.answers[qid]
            for rank, (pid, _) in enumerate(run.by_query[qid], start=1):
                if pid not in corpus_texts:
                    raise ValidationError(f"run passage {pid!r} missing from corpus texts")
                if answer_hit(corpus_texts[pid], ans):
                    return rank
        return None

    hit_ranks = [hit_rank(q) for q in qids]
    fractions = {}
    for k in k_grid:
        if k < 1:
            raise ValidationError("accuracy cutoffs must be >= 1")
        hits = sum(1 for r in hit_ranks if r is not None and r <= k)
        fractions[k] = hits / len(qids) if qids else 0.0
    return AccuracyResult(fractions, mode, len(qids))


@dataclass
class NdcgResult:
    value: float
    n_evaluated: int
    n_excluded: int    # judged queries with no relevant documents


def ndcg_at_10(run: RunList, judgments: Judgments, cutoff: int = 10) -> NdcgResult:
    """Mean nDCG@cutoff with gain = rel, discount 1/log2(rank + 1)."""
    total, n_eval, n_excl = 0.0, 0, 0
    for qid in sorted(run.by_query):
        rels = judgments.graded.get(qid, {})
        positive = sorted((r for r in rels.values() if r > 0), reverse=True)
        if not positive:
            n_excl += 1
            continue
        dcg = 0.0
        for rank, (pid, _) in enumerate(run.by_query[qid][:cutoff], start=1):
            rel = rels.get(pid, 0)
            if rel > 0:
                dcg += rel / math.log2(rank + 1)
        ideal = sum(r / math.log2(i + 2) for i, r in enumerate(positive[:cutoff]))
        total += dcg / ideal
        n_eval += 1
    return NdcgResult(total / n_eval if n_eval else 0.0, n_eval, n_excl)


def run_mrr(run: RunList, judgments: Judgments, cutoff: int | None = None) -> float:
    """Mean reciprocal rank of the first gold passage (0 when absent)."""
    qids = sorted(run.by_query)
    if not qids:
        return 0.0
    total = 0.0
    for qid in qids:
        gold = judgments.gold_set(qid)
        entries = run.by_query[qid] if cutoff is None else run.by_query[qid][:cutoff]
        for rank, (pid, _) in enumerate(entries, start=1):
            if pid in gold:
                total += 1.0 / rank
                break
    return total / len(qids)
