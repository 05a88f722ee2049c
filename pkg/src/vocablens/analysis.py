"""Interpretability analyses over (query, gold passage) pairs.

Every analysis works on PairContext objects: the content token sets of the
two texts plus the vocabulary projections of their embeddings. Ranks are
always raw 1-based positions in the full projection; content filtering
(specials, stop words, punctuation pieces) applies to the token sets and to
which projected tokens are tallied, never to the rank positions themselves.
All results are pooled over pairs and permutation-invariant in pair order.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .datastore import CorpusRecord, EmbeddingStore, QueryRecord
from .errors import ValidationError
from .lexical import Vocabulary, content_token_set
from .mlmhead import MlmHeadParams, VocabProjection, project_store, rank_of, top_k
from .retrieval import RunList

AMNESIA_BUCKETS = (("1-5", 1, 5), ("6-20", 6, 20), ("21-100", 21, 100))
ABSENT_BUCKET = ">100"


@dataclass
class PairContext:
    query_id: str
    passage_id: str
    query_tokens: frozenset[int]
    passage_tokens: frozenset[int]
    q_proj: VocabProjection
    p_proj: VocabProjection

    @property
    def shared_tokens(self) -> frozenset[int]:
        return self.query_tokens & self.passage_tokens


def build_pair_contexts(queries: Sequence[QueryRecord], corpus: Sequence[CorpusRecord],
                        query_store: EmbeddingStore, passage_store: EmbeddingStore,
                        head: MlmHeadParams, vocab: Vocabulary,
                        stop_ids: frozenset[int]) -> list[PairContext]:
    """One pair per (query, gold passage) with gold embeddings and projections."""
    corpus_by_id = {r.id: r for r in corpus}
    missing = []
    for q in queries:
        if q.id not in query_store.ids:
            missing.append(f"query {q.id}")
        for pid in q.gold_pids:
            if pid not in corpus_by_id:
                missing.append(f"passage {pid} (gold of {q.id}, not in corpus)")
            elif pid not in passage_store.ids:
                missing.append(f"passage {pid} (gold of {q.id}, no embedding)")
    if missing:
        shown = ", ".join(missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise ValidationError(f"inconsistent ids across inputs: {shown}{more}")

    q_projs = {p.source_id: p for p in project_store(head, query_store)}
    p_projs = {p.source_id: p for p in project_store(head, passage_store)}
    pairs = []
    for q in queries:
        t_q = content_token_set(vocab, stop_ids, q.text)
        for pid in q.gold_pids:
            rec = corpus_by_id[pid]
            text = f"{rec.title} {rec.text}" if rec.title else rec.text
            pairs.append(PairContext(
                q.id, pid, t_q, content_token_set(vocab, stop_ids, text),
                q_projs[q.id], p_projs[pid],
            ))
    return pairs


def _proj_of(pair: PairContext, target: str) -> VocabProjection:
    if target == "Q":
        return pair.q_proj
    if target == "P":
        return pair.p_proj
    raise ValidationError(f"projection target must be 'Q' or 'P', got {target!r}")


def _content_top_k(pair: PairContext, k: int, vocab: Vocabulary,
                   stop_ids: frozenset[int], target: str) -> list[int]:
    """Content tokens among the raw top-k of the chosen projection."""
    return [
        t for t, _ in top_k(_proj_of(pair, target), k)
        if t not in vocab.special_ids and t not in stop_ids and not vocab.is_punct_piece(t)
    ]


# ---------------------------------------------------------------------------
# Top-k categorization

@dataclass
class CategoryReport:
    target: str
    k: int
    fractions: dict[str, float]     # in_both / q_only / p_only / neither
    n_tokens: int


def category_breakdown(pairs: Sequence[PairContext], k: int, vocab: Vocabulary,
                       stop_ids: frozenset[int], target: str = "Q") -> CategoryReport:
    """Where do the top-k projected content tokens come from, pooled over pairs?"""
    if not pairs:
        raise ValidationError("category breakdown needs at least one pair")
    if k < 1:
        raise ValidationError("k must be at least 1")
    counts = {"in_both": 0, "q_only": 0, "p_only": 0, "neither": 0}
    for pair in pairs:
        for t in _content_top_k(pair, k, vocab, stop_ids, target):
            in_q, in_p = t in pair.query_tokens, t in pair.passage_tokens
            if in_q and in_p:
                counts["in_both"] += 1
            elif in_q:
                counts["q_only"] += 1
            elif in_p:
                counts["p_only"] += 1
            else:
                counts["neither"] += 1
    total = sum(counts.values())
    fractions = {name: (c / total if total else 0.0) for name, c in counts.items()}
    return CategoryReport(target, k, fractions, total)


# ---------------------------------------------------------------------------
# Shared-token coverage

@dataclass
class CoverageReport:
    k_grid: list[int]
    coverage_q: list[float]
    coverage_p: list[float]
    n_shared_tokens: int     # pooled (pair, token) count; 0 flags an empty report
    n_pairs: int
    per_pair_mean: bool = False


def shared_token_coverage(pairs: Sequence[PairContext], k_grid: Sequence[int],
                          per_pair_mean: bool = False) -> CoverageReport:
    """Fraction of shared tokens ranked within the top k of Q and of P.

    Pooled over all pairs by default; per_pair_mean averages each pair's own
    coverage fraction instead (pairs without shared tokens are skipped).
    """
    if not pairs:
        raise ValidationError("coverage needs at least one pair")
    k_grid = list(k_grid)
    if any(k < 1 for k in k_grid) or sorted(k_grid) != k_grid:
        raise ValidationError("k grid must be ascending positive integers")
    rank_pairs = []   # (ranks_in_q, ranks_in_p) per pair with shared tokens
    for pair in pairs:
        shared = sorted(pair.shared_tokens)
        if not shared:
            continue
        rank_pairs.append((
            np.array([rank_of(pair.q_proj, t) for t in shared]),
            np.array([rank_of(pair.p_proj, t) for t in shared]),
        ))
    n_shared = sum(len(rq) for rq, _ in rank_pairs)
    if n_shared == 0:
        return CoverageReport(k_grid, [0.0] * len(k_grid), [0.0] * len(k_grid),
                              0, len(pairs), per_pair_mean)
    cov_q, cov_p = [], []
    for k in k_grid:
        if per_pair_mean:
            cov_q.append(float(np.mean([(rq <= k).mean() for rq, _ in rank_pairs])))
            cov_p.append(float(np.mean([(rp <= k).mean() for _, rp in rank_pairs])))
        else:
            cov_q.append(sum(int((rq <= k).sum()) for rq, _ in rank_pairs) / n_shared)
            cov_p.append(sum(int((rp <= k).sum()) for _, rp in rank_pairs) / n_shared)
    return CoverageReport(k_grid, cov_q, cov_p, n_shared, len(pairs), per_pair_mean)


# ---------------------------------------------------------------------------
# Token-level MRR

SELECTORS = ("passage", "query", "shared", "query_only")


def _selector_set(pair: PairContext, selector: str) -> frozenset[int]:
    if selector == "passage":
        return pair.passage_tokens
    if selector == "query":
        return pair.query_tokens
    if selector == "shared":
        return pair.shared_tokens
    if selector == "query_only":
        return pair.query_tokens - pair.passage_tokens
    raise ValidationError(f"selector must be one of {SELECTORS}, got {selector!r}")


def token_level_mrr(pairs: Sequence[PairContext], selector: str,
                    target: str = "P") -> tuple[float | None, int]:
    """Mean over pairs of (1/|T|) sum over T of 1/rank_target(t).

    Pairs whose selector set is empty are excluded from the average; returns
    (None, 0) when no pair is eligible.
    """
    values = []
    for pair in pairs:
        tokens = _selector_set(pair, selector)
        if not tokens:
            continue
        proj = _proj_of(pair, target)
        values.append(sum(1.0 / rank_of(proj, t) for t in sorted(tokens)) / len(tokens))
    if not values:
        return None, 0
    return sum(values) / len(values), len(values)


# ---------------------------------------------------------------------------
# Query expansion

@dataclass
class ExpansionReport:
    k_grid: list[int]
    pct_pairs_with_expansion: list[float]   # >= 1 expansion token in top-k of Q
    expansion_token_fraction: list[float]   # expansion tokens / content tokens in top-k
    n_pairs: int


def query_expansion_stats(pairs: Sequence[PairContext], k_grid: Sequence[int],
                          vocab: Vocabulary, stop_ids: frozenset[int]) -> ExpansionReport:
    """Expansion token: in the top-k of Q, in the gold passage, not in the query."""
    if not pairs:
        raise ValidationError("expansion stats need at least one pair")
    k_grid = list(k_grid)
    pct, frac = [], []
    for k in k_grid:
        n_with, n_exp, n_content = 0, 0, 0
        for pair in pairs:
            tokens = _content_top_k(pair, k, vocab, stop_ids, "Q")
            exp = [t for t in tokens
                   if t in pair.passage_tokens and t not in pair.query_tokens]
            n_content += len(tokens)
            n_exp += len(exp)
            n_with += bool(exp)
        pct.append(n_with / len(pairs))
        frac.append(n_exp / n_content if n_content else 0.0)
    return ExpansionReport(k_grid, pct, frac, len(pairs))


# ---------------------------------------------------------------------------
# Token amnesia

@dataclass
class AmnesiaRecord:
    query_id: str
    passage_id: str
    dense_rank: int | None    # None: absent from the dense run
    bucket: str
    max_rank_p: int
    max_rank_q: int
    median_rank_p: float
    median_rank_q: float


@dataclass
class AmnesiaProfile:
    records: list[AmnesiaRecord]
    bucket_summary: dict[str, dict[str, float]] = field(default_factory=dict)
    n_skipped_no_shared: int = 0


def dense_rank_bucket(rank: int | None) -> str:
    if rank is None:
        return ABSENT_BUCKET
    for name, lo, hi in AMNESIA_BUCKETS:
        if lo <= rank <= hi:
            return name
    return ABSENT_BUCKET


def amnesia_profile(pairs: Sequence[PairContext], dense_run: RunList,
                    bm25_run: RunList, bm25_cutoff: int = 5) -> AmnesiaProfile:
    """Shared-token rank extremes vs the gold passage's dense-retrieval rank.

    Only queries where BM25 retrieved a gold passage within its top
    ``bm25_cutoff`` qualify; the highest-BM25-ranked such passage is used.
    """
    by_query: dict[str, dict[str, PairContext]] = {}
    for pair in pairs:
        by_query.setdefault(pair.query_id, {})[pair.passage_id] = pair
    records = []
    skipped = 0
    for qid in sorted(by_query):
        golds = by_query[qid]
        chosen = None
        for pid, _ in bm25_run.by_query.get(qid, [])[:bm25_cutoff]:
            if pid in golds:
                chosen = golds[pid]
                break
        if chosen is None:
            continue
        shared = sorted(chosen.shared_tokens)
        if not shared:
            skipped += 1
            continue
        ranks_p = [rank_of(chosen.p_proj, t) for t in shared]
        ranks_q = [rank_of(chosen.q_proj, t) for t in shared]
        rank = dense_run.rank_of(qid, chosen.passage_id)
        records.append(AmnesiaRecord(
            qid, chosen.passage_id, rank, dense_rank_bucket(rank),
            max(ranks_p), max(ranks_q),
            float(np.median(ranks_p)), float(np.median(ranks_q)),
        ))
    summary = {}
    names = [name for name, _, _ in AMNESIA_BUCKETS] + [ABSENT_BUCKET]
    for name in names:
        maxima_p = [r.max_rank_p for r in records if r.bucket == name]
        maxima_q = [r.max_rank_q for r in records if r.bucket == name]
        if not maxima_p:
            continue
        q1_p, med_p, q3_p = np.percentile(maxima_p, [25, 50, 75])
        q1_q, med_q, q3_q = np.percentile(maxima_q, [25, 50, 75])
        summary[name] = {
            "n": len(maxima_p),
            "median_max_rank_p": float(med_p), "q1_max_rank_p": float(q1_p),
            "q3_max_rank_p": float(q3_p),
            "median_max_rank_q": float(med_q), "q1_max_rank_q": float(q1_q),
            "q3_max_rank_q": float(q3_q),
        }
    return AmnesiaProfile(records, summary, skipped)


# ---------------------------------------------------------------------------
# CSV report writers (fixed headers, one row per k or per bucket)

def write_coverage_csv(report: CoverageReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["k", "coverage_q", "coverage_p", "n_shared_tokens"])
        for i, k in enumerate(report.k_grid):
            w.writerow([k, repr(report.coverage_q[i]), repr(report.coverage_p[i]),
                        report.n_shared_tokens])


def write_mrr_csv(rows: list[tuple[str, str, float | None, int]], path) -> None:
    """Rows: (selector, target, value, n_pairs)."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["selector", "target", "mrr", "n_pairs"])
        for selector, target, value, n in rows:
            w.writerow([selector, target, "" if value is None else repr(value), n])


def write_expansion_csv(report: ExpansionReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["k", "pct_pairs_with_expansion", "expansion_token_fraction", "n_pairs"])
        for i, k in enumerate(report.k_grid):
            w.writerow([k, repr(report.pct_pairs_with_expansion[i]),
                        repr(report.expansion_token_fraction[i]), report.n_pairs])


def write_categories_csv(reports: list[CategoryReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["target", "k", "in_both", "q_only", "p_only", "neither", "n_tokens"])
        for r in reports:
            w.writerow([r.target, r.k, repr(r.fractions["in_both"]),
                        repr(r.fractions["q_only"]), repr(r.fractions["p_only"]),
                        repr(r.fractions["neither"]), r.n_tokens])


def write_amnesia_csv(profile: AmnesiaProfile, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["bucket", "n", "median_max_rank_p", "q1_max_rank_p", "q3_max_rank_p",
                    "median_max_rank_q", "q1_max_rank_q", "q3_max_rank_q"])
        for bucket, stats in profile.bucket_summary.items():
            w.writerow([bucket, stats["n"],
                        repr(stats["median_max_rank_p"]), repr(stats["q1_max_rank_p"]),
                        repr(stats["q3_max_rank_p"]), repr(stats["median_max_rank_q"]),
                        repr(stats["q1_max_rank_q"]), repr(stats["q3_max_rank_q"])])


def write_amnesia_pairs_csv(profile: AmnesiaProfile, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["query_id", "passage_id", "dense_rank", "bucket",
                    "max_rank_p", "max_rank_q", "median_rank_p", "median_rank_q"])
        for r in profile.records:
            w.writerow([r.query_id, r.passage_id,
                        "" if r.dense_rank is None else r.dense_rank, r.bucket,
                        r.max_rank_p, r.max_rank_q,
                        repr(r.median_rank_p), repr(r.median_rank_q)])
