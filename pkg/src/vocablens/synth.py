"""Seeded synthetic fixtures: heads, stores, and a token-amnesia world.

The amnesia world is a desk-scale corpus with a linear bag-of-tokens
encoder whose content-word directions are exactly orthogonal, so every
retrieval score is an exact overlap ratio. Passage encoding drops one
designated rare token's direction; queries keep it. Each "affected"
query/gold pair built around the dropped token has an "unaffected twin"
built identically around a second rare token, which makes the damage
directly comparable pair by pair.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datastore import CorpusRecord, EmbeddingStore, QueryRecord
from .lexical import Vocabulary, content_token_set
from .mlmhead import MlmHeadParams

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]


def make_synthetic_head(vocab_size: int, dim: int, seed: int,
                        activation: str = "gelu") -> MlmHeadParams:
    """Random, well-conditioned head parameters.

    The transform is orthogonal, the layernorm gain is boosted, and decoder
    rows share a common norm: equal-norm rows make every token an extreme
    point of the decoder geometry, so each one is reachable by optimization.
    """
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    v = rng.standard_normal((vocab_size, dim))
    v *= 2.0 / np.linalg.norm(v, axis=1, keepdims=True)
    return MlmHeadParams(
        w=q,
        b=0.05 * rng.standard_normal(dim),
        gamma=2.5 + 0.25 * rng.standard_normal(dim),
        beta=0.05 * rng.standard_normal(dim),
        eps=1e-12,
        activation=activation,
        v=v,
        b_out=0.1 * rng.standard_normal(vocab_size),
    )


def make_random_store(n: int, dim: int, seed: int, similarity: str = "dot",
                      prefix: str = "p") -> EmbeddingStore:
    rng = np.random.default_rng(seed)
    ids = [f"{prefix}{i:04d}" for i in range(n)]
    return EmbeddingStore(ids, rng.standard_normal((n, dim)).astype(np.float32), similarity)


@dataclass
class LinearEncoder:
    """Mean of per-token direction vectors over the content tokens of a text."""

    directions: np.ndarray              # (|V|, d)
    vocab: Vocabulary
    stop_ids: frozenset[int]
    drop_ids: frozenset[int] = frozenset()

    def encode(self, text: str) -> np.ndarray:
        tokens = sorted(content_token_set(self.vocab, self.stop_ids, text))
        if not tokens:
            return np.zeros(self.directions.shape[1])
        rows = [np.zeros(self.directions.shape[1]) if t in self.drop_ids
                else self.directions[t] for t in tokens]
        return np.mean(rows, axis=0)

    def encode_all(self, ids_texts: list[tuple[str, str]],
                   similarity: str = "dot") -> EmbeddingStore:
        ids = [i for i, _ in ids_texts]
        vecs = np.stack([self.encode(t) for _, t in ids_texts])
        return EmbeddingStore(ids, vecs.astype(np.float32), similarity)


@dataclass
class AmnesiaWorld:
    vocab: Vocabulary
    stop_ids: frozenset[int]
    head: MlmHeadParams
    corpus: list[CorpusRecord]
    queries: list[QueryRecord]
    query_store: EmbeddingStore
    passage_store: EmbeddingStore          # amnesiac: dropped-token direction zeroed
    clean_passage_store: EmbeddingStore    # same encoder without the drop
    dropped_token: str
    twin_token: str
    affected_qids: list[str] = field(default_factory=list)
    twin_qids: list[str] = field(default_factory=list)

    @property
    def corpus_texts(self) -> dict[str, str]:
        return {r.id: r.text for r in self.corpus}

    @property
    def query_texts(self) -> dict[str, str]:
        return {q.id: q.text for q in self.queries}


def make_amnesia_world(seed: int = 7, n_groups: int = 10, distractors_per: int = 5,
                       n_background: int = 80, dim: int = 96) -> AmnesiaWorld:
    """200-passage world: per group one gold passage, five stronger-overlap
    distractors, shared background chatter. Exact scores at lambda = 0:
    affected gold 2/3, every distractor 1, twin gold 4/3 -> affected golds
    rank exactly 6, twin golds rank 1.
    """
    dropped, twin = "quixote", "zephyr"
    anchors = [f"anchor{i:02d}" for i in range(2 * n_groups)]
    boosts = [f"boost{i:02d}" for i in range(2 * n_groups)]
    extras = [f"extra{i:02d}" for i in range(2 * n_groups)]
    fillers = [f"filler{j}" for j in range(distractors_per * 2)]
    topics = [f"topic{j:02d}" for j in range(20)]
    content = [dropped, twin] + anchors + boosts + extras + fillers + topics
    stop_words = ["the", "of", "a"]
    tokens = SPECIALS + stop_words + [".", ","] + content
    vocab = Vocabulary(tokens)
    if len(content) > dim:
        raise ValueError("content vocabulary must fit an orthogonal basis")
    stop_ids = frozenset(vocab.token_to_id[w] for w in stop_words)

    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    directions = np.zeros((len(vocab), dim))
    for row, word in enumerate(content):
        directions[vocab.token_to_id[word]] = 2.0 * basis[row]
    for t in range(len(vocab)):
        if not directions[t].any():
            vec = rng.standard_normal(dim)
            directions[t] = 2.0 * vec / np.linalg.norm(vec)

    head = MlmHeadParams(
        w=np.eye(dim), b=np.zeros(dim), gamma=np.ones(dim), beta=np.zeros(dim),
        eps=1e-12, activation="identity", v=directions, b_out=np.zeros(len(vocab)),
    )

    corpus: list[CorpusRecord] = []
    queries: list[QueryRecord] = []
    affected_qids, twin_qids = [], []
    for i in range(2 * n_groups):
        rare = dropped if i < n_groups else twin
        qid, gold_pid = f"q{i:03d}", f"pg{i:03d}"
        queries.append(QueryRecord(qid, f"{rare} {anchors[i]}",
                                   answers=[], gold_pids=[gold_pid]))
        (affected_qids if i < n_groups else twin_qids).append(qid)
        corpus.append(CorpusRecord(gold_pid, "",
                                   f"{rare} {anchors[i]} {extras[i]}"))
        for j in range(distractors_per):
            corpus.append(CorpusRecord(f"pd{i:03d}x{j}", "",
                                       f"{anchors[i]} {fillers[j]}"))
    chatter = topics + boosts
    for j in range(n_background):
        words = list(rng.choice(chatter, size=int(rng.integers(4, 8)), replace=True))
        if j % 3 == 0:
            words.insert(0, "the")
        corpus.append(CorpusRecord(f"pb{j:03d}", "", " ".join(words)))

    clean = LinearEncoder(directions, vocab, stop_ids)
    amnesiac = LinearEncoder(directions, vocab, stop_ids,
                             frozenset({vocab.token_to_id[dropped]}))
    query_store = clean.encode_all([(q.id, q.text) for q in queries], "dot")
    query_store = EmbeddingStore(query_store.ids, query_store.vectors, "dot")
    passage_store = amnesiac.encode_all([(r.id, r.text) for r in corpus], "dot")
    clean_store = clean.encode_all([(r.id, r.text) for r in corpus], "dot")
    return AmnesiaWorld(vocab, stop_ids, head, corpus, queries, query_store,
                        passage_store, clean_store, dropped, twin,
                        affected_qids, twin_qids)
