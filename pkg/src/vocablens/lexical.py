"""Vocabulary handling, wordpiece tokenization, stop/punctuation filtering, IDF.

Tokenization is deterministic: lowercase, split on whitespace with every
punctuation character (Unicode categories P* and S*) and every CJK character
becoming its own word, then greedy longest-prefix wordpiece segmentation with
"##" continuations. Words longer than 100 characters or with no matching
pieces map to the unknown token.
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .datastore import TensorBundle, read_bundle, write_bundle
from .errors import ValidationError

MAX_WORD_CHARS = 100
UNK_TOKEN = "[UNK]"


def _is_punct_char(ch: str) -> bool:
    return unicodedata.category(ch)[0] in ("P", "S")


def is_punct_token(s: str) -> bool:
    """True when every character is punctuation/symbol (categories P*, S*)."""
    return bool(s) and all(_is_punct_char(c) for c in s)


def _is_cjk_char(ch: str) -> bool:
    cp = ord(ch)
    return (
        0x4E00 <= cp <= 0x9FFF
        or 0x3400 <= cp <= 0x4DBF
        or 0xF900 <= cp <= 0xFAFF
        or 0x20000 <= cp <= 0x2A6DF
    )


@dataclass
class Vocabulary:
    """Bijection between token ids and surface strings, with special ids marked."""

    tokens: list[str]
    token_to_id: dict[str, int] = field(init=False)
    special_ids: frozenset[int] = field(init=False)
    unk_id: int = field(init=False)

    def __post_init__(self):
        self.token_to_id = {}
        for i, tok in enumerate(self.tokens):
            if tok in self.token_to_id:
                raise ValidationError(f"duplicate vocabulary token {tok!r} at ids "
                                      f"{self.token_to_id[tok]} and {i}")
            self.token_to_id[tok] = i
        # bracketed entries ([PAD], [CLS], [unused7], ...) are the special set
        self.special_ids = frozenset(
            i for i, tok in enumerate(self.tokens)
            if tok.startswith("[") and tok.endswith("]")
        )
        if UNK_TOKEN not in self.token_to_id:
            raise ValidationError(f"vocabulary must contain {UNK_TOKEN}")
        self.unk_id = self.token_to_id[UNK_TOKEN]

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        if token not in self.token_to_id:
            raise ValidationError(f"token {token!r} not in vocabulary")
        return self.token_to_id[token]

    def token_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.tokens):
            raise ValidationError(f"token id {token_id} out of range [0, {len(self.tokens)})")
        return self.tokens[token_id]

    def is_punct_piece(self, token_id: int) -> bool:
        s = self.tokens[token_id]
        if s.startswith("##"):
            s = s[2:]
        return is_punct_token(s)


def load_vocab(path) -> Vocabulary:
    """One token per line; line number is the token id."""
    with open(path, encoding="utf-8") as f:
        tokens = [line.rstrip("\n") for line in f]
    while tokens and tokens[-1] == "":
        tokens.pop()
    if not tokens:
        raise ValidationError(f"{path}: empty vocabulary file")
    return Vocabulary(tokens)


def write_vocab(vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for tok in vocab.tokens:
            f.write(tok + "\n")


def basic_words(text: str) -> list[str]:
    """Lowercased words: whitespace-separated, punctuation/CJK chars split out."""
    words = []
    current = []
    for ch in text.lower():
        if ch.isspace():
            if current:
                words.append("".join(current))
                current = []
        elif _is_punct_char(ch) or _is_cjk_char(ch):
            if current:
                words.append("".join(current))
                current = []
            words.append(ch)
        else:
            current.append(ch)
    if current:
        words.append("".join(current))
    return words


def _wordpiece(vocab: Vocabulary, word: str) -> list[int]:
    if len(word) > MAX_WORD_CHARS:
        return [vocab.unk_id]
    pieces = []
    start = 0
    while start < len(word):
        end = len(word)
        piece_id = None
        while start < end:
            piece = word[start:end]
            if start > 0:
                piece = "##" + piece
            if piece in vocab.token_to_id:
                piece_id = vocab.token_to_id[piece]
                break
            end -= 1
        if piece_id is None:
            return [vocab.unk_id]
        pieces.append(piece_id)
        start = end
    return pieces


def tokenize(vocab: Vocabulary, text: str) -> list[int]:
    """Total, deterministic text -> token id sequence."""
    ids = []
    for word in basic_words(text):
        ids.extend(_wordpiece(vocab, word))
    return ids


def default_stoplist_path() -> str:
    return str(resources.files("vocablens.data") / "stopwords_en.txt")


def load_stoplist(vocab: Vocabulary, path) -> frozenset[int]:
    """Stop-token ids: stoplist words that exist verbatim in the vocabulary."""
    with open(path, encoding="utf-8") as f:
        words = [line.strip() for line in f if line.strip()]
    return frozenset(vocab.token_to_id[w] for w in words if w in vocab.token_to_id)


def content_token_set(vocab: Vocabulary, stop_ids: frozenset[int], text: str) -> frozenset[int]:
    """Deduplicated token ids minus specials, stop words and punctuation pieces."""
    return frozenset(
        t for t in tokenize(vocab, text)
        if t not in vocab.special_ids
        and t not in stop_ids
        and not vocab.is_punct_piece(t)
    )


# ---------------------------------------------------------------------------
# IDF

@dataclass
class IdfTable:
    """Smoothed inverse document frequencies over the full vocabulary.

    idf[t] = ln(1 + (N - df[t] + 0.5) / (df[t] + 0.5)); strictly positive,
    decreasing in df, maximal for unseen tokens (df = 0).
    """

    idf: np.ndarray
    df: np.ndarray
    n_docs: int

    def __post_init__(self):
        self.idf = np.asarray(self.idf, dtype=np.float64)
        self.df = np.asarray(self.df, dtype=np.float64)
        if self.n_docs < 1:
            raise ValidationError("IdfTable requires at least one document")
        if self.idf.shape != self.df.shape:
            raise ValidationError("idf and df must have matching shapes")
        if not np.isfinite(self.idf).all() or (self.idf < 0).any():
            raise ValidationError("idf weights must be finite and non-negative")
        if (self.df > self.n_docs).any():
            raise ValidationError("df cannot exceed the document count")

    def weight(self, token_id: int) -> float:
        return float(self.idf[token_id])


def smoothed_idf(n_docs: int, df) -> np.ndarray:
    df = np.asarray(df, dtype=np.float64)
    return np.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))


def compute_idf(token_streams: Iterable[Sequence[int]], vocab_size: int) -> IdfTable:
    """Document frequencies from per-document token id sequences."""
    df = np.zeros(vocab_size, dtype=np.float64)
    n_docs = 0
    for stream in token_streams:
        n_docs += 1
        for t in set(stream):
            df[t] += 1
    if n_docs == 0:
        raise ValidationError("cannot compute IDF over an empty corpus")
    return IdfTable(smoothed_idf(n_docs, df), df, n_docs)


def write_idf(table: IdfTable, base_path) -> None:
    write_bundle(TensorBundle({
        "idf": table.idf.astype(np.float32),
        "df": table.df.astype(np.float32),
        "N": np.array([table.n_docs], dtype=np.float32),
    }), base_path)


def read_idf(base_path) -> IdfTable:
    bundle = read_bundle(base_path, require_finite=True)
    for name in ("idf", "df", "N"):
        if name not in bundle:
            raise ValidationError(f"{base_path}: IDF bundle missing tensor {name!r}")
    return IdfTable(bundle["idf"].astype(np.float64),
                    bundle["df"].astype(np.float64),
                    int(bundle["N"][0]))
