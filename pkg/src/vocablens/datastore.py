"""Portable on-disk formats shared by every stage of the pipeline.

Tensor bundles are a pair of files: ``<base>.manifest`` (JSON, UTF-8) and
``<base>.bin`` (raw little-endian float32 payload, row-major, tensors
concatenated in sorted-name order). The manifest records dtype, shape,
byte offset and byte length per tensor plus a free-form string/number
metadata map. Round-trips are bit-exact.

Corpora and query sets are JSONL, one object per line, with exactly the
fields (id, title, text) and (id, text, answers, gold_pids) respectively.

Embedding stores are a tensor bundle holding a single "vectors" tensor, a
"similarity" metadata tag (dot | cosine) and a ``<base>.ids`` sidecar with
one id per line, in row order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ValidationError

BUNDLE_FORMAT = "tensor-bundle-v1"
SIMILARITIES = ("dot", "cosine")


def _as_float32(name: str, value) -> np.ndarray:
    arr = np.ascontiguousarray(value, dtype=np.float32)
    if arr.ndim < 1 or any(int(s) < 1 for s in arr.shape):
        raise ValidationError(
            f"tensor {name!r}: shape must be a non-empty list of positive integers, got {list(arr.shape)}"
        )
    return arr


class TensorBundle:
    """A named collection of dense float32 arrays plus scalar metadata."""

    def __init__(self, tensors: Mapping[str, np.ndarray], metadata: Mapping | None = None):
        self.tensors: dict[str, np.ndarray] = {}
        for name, value in tensors.items():
            if not isinstance(name, str) or not name:
                raise ValidationError(f"tensor name must be a non-empty string, got {name!r}")
            self.tensors[name] = _as_float32(name, value)
        self.metadata: dict = dict(metadata or {})

    def __getitem__(self, name: str) -> np.ndarray:
        if name not in self.tensors:
            raise ValidationError(f"bundle has no tensor {name!r} (has {sorted(self.tensors)})")
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __eq__(self, other) -> bool:
        if not isinstance(other, TensorBundle):
            return NotImplemented
        if self.metadata != other.metadata or set(self.tensors) != set(other.tensors):
            return False
        return all(
            a.shape == other.tensors[k].shape
            and a.tobytes() == other.tensors[k].tobytes()
            for k, a in self.tensors.items()
        )


def write_bundle(bundle: TensorBundle, base_path) -> None:
    """Write ``<base>.manifest`` + ``<base>.bin``; later read_bundle round-trips bit-exactly."""
    base = Path(base_path)
    base.parent.mkdir(parents=True, exist_ok=True)
    if not bundle.tensors:
        raise ValidationError("refusing to write a bundle with no tensors")
    entries = {}
    chunks = []
    offset = 0
    for name in sorted(bundle.tensors):
        arr = bundle.tensors[name]
        raw = arr.tobytes()
        entries[name] = {
            "dtype": "float32",
            "shape": [int(s) for s in arr.shape],
            "offset": offset,
            "nbytes": len(raw),
        }
        chunks.append(raw)
        offset += len(raw)
    manifest = {
        "format": BUNDLE_FORMAT,
        "byte_order": "little",
        "metadata": bundle.metadata,
        "tensors": entries,
    }
    with open(f"{base}.manifest", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    with open(f"{base}.bin", "wb") as f:
        for raw in chunks:
            f.write(raw)


def read_bundle(base_path, require_finite: bool = False) -> TensorBundle:
    """Load a bundle, verifying manifest/payload consistency byte for byte."""
    base = Path(base_path)
    manifest_path = Path(f"{base}.manifest")
    payload_path = Path(f"{base}.bin")
    for p in (manifest_path, payload_path):
        if not p.is_file():
            raise FileNotFoundError(f"missing bundle file: {p}")
    with open(manifest_path, encoding="utf-8") as f:
        try:
            manifest = json.load(f)
        except json.JSONDecodeError as e:
            raise ValidationError(f"{manifest_path}: invalid manifest JSON: {e}") from e
    if manifest.get("format") != BUNDLE_FORMAT:
        raise ValidationError(f"{manifest_path}: unsupported format {manifest.get('format')!r}")
    if manifest.get("byte_order") != "little":
        raise ValidationError(f"{manifest_path}: unsupported byte order {manifest.get('byte_order')!r}")
    payload = payload_path.read_bytes()
    entries = manifest.get("tensors", {})
    if not isinstance(entries, dict) or not entries:
        raise ValidationError(f"{manifest_path}: manifest lists no tensors")
    tensors = {}
    total = 0
    for name, entry in entries.items():
        if entry.get("dtype") != "float32":
            raise ValidationError(f"tensor {name!r}: unsupported dtype {entry.get('dtype')!r}")
        shape = entry.get("shape")
        if not isinstance(shape, list) or not shape or any(
            not isinstance(s, int) or s < 1 for s in shape
        ):
            raise ValidationError(f"tensor {name!r}: invalid shape {shape!r}")
        count = int(np.prod(shape))
        nbytes = entry.get("nbytes")
        offset = entry.get("offset")
        if nbytes != count * 4:
            raise ValidationError(
                f"tensor {name!r}: declared element count {count} x 4 bytes != payload length {nbytes}"
            )
        if offset < 0 or offset + nbytes > len(payload):
            raise ValidationError(
                f"tensor {name!r}: payload slice [{offset}, {offset + nbytes}) outside "
                f"payload of {len(payload)} bytes (truncated or absent tensor)"
            )
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(shape)
        tensors[name] = arr.copy()
        total += nbytes
    if total != len(payload):
        raise ValidationError(
            f"{payload_path}: payload holds {len(payload)} bytes but manifest accounts for {total}"
        )
    bundle = TensorBundle(tensors, manifest.get("metadata", {}))
    if require_finite:
        bad = sorted(n for n, a in bundle.tensors.items() if not np.isfinite(a).all())
        if bad:
            raise ValidationError(f"non-finite values in tensor(s): {', '.join(bad)}")
    return bundle


# ---------------------------------------------------------------------------
# Corpus / query files (JSONL)

@dataclass
class CorpusRecord:
    id: str
    title: str
    text: str


@dataclass
class QueryRecord:
    id: str
    text: str
    answers: list[str] = field(default_factory=list)
    gold_pids: list[str] = field(default_factory=list)


def _load_jsonl(path, fields: tuple[str, ...]):
    rows = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValidationError(f"{path}:{lineno}: malformed line: {e}") from e
            if not isinstance(obj, dict) or set(obj) != set(fields):
                raise ValidationError(
                    f"{path}:{lineno}: expected exactly fields {list(fields)}, got "
                    f"{sorted(obj) if isinstance(obj, dict) else type(obj).__name__}"
                )
            rid = obj["id"]
            if not isinstance(rid, str) or not rid:
                raise ValidationError(f"{path}:{lineno}: id must be a non-empty string")
            if rid in seen:
                raise ValidationError(
                    f"{path}: duplicate id {rid!r} on lines {seen[rid]} and {lineno}"
                )
            seen[rid] = lineno
            rows.append((lineno, obj))
    return rows


def load_corpus(path) -> list[CorpusRecord]:
    out = []
    for lineno, obj in _load_jsonl(path, ("id", "title", "text")):
        if not isinstance(obj["title"], str) or not isinstance(obj["text"], str):
            raise ValidationError(f"{path}:{lineno}: title and text must be strings")
        out.append(CorpusRecord(obj["id"], obj["title"], obj["text"]))
    return out


def load_queries(path) -> list[QueryRecord]:
    out = []
    for lineno, obj in _load_jsonl(path, ("id", "text", "answers", "gold_pids")):
        if not isinstance(obj["text"], str):
            raise ValidationError(f"{path}:{lineno}: text must be a string")
        for key in ("answers", "gold_pids"):
            if not isinstance(obj[key], list) or any(not isinstance(x, str) for x in obj[key]):
                raise ValidationError(f"{path}:{lineno}: {key} must be a list of strings")
        out.append(QueryRecord(obj["id"], obj["text"], obj["answers"], obj["gold_pids"]))
    return out


def write_corpus(records: Iterable[CorpusRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps({"id": r.id, "title": r.title, "text": r.text}, sort_keys=True))
            f.write("\n")


def write_queries(records: Iterable[QueryRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(
                {"id": r.id, "text": r.text, "answers": r.answers, "gold_pids": r.gold_pids},
                sort_keys=True,
            ))
            f.write("\n")


# ---------------------------------------------------------------------------
# Embedding stores

@dataclass
class EmbeddingStore:
    """Id-addressed dense vectors; one row per id, float32, fixed similarity."""

    ids: list[str]
    vectors: np.ndarray
    similarity: str = "dot"

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2:
            raise ValidationError(f"vectors must be 2-D, got shape {self.vectors.shape}")
        if len(self.ids) != self.vectors.shape[0]:
            raise ValidationError(
                f"id count {len(self.ids)} does not match vector row count {self.vectors.shape[0]}"
            )
        if self.similarity not in SIMILARITIES:
            raise ValidationError(f"similarity must be one of {SIMILARITIES}, got {self.similarity!r}")
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("embedding ids must be unique")
        for i in self.ids:
            if not i or "\n" in i or "\r" in i:
                raise ValidationError(f"invalid embedding id {i!r}")
        bad = np.nonzero(~np.isfinite(self.vectors).all(axis=1))[0]
        if bad.size:
            raise ValidationError("non-finite row " + ", ".join(str(int(i)) for i in bad))

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def row(self, rid: str) -> np.ndarray:
        return self.vectors[self.ids.index(rid)]


def write_embeddings(store: EmbeddingStore, base_path) -> None:
    if store.vectors.shape[0] == 0:
        raise ValidationError("refusing to write an empty embedding store")
    bundle = TensorBundle({"vectors": store.vectors}, {"similarity": store.similarity})
    write_bundle(bundle, base_path)
    with open(f"{Path(base_path)}.ids", "w", encoding="utf-8") as f:
        for i in store.ids:
            f.write(i + "\n")


def read_embeddings(base_path) -> EmbeddingStore:
    bundle = read_bundle(base_path)
    if "vectors" not in bundle:
        raise ValidationError(f"{base_path}: embedding bundle must contain a 'vectors' tensor")
    ids_path = Path(f"{Path(base_path)}.ids")
    if not ids_path.is_file():
        raise FileNotFoundError(f"missing id sidecar: {ids_path}")
    ids = ids_path.read_text(encoding="utf-8").splitlines()
    similarity = bundle.metadata.get("similarity")
    if similarity not in SIMILARITIES:
        raise ValidationError(f"{base_path}: manifest metadata must set similarity to one of {SIMILARITIES}")
    vectors = bundle["vectors"]
    if vectors.ndim != 2:
        raise ValidationError(f"{base_path}: 'vectors' must be 2-D, got shape {vectors.shape}")
    if len(ids) != vectors.shape[0]:
        raise ValidationError(
            f"{base_path}: {len(ids)} ids but {vectors.shape[0]} vector rows"
        )
    return EmbeddingStore(ids, vectors, similarity)
