import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vocablens.datastore import (CorpusRecord, EmbeddingStore, QueryRecord, TensorBundle,
                                 load_corpus, load_queries, read_bundle, read_embeddings,
                                 write_bundle, write_corpus, write_embeddings, write_queries)
from vocablens.errors import ValidationError


def test_round_trip_identity(tmp_path):
    bundle = TensorBundle({"w": np.array([[1.0, 0.0], [0.0, 1.0]])}, {"note": "id"})
    write_bundle(bundle, tmp_path / "b")
    assert read_bundle(tmp_path / "b") == bundle


def test_declared_size_arithmetic(tmp_path):
    bundle = TensorBundle({"v": np.zeros((30522, 4), dtype=np.float32)})
    write_bundle(bundle, tmp_path / "b")
    assert (tmp_path / "b.bin").stat().st_size == 30522 * 4 * 4
    manifest = json.loads((tmp_path / "b.manifest").read_text())
    assert manifest["tensors"]["v"]["nbytes"] == 30522 * 4 * 4


def test_invalid_shapes_rejected():
    with pytest.raises(ValidationError):
        TensorBundle({"w": np.zeros((0, 3), dtype=np.float32)})
    with pytest.raises(ValidationError):
        TensorBundle({"": np.zeros(3, dtype=np.float32)})
    # scalars are promoted to shape [1] rather than rejected
    assert TensorBundle({"n": np.float32(3.0)})["n"].shape == (1,)


def test_truncated_payload(tmp_path):
    write_bundle(TensorBundle({"w": np.arange(6, dtype=np.float32)}), tmp_path / "b")
    raw = (tmp_path / "b.bin").read_bytes()
    (tmp_path / "b.bin").write_bytes(raw[:-4])
    with pytest.raises(ValidationError, match="w"):
        read_bundle(tmp_path / "b")


def test_manifest_names_absent_tensor(tmp_path):
    write_bundle(TensorBundle({"w": np.arange(4, dtype=np.float32)}), tmp_path / "b")
    manifest = json.loads((tmp_path / "b.manifest").read_text())
    manifest["tensors"]["ghost"] = {"dtype": "float32", "shape": [8], "offset": 16, "nbytes": 32}
    (tmp_path / "b.manifest").write_text(json.dumps(manifest))
    with pytest.raises(ValidationError, match="ghost"):
        read_bundle(tmp_path / "b")


def test_shape_payload_mismatch(tmp_path):
    write_bundle(TensorBundle({"w": np.arange(3, dtype=np.float32)}), tmp_path / "b")
    manifest = json.loads((tmp_path / "b.manifest").read_text())
    manifest["tensors"]["w"]["shape"] = [3]
    manifest["tensors"]["w"]["nbytes"] = 8
    (tmp_path / "b.manifest").write_text(json.dumps(manifest))
    with pytest.raises(ValidationError):
        read_bundle(tmp_path / "b")


def test_wrong_endianness_rejected(tmp_path):
    write_bundle(TensorBundle({"w": np.arange(4, dtype=np.float32)}), tmp_path / "b")
    manifest = json.loads((tmp_path / "b.manifest").read_text())
    manifest["byte_order"] = "big"
    (tmp_path / "b.manifest").write_text(json.dumps(manifest))
    with pytest.raises(ValidationError, match="byte order"):
        read_bundle(tmp_path / "b")


def test_finite_flag(tmp_path):
    arr = np.array([1.0, np.nan], dtype=np.float32)
    write_bundle(TensorBundle({"w": arr}), tmp_path / "b")
    back = read_bundle(tmp_path / "b")               # NaN allowed by default
    assert np.isnan(back["w"][1])
    with pytest.raises(ValidationError, match="w"):
        read_bundle(tmp_path / "b", require_finite=True)


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(
    st.text(alphabet=st.characters(categories=["L", "N"]), min_size=1, max_size=8),
    st.lists(st.integers(1, 4), min_size=1, max_size=3),
    min_size=1, max_size=4,
))
def test_round_trip_random_bundles(tmp_path_factory, shapes):
    rng = np.random.default_rng(0)
    bundle = TensorBundle(
        {name: rng.standard_normal(shape).astype(np.float32)
         for name, shape in shapes.items()},
        {"k": "v"},
    )
    base = tmp_path_factory.mktemp("bundles") / "b"
    write_bundle(bundle, base)
    back = read_bundle(base)
    assert back == bundle
    # write(read(x)) reproduces the files byte for byte
    write_bundle(back, base.parent / "b2")
    assert (base.parent / "b2.bin").read_bytes() == Path_read(base, ".bin")
    assert (base.parent / "b2.manifest").read_bytes() == Path_read(base, ".manifest")


def Path_read(base, suffix):
    from pathlib import Path
    return Path(f"{base}{suffix}").read_bytes()


# ---------------------------------------------------------------------------
# Corpus / query files

def test_corpus_round_trip(tmp_path):
    records = [CorpusRecord("p1", "Title", "some text"), CorpusRecord("p2", "", "more")]
    write_corpus(records, tmp_path / "c.jsonl")
    assert load_corpus(tmp_path / "c.jsonl") == records


def test_corpus_order_and_duplicates(tmp_path):
    lines = [
        {"id": "p1", "title": "", "text": "a"},
        {"id": "p2", "title": "", "text": "b"},
        {"id": "p1", "title": "", "text": "c"},
    ]
    path = tmp_path / "c.jsonl"
    path.write_text("\n".join(json.dumps(x) for x in lines) + "\n")
    with pytest.raises(ValidationError) as err:
        load_corpus(path)
    assert "1" in str(err.value) and "3" in str(err.value)
    path.write_text("\n".join(json.dumps(x) for x in lines[:2]) + "\n")
    assert [r.id for r in load_corpus(path)] == ["p1", "p2"]


def test_empty_corpus(tmp_path):
    (tmp_path / "c.jsonl").write_text("")
    assert load_corpus(tmp_path / "c.jsonl") == []


def test_malformed_line_cites_number(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id": "p1", "title": "", "text": "a"}\nnot json\n')
    with pytest.raises(ValidationError, match=":2"):
        load_corpus(path)


def test_unexpected_fields_rejected(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id": "p1", "title": "", "text": "a", "extra": 1}\n')
    with pytest.raises(ValidationError):
        load_corpus(path)


def test_queries_round_trip(tmp_path):
    records = [QueryRecord("q1", "who?", ["ans"], ["p1", "p2"]),
               QueryRecord("q2", "what?", [], [])]
    write_queries(records, tmp_path / "q.jsonl")
    assert load_queries(tmp_path / "q.jsonl") == records


# ---------------------------------------------------------------------------
# Embedding stores

def test_embeddings_round_trip(tmp_path):
    store = EmbeddingStore(["a", "b", "c"], np.arange(12, dtype=np.float32).reshape(3, 4),
                           similarity="cosine")
    write_embeddings(store, tmp_path / "e")
    back = read_embeddings(tmp_path / "e")
    assert back.ids == store.ids and back.similarity == "cosine" and back.dim == 4
    assert back.vectors.tobytes() == store.vectors.tobytes()


def test_embeddings_count_mismatch(tmp_path):
    with pytest.raises(ValidationError, match="row count"):
        EmbeddingStore(["a", "b", "c"], np.zeros((2, 4), dtype=np.float32))


def test_embeddings_nan_row_reported():
    vecs = np.zeros((3, 2), dtype=np.float32)
    vecs[1, 0] = np.nan
    with pytest.raises(ValidationError, match="non-finite row 1"):
        EmbeddingStore(["a", "b", "c"], vecs)


def test_embeddings_bad_similarity():
    with pytest.raises(ValidationError, match="similarity"):
        EmbeddingStore(["a"], np.zeros((1, 2), dtype=np.float32), similarity="euclid")


def test_ids_sidecar_mismatch(tmp_path):
    store = EmbeddingStore(["a", "b"], np.zeros((2, 2), dtype=np.float32))
    write_embeddings(store, tmp_path / "e")
    (tmp_path / "e.ids").write_text("a\n")
    with pytest.raises(ValidationError, match="ids"):
        read_embeddings(tmp_path / "e")
