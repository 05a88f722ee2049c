import numpy as np
import pytest

from vocablens.lexical import Vocabulary
from vocablens.mlmhead import MlmHeadParams
from vocablens.synth import make_amnesia_world, make_synthetic_head


@pytest.fixture(scope="session")
def tiny_head() -> MlmHeadParams:
    """d=2, |V|=3 head with hand-picked literal parameters."""
    return MlmHeadParams(
        w=[[0.5, -0.25], [1.0, 0.75]],
        b=[0.1, -0.2],
        gamma=[1.2, 0.8],
        beta=[0.05, -0.05],
        eps=1e-12,
        activation="gelu",
        v=[[1.0, 0.0], [0.0, 1.0], [-0.5, 0.5]],
        b_out=[0.0, 0.1, -0.1],
    )


@pytest.fixture(scope="session")
def small_head() -> MlmHeadParams:
    return make_synthetic_head(20, 6, seed=42)


@pytest.fixture(scope="session")
def toy_vocab() -> Vocabulary:
    return Vocabulary([
        "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
        "the", "a", "of",
        ".", ",", "!", "?",
        "re", "##ba", "great", "lakes", "ocean", "water", "deep",
        "un", "##able", "s", "##now",
    ])


@pytest.fixture(scope="session")
def toy_stop_ids(toy_vocab) -> frozenset[int]:
    return frozenset(toy_vocab.token_to_id[w] for w in ("the", "a", "of"))


@pytest.fixture(scope="session")
def amnesia_world():
    return make_amnesia_world()


@pytest.fixture(scope="session")
def world_dir(tmp_path_factory, amnesia_world):
    """The amnesia world written out in every on-disk format the CLI reads."""
    from vocablens.datastore import write_corpus, write_embeddings, write_queries
    from vocablens.lexical import write_vocab
    from vocablens.mlmhead import save_head
    from vocablens.retrieval import Judgments, write_qrels

    w = amnesia_world
    root = tmp_path_factory.mktemp("world")
    write_corpus(w.corpus, root / "corpus.jsonl")
    write_queries(w.queries, root / "queries.jsonl")
    write_vocab(w.vocab, root / "vocab.txt")
    save_head(w.head, root / "head")
    write_embeddings(w.query_store, root / "qemb")
    write_embeddings(w.passage_store, root / "pemb")
    write_embeddings(w.clean_passage_store, root / "pemb_clean")
    write_qrels(Judgments.from_queries(w.queries), root / "qrels.txt")
    return root


def random_projection(vocab_size: int, rng: np.random.Generator):
    """Random logits -> consistent VocabProjection for metric oracles."""
    from vocablens.mlmhead import VocabProjection

    logits = rng.standard_normal(vocab_size)
    shifted = np.exp(logits - logits.max())
    return VocabProjection(logits, shifted / shifted.sum())
