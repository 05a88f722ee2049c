"""Vocabulary-space projection and lexical enrichment for dense retrieval."""

from .datastore import (
    CorpusRecord,
    EmbeddingStore,
    QueryRecord,
    TensorBundle,
    load_corpus,
    load_queries,
    read_bundle,
    read_embeddings,
    write_bundle,
    write_embeddings,
)
from .enrichment import (
    EnrichmentModel,
    EnrichmentTable,
    OptimizerConfig,
    WhiteningParams,
    apply_whitening,
    build_enrichment_model,
    enrich,
    enrich_store,
    fit_single_token_enrichments,
    fit_whitening,
    lexical_vector,
)
from .errors import NumericError, ValidationError
from .lexical import (
    IdfTable,
    Vocabulary,
    compute_idf,
    content_token_set,
    load_stoplist,
    load_vocab,
    tokenize,
)
from .mlmhead import (
    MlmHeadParams,
    VocabProjection,
    load_head,
    mlm_backward,
    mlm_forward,
    project_store,
    rank_of,
    save_head,
    top_k,
)
from .retrieval import (
    Bm25Index,
    DenseIndex,
    Judgments,
    RunList,
    answer_hit,
    bm25_search,
    build_bm25_index,
    dense_search,
    ndcg_at_10,
    read_qrels,
    read_run,
    topk_accuracy,
    write_run,
)

__version__ = "0.1.0"
