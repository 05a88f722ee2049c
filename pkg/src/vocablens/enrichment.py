"""Lexical enrichment of dense representations.

Single-token enrichments: for every vocabulary token t, an input vector s_t
is optimized with Adam so the head's output distribution concentrates on t
(cross-entropy against the one-hot target, stopped at a loss threshold).
The fitted rows are whitened (PCA whitening fit on the converged rows), and
texts are enriched at inference time by adding a lambda-scaled, normalized,
IDF-weighted average of their tokens' enrichment vectors.

Fitting is deterministic: each token's initialization draws from a stream
seeded by (seed, token id), and tokens are processed in fixed-size chunks
whose results do not depend on the worker count.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .datastore import EmbeddingStore, TensorBundle, read_bundle, write_bundle
from .errors import ValidationError
from .lexical import IdfTable, Vocabulary, tokenize
from .mlmhead import MlmHeadParams, _backward_rows, _forward_rows

FIT_CHUNK = 1024


@dataclass
class OptimizerConfig:
    lr: float = 0.01
    loss_threshold: float = 0.1
    max_steps: int = 2000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    init_noise: float = 0.01

    def __post_init__(self):
        if self.lr <= 0 or self.loss_threshold <= 0 or self.max_steps < 1:
            raise ValidationError("lr and loss threshold must be positive, max steps >= 1")


@dataclass
class EnrichmentTable:
    """Fitted single-token enrichment matrix with convergence bookkeeping."""

    s: np.ndarray            # (|V|, d)
    converged: np.ndarray    # (|V|,) bool
    losses: np.ndarray       # (|V|,) final cross-entropy per token

    def __post_init__(self):
        if not np.isfinite(self.s).all():
            raise ValidationError("enrichment rows must be finite")

    @property
    def unconverged_ids(self) -> list[int]:
        return [int(i) for i in np.nonzero(~self.converged)[0]]


def _row_losses(params: MlmHeadParams, inter: dict, targets: np.ndarray) -> np.ndarray:
    logits = inter["logits"]
    m = logits.max(axis=-1)
    lse = m + np.log(np.exp(logits - m[:, None]).sum(axis=-1))
    return lse - logits[np.arange(len(targets)), targets]


def _fit_chunk(params: MlmHeadParams, cfg: OptimizerConfig, token_ids: np.ndarray):
    """Adam on CE(s_t, t) for one chunk of tokens; frozen rows stop updating."""
    n, d = len(token_ids), params.dim
    s = np.empty((n, d), dtype=np.float64)
    for i, t in enumerate(token_ids):
        rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), int(t)]))
        s[i] = params.v[t] + cfg.init_noise * rng.standard_normal(d)
    m = np.zeros((n, d))
    v = np.zeros((n, d))
    steps = np.zeros(n)
    converged = np.zeros(n, dtype=bool)
    failed = np.zeros(n, dtype=bool)
    losses = np.full(n, np.inf)
    active = np.arange(n)

    for step in range(cfg.max_steps + 1):
        if active.size == 0:
            break
        inter = _forward_rows(params, s[active])
        loss = _row_losses(params, inter, token_ids[active])
        bad = ~np.isfinite(loss)
        if bad.any():
            failed[active[bad]] = True
            losses[active[bad]] = loss[bad]
        done = ~bad & (loss <= cfg.loss_threshold)
        converged[active[done]] = True
        losses[active[done]] = loss[done]
        keep = ~(bad | done)
        if step == cfg.max_steps:
            losses[active[keep]] = loss[keep]
            break
        active = active[keep]
        if active.size == 0:
            break
        inter = {k: val[keep] for k, val in inter.items()}
        dlogits = inter["probs"].copy()
        dlogits[np.arange(active.size), token_ids[active]] -= 1.0
        grad = _backward_rows(params, inter, dlogits)
        bad_grad = ~np.isfinite(grad).all(axis=1)
        if bad_grad.any():
            failed[active[bad_grad]] = True
            losses[active[bad_grad]] = np.inf
            ok = ~bad_grad
            active, grad = active[ok], grad[ok]
            if active.size == 0:
                break
        steps[active] += 1
        t_corr = steps[active][:, None]
        m[active] = cfg.beta1 * m[active] + (1 - cfg.beta1) * grad
        v[active] = cfg.beta2 * v[active] + (1 - cfg.beta2) * grad * grad
        m_hat = m[active] / (1 - cfg.beta1 ** t_corr)
        v_hat = v[active] / (1 - cfg.beta2 ** t_corr)
        step_vec = cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
        if not np.isfinite(step_vec).all():
            blown = ~np.isfinite(step_vec).all(axis=1)
            failed[active[blown]] = True
            losses[active[blown]] = np.inf
            keep2 = ~blown
            active, step_vec = active[keep2], step_vec[keep2]
            if active.size == 0:
                break
        s[active] -= step_vec

    # rows that blew up keep their initialization so the table stays finite
    if failed.any():
        for i in np.nonzero(failed)[0]:
            t = token_ids[i]
            rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), int(t)]))
            s[i] = params.v[t] + cfg.init_noise * rng.standard_normal(d)
        converged[failed] = False
    return s, converged, losses


def fit_single_token_enrichments(params: MlmHeadParams, cfg: OptimizerConfig,
                                 threads: int = 1) -> EnrichmentTable:
    """Fit one enrichment vector per vocabulary token; results are independent
    of the worker count and bitwise reproducible for a fixed seed."""
    vocab_size = params.vocab_size
    chunks = [np.arange(lo, min(lo + FIT_CHUNK, vocab_size))
              for lo in range(0, vocab_size, FIT_CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ids: _fit_chunk(params, cfg, ids), chunks))
    else:
        parts = [_fit_chunk(params, cfg, ids) for ids in chunks]
    s = np.vstack([p[0] for p in parts])
    converged = np.concatenate([p[1] for p in parts])
    losses = np.concatenate([p[2] for p in parts])
    return EnrichmentTable(s, converged, losses)


# ---------------------------------------------------------------------------
# Whitening

@dataclass
class WhiteningParams:
    mean: np.ndarray        # (d,)
    transform: np.ndarray   # (d, d), x_whitened = (x - mean) @ transform


def fit_whitening(rows: np.ndarray, eig_floor: float = 1e-10) -> WhiteningParams:
    """PCA whitening: W = U diag(eigenvalues)^(-1/2) from the sample covariance."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise ValidationError("whitening expects a 2-D row matrix")
    n, d = rows.shape
    if n < d + 1:
        raise ValidationError(f"whitening needs at least d+1={d + 1} rows, got {n}")
    mean = rows.mean(axis=0)
    cov = np.cov(rows, rowvar=False)
    eigvals, eigvecs = np.linalg.eigh(cov)
    if (eigvals < eig_floor).any():
        warnings.warn(f"clamping {int((eigvals < eig_floor).sum())} near-zero covariance "
                      f"eigenvalue(s) to {eig_floor}", stacklevel=2)
        eigvals = np.maximum(eigvals, eig_floor)
    transform = eigvecs / np.sqrt(eigvals)
    return WhiteningParams(mean, transform)


def apply_whitening(params: WhiteningParams, x: np.ndarray) -> np.ndarray:
    return (np.asarray(x, dtype=np.float64) - params.mean) @ params.transform


# ---------------------------------------------------------------------------
# Enrichment model (Eq.-style mixing with ablation switches)

@dataclass
class EnrichmentModel:
    """Effective per-token vectors plus the weighting/mixing configuration."""

    vectors: np.ndarray              # (|V|, d) table actually used for mixing
    vocab: Vocabulary
    idf: IdfTable | None
    lam: float
    use_idf: bool = True
    use_whitening: bool = True
    use_l2_norm: bool = True
    use_embedding_matrix: bool = False
    unique_tokens: bool = False

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValidationError("lambda must be finite and non-negative")
        if self.vectors.shape[0] != len(self.vocab):
            raise ValidationError(
                f"table has {self.vectors.shape[0]} rows for a vocabulary of {len(self.vocab)}"
            )
        if self.use_idf and self.idf is None:
            raise ValidationError("IDF weighting enabled but no IDF table supplied")
        if self.idf is not None and self.idf.idf.shape[0] != len(self.vocab):
            raise ValidationError("IDF table size does not match the vocabulary")

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


def build_enrichment_model(table: EnrichmentTable | None, vocab: Vocabulary,
                           lam: float, idf: IdfTable | None = None,
                           whitening: WhiteningParams | None = None,
                           head: MlmHeadParams | None = None,
                           use_idf: bool = True, use_whitening: bool = True,
                           use_l2_norm: bool = True, use_embedding_matrix: bool = False,
                           unique_tokens: bool = False) -> EnrichmentModel:
    """Resolve the effective token-vector table from the ablation switches.

    The embedding-matrix substitute replaces the fitted rows with the head's
    static token embeddings before whitening, so the rest of the pipeline is
    unchanged by that ablation.
    """
    if use_embedding_matrix:
        if head is None:
            raise ValidationError("embedding-matrix substitute requires head parameters")
        base = head.v.copy()
    else:
        if table is None:
            raise ValidationError("no enrichment table supplied")
        base = table.s.copy()
    if use_whitening:
        if use_embedding_matrix:
            whitening = fit_whitening(base)
        elif whitening is None:
            rows = table.s[table.converged]
            whitening = fit_whitening(rows)
        base = apply_whitening(whitening, base)
    return EnrichmentModel(base, vocab, idf, lam, use_idf, use_whitening,
                           use_l2_norm, use_embedding_matrix, unique_tokens)


def lexical_vector(model: EnrichmentModel, token_ids) -> np.ndarray:
    """Length-normalized IDF-weighted sum of the tokens' enrichment vectors.

    Special tokens are dropped; stop words and punctuation stay (IDF already
    down-weights them). Repeats count unless the model uses unique tokens.
    """
    ids = [int(t) for t in token_ids if int(t) not in model.vocab.special_ids]
    for t in ids:
        if not 0 <= t < len(model.vocab):
            raise ValidationError(f"token id {t} out of range")
    if model.unique_tokens:
        ids = sorted(set(ids))
    if not ids:
        raise ValidationError("empty lexical input")
    idx = np.array(ids)
    if model.use_idf:
        weights = model.idf.idf[idx]
    else:
        weights = np.ones(len(ids))
    return (weights[:, None] * model.vectors[idx]).sum(axis=0) / len(ids)


def enrich(model: EnrichmentModel, e_x: np.ndarray, e_lex: np.ndarray) -> np.ndarray:
    """e'_x = e_x + lambda * (e_lex / ||e_lex||); lambda = 0 returns e_x as is."""
    e_x = np.asarray(e_x, dtype=np.float64)
    if model.lam == 0.0:
        return e_x.copy()
    e_lex = np.asarray(e_lex, dtype=np.float64)
    if model.use_l2_norm:
        norm = float(np.linalg.norm(e_lex))
        if norm == 0.0:
            raise ValidationError("cannot normalize a zero lexical vector")
        e_lex = e_lex / norm
    return e_x + model.lam * e_lex


def enrich_store(model: EnrichmentModel, store: EmbeddingStore,
                 texts: dict[str, str]) -> EmbeddingStore:
    """Row-wise lexical_vector + enrich over a store; ids, order and the
    similarity tag are preserved. lambda = 0 returns an identical copy."""
    missing = [i for i in store.ids if i not in texts]
    if missing:
        raise ValidationError(f"missing text for id(s): {', '.join(missing[:10])}")
    if model.lam == 0.0:
        return EmbeddingStore(list(store.ids), store.vectors.copy(), store.similarity)
    if store.dim != model.dim:
        raise ValidationError(f"store dim {store.dim} != enrichment dim {model.dim}")
    out = np.empty_like(store.vectors, dtype=np.float64)
    for i, rid in enumerate(store.ids):
        try:
            lex = lexical_vector(model, tokenize(model.vocab, texts[rid]))
            out[i] = enrich(model, store.vectors[i].astype(np.float64), lex)
        except ValidationError as e:
            raise ValidationError(f"id {rid!r}: {e}") from e
    return EmbeddingStore(list(store.ids), out.astype(np.float32), store.similarity)


# ---------------------------------------------------------------------------
# Persistence

def save_enrichment(table: EnrichmentTable, whitening: WhiteningParams | None,
                    base_path, metadata: dict | None = None) -> None:
    tensors = {
        "s_table": table.s.astype(np.float32),
        "converged": table.converged.astype(np.float32),
        "losses": np.where(np.isfinite(table.losses), table.losses, -1.0).astype(np.float32),
    }
    if whitening is not None:
        tensors["whiten.mean"] = whitening.mean.astype(np.float32)
        tensors["whiten.transform"] = whitening.transform.astype(np.float32)
    write_bundle(TensorBundle(tensors, metadata or {}), base_path)


def load_enrichment(base_path) -> tuple[EnrichmentTable, WhiteningParams | None]:
    bundle = read_bundle(base_path, require_finite=True)
    for name in ("s_table", "converged", "losses"):
        if name not in bundle:
            raise ValidationError(f"{base_path}: enrichment bundle missing tensor {name!r}")
    losses = bundle["losses"].astype(np.float64)
    losses = np.where(losses < 0, np.inf, losses)
    table = EnrichmentTable(bundle["s_table"].astype(np.float64),
                            bundle["converged"].astype(bool), losses)
    whitening = None
    if "whiten.mean" in bundle and "whiten.transform" in bundle:
        whitening = WhiteningParams(bundle["whiten.mean"].astype(np.float64),
                                    bundle["whiten.transform"].astype(np.float64))
    return table, whitening
