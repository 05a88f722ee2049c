"""Masked-language-model head: forward, analytic backward, vocabulary projection.

The head maps a d-vector h to a distribution over the vocabulary:

    a = W h + b            (dense transform)
    z = act(a)             (exact-erf GELU, or identity)
    g = LayerNorm(z)       (gamma, beta, eps)
    logits = V g + b_out
    probs  = softmax(logits)

All math runs in float64 regardless of the float32 storage format. Ordering
queries (top_k, rank_of) sort by logits with ties broken by ascending token
id; softmax is monotone, so this is the probability ordering as well.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .datastore import EmbeddingStore, TensorBundle, read_bundle, write_bundle
from .errors import NumericError, ValidationError

ACTIVATIONS = ("gelu", "identity")

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact erf formulation: x * Phi(x)."""
    return x * 0.5 * (1.0 + erf(x * _INV_SQRT2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    """d/dx [x * Phi(x)] = Phi(x) + x * phi(x)."""
    return 0.5 * (1.0 + erf(x * _INV_SQRT2)) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


@dataclass
class MlmHeadParams:
    """Exported head parameters; immutable after construction."""

    w: np.ndarray        # (d, d) dense transform, rows are output dims
    b: np.ndarray        # (d,)
    gamma: np.ndarray    # (d,)
    beta: np.ndarray     # (d,)
    eps: float
    activation: str
    v: np.ndarray        # (|V|, d) output token embeddings, row i = token id i
    b_out: np.ndarray | None = None

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.gamma = np.asarray(self.gamma, dtype=np.float64)
        self.beta = np.asarray(self.beta, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        d = self.w.shape[0] if self.w.ndim == 2 else -1
        if self.w.ndim != 2 or self.w.shape != (d, d):
            raise ValidationError(f"transform weight must be square, got {self.w.shape}")
        for name, arr in (("transform.bias", self.b), ("layernorm.gamma", self.gamma),
                          ("layernorm.beta", self.beta)):
            if arr.shape != (d,):
                raise ValidationError(f"{name} must have shape ({d},), got {arr.shape}")
        if self.v.ndim != 2 or self.v.shape[1] != d:
            raise ValidationError(f"decoder weight must be (|V|, {d}), got {self.v.shape}")
        if self.v.shape[0] < 2:
            raise ValidationError("vocabulary size must be at least 2")
        if self.b_out is None:
            self.b_out = np.zeros(self.v.shape[0], dtype=np.float64)
        else:
            self.b_out = np.asarray(self.b_out, dtype=np.float64)
            if self.b_out.shape != (self.v.shape[0],):
                raise ValidationError(f"decoder bias must have shape ({self.v.shape[0]},)")
        if self.eps <= 0:
            raise ValidationError("layernorm eps must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        for name, arr in (("transform", self.w), ("bias", self.b), ("gamma", self.gamma),
                          ("beta", self.beta), ("decoder", self.v), ("decoder bias", self.b_out)):
            if not np.isfinite(arr).all():
                raise ValidationError(f"non-finite values in {name} parameters")

    @property
    def dim(self) -> int:
        return int(self.w.shape[0])

    @property
    def vocab_size(self) -> int:
        return int(self.v.shape[0])


@dataclass
class VocabProjection:
    """One embedding's distribution over the vocabulary (logits + probs)."""

    logits: np.ndarray
    probs: np.ndarray
    source_id: str = ""

    @property
    def vocab_size(self) -> int:
        return int(self.logits.shape[0])


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_rows(params: MlmHeadParams, h: np.ndarray) -> dict:
    """Shared batched forward; h is (n, d). Returns all intermediates."""
    a = h @ params.w.T + params.b
    z = gelu(a) if params.activation == "gelu" else a
    mu = z.mean(axis=-1, keepdims=True)
    var = ((z - mu) ** 2).mean(axis=-1, keepdims=True)
    sigma = np.sqrt(var + params.eps)
    zhat = (z - mu) / sigma
    g = params.gamma * zhat + params.beta
    logits = g @ params.v.T + params.b_out
    if not np.isfinite(logits).all():
        raise NumericError("non-finite logits in head forward pass")
    return {"a": a, "zhat": zhat, "sigma": sigma, "g": g,
            "logits": logits, "probs": _softmax_rows(logits)}


def _backward_rows(params: MlmHeadParams, inter: dict, dlogits: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. the input rows given upstream dlogits (n, |V|)."""
    dg = dlogits @ params.v
    dzhat = dg * params.gamma
    zhat = inter["zhat"]
    dz = (dzhat - dzhat.mean(axis=-1, keepdims=True)
          - zhat * (dzhat * zhat).mean(axis=-1, keepdims=True)) / inter["sigma"]
    da = dz * gelu_grad(inter["a"]) if params.activation == "gelu" else dz
    return da @ params.w


def _check_vector(params: MlmHeadParams, h) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (params.dim,):
        raise ValidationError(f"input must have shape ({params.dim},), got {h.shape}")
    if not np.isfinite(h).all():
        raise ValidationError("input vector contains non-finite values")
    return h


def mlm_forward(params: MlmHeadParams, h, source_id: str = "") -> VocabProjection:
    h = _check_vector(params, h)
    inter = _forward_rows(params, h[None, :])
    return VocabProjection(inter["logits"][0], inter["probs"][0], source_id)


def cross_entropy(params: MlmHeadParams, h, target: int) -> float:
    """-log probs[target], computed in log space (no underflow)."""
    h = _check_vector(params, h)
    inter = _forward_rows(params, h[None, :])
    logits = inter["logits"][0]
    m = logits.max()
    return float(m + np.log(np.exp(logits - m).sum()) - logits[target])


def mlm_backward(params: MlmHeadParams, h, target: int) -> np.ndarray:
    """Analytic gradient of the cross-entropy -log probs[target] w.r.t. h."""
    h = _check_vector(params, h)
    if not 0 <= target < params.vocab_size:
        raise ValidationError(f"target id {target} out of range [0, {params.vocab_size})")
    inter = _forward_rows(params, h[None, :])
    dlogits = inter["probs"].copy()
    dlogits[0, target] -= 1.0
    return _backward_rows(params, inter, dlogits)[0]


def project_store(params: MlmHeadParams, store: EmbeddingStore) -> list[VocabProjection]:
    """One projection per store row, in store order (batched mlm_forward)."""
    if store.dim != params.dim:
        raise ValidationError(
            f"embedding dim {store.dim} does not match head dim {params.dim}"
        )
    if store.vectors.shape[0] == 0:
        return []
    inter = _forward_rows(params, store.vectors.astype(np.float64))
    return [
        VocabProjection(inter["logits"][i], inter["probs"][i], rid)
        for i, rid in enumerate(store.ids)
    ]


def _order(proj: VocabProjection) -> np.ndarray:
    """Token ids in descending-logit order, ties broken by ascending id."""
    n = proj.logits.shape[0]
    return np.lexsort((np.arange(n), -proj.logits))


def top_k(proj: VocabProjection, k: int) -> list[tuple[int, float]]:
    if not 1 <= k <= proj.vocab_size:
        raise ValidationError(f"k must be in [1, {proj.vocab_size}], got {k}")
    order = _order(proj)[:k]
    return [(int(t), float(proj.probs[t])) for t in order]


def rank_of(proj: VocabProjection, token_id: int) -> int:
    """1-based rank under the same ordering as top_k."""
    if not 0 <= token_id < proj.vocab_size:
        raise ValidationError(f"token id {token_id} out of range [0, {proj.vocab_size})")
    x = proj.logits[token_id]
    higher = int(np.count_nonzero(proj.logits > x))
    tied_before = int(np.count_nonzero(proj.logits[:token_id] == x))
    return higher + tied_before + 1


def rank_lookup(proj: VocabProjection, token_ids) -> dict[int, int]:
    return {int(t): rank_of(proj, int(t)) for t in token_ids}


# ---------------------------------------------------------------------------
# Bundle I/O (tensor names fixed by the export format)

_REQUIRED = {
    "transform.weight": "w",
    "transform.bias": "b",
    "layernorm.gamma": "gamma",
    "layernorm.beta": "beta",
    "decoder.weight": "v",
}


def load_head(base_path) -> MlmHeadParams:
    bundle = read_bundle(base_path, require_finite=True)
    missing = sorted(name for name in _REQUIRED if name not in bundle)
    if missing:
        raise ValidationError(f"{base_path}: head bundle missing tensor(s): {', '.join(missing)}")
    kwargs = {attr: bundle[name].astype(np.float64) for name, attr in _REQUIRED.items()}
    if "decoder.bias" in bundle:
        kwargs["b_out"] = bundle["decoder.bias"].astype(np.float64)
    activation = bundle.metadata.get("activation", "gelu")
    eps = float(bundle.metadata.get("eps", 1e-12))
    return MlmHeadParams(eps=eps, activation=activation, **kwargs)


def save_head(params: MlmHeadParams, base_path) -> None:
    tensors = {
        "transform.weight": params.w.astype(np.float32),
        "transform.bias": params.b.astype(np.float32),
        "layernorm.gamma": params.gamma.astype(np.float32),
        "layernorm.beta": params.beta.astype(np.float32),
        "decoder.weight": params.v.astype(np.float32),
        "decoder.bias": params.b_out.astype(np.float32),
    }
    write_bundle(TensorBundle(tensors, {"activation": params.activation, "eps": params.eps}),
                 base_path)
