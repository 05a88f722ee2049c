# Project dense embeddings into vocabulary space through an MLM head.
#
# The head maps a d-vector to a distribution over the vocabulary:
# dense transform -> GELU -> LayerNorm -> dot with every token embedding
# -> softmax. Any embedding that lives in the encoder's output space can be
# pushed through it, and the resulting token ranking is readable.

import numpy as np

from vocablens import Vocabulary, mlm_forward, mlm_backward, rank_of, top_k
from vocablens.synth import make_synthetic_head

vocab = Vocabulary(
    ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    + ["lake", "river", "ocean", "water", "north", "border", "music", "soul",
       "label", "record", "song", "duet", "love", "blues", "jazz"]
)
head = make_synthetic_head(len(vocab), 16, seed=3)

# --- a single projection ---------------------------------------------------
rng = np.random.default_rng(0)
h = rng.standard_normal(16)
proj = mlm_forward(head, h)
print(f"probabilities sum to {proj.probs.sum():.9f} over {proj.vocab_size} tokens")
print("top-5 tokens for a random embedding:")
for rank, (tid, prob) in enumerate(top_k(proj, 5), start=1):
    print(f"  {rank}. {vocab.token_of(tid):8s} p={prob:.4f}")

# --- steering an embedding toward a token ----------------------------------
# The analytic gradient of -log p[token] w.r.t. the input lets us push an
# embedding until the head decodes the token we want.
target = vocab.id_of("river")
x = h.copy()
for step in range(400):
    x -= 0.05 * mlm_backward(head, x, target)
proj_after = mlm_forward(head, x)
print(f"\nafter gradient steps toward 'river':")
print(f"  rank of 'river': {rank_of(proj, target)} -> {rank_of(proj_after, target)}")
print(f"  p('river'):      {proj.probs[target]:.4f} -> {proj_after.probs[target]:.4f}")

# --- rank queries are consistent with the full ordering ---------------------
full_order = [tid for tid, _ in top_k(proj, len(vocab))]
assert all(rank_of(proj, tid) == i for i, tid in enumerate(full_order, start=1))
print("\nrank_of agrees with the full top-k ordering for every token")
