# The interpretability suite over (query, gold passage) pairs:
# where do the top projected tokens come from, how well are shared tokens
# covered, token-level MRR per token subset, query-expansion frequency, and
# the token-amnesia profile that ties bad token ranks to retrieval failures.

from vocablens.analysis import (amnesia_profile, build_pair_contexts,
                                category_breakdown, query_expansion_stats,
                                shared_token_coverage, token_level_mrr)
from vocablens.retrieval import DenseIndex, bm25_search_all, build_bm25_index, dense_search
from vocablens.synth import make_amnesia_world

world = make_amnesia_world()
pairs = build_pair_contexts(world.queries, world.corpus, world.query_store,
                            world.passage_store, world.head, world.vocab,
                            world.stop_ids)
print(f"{len(pairs)} (query, gold passage) pairs; "
      f"passage encoder drops the token '{world.dropped_token}'")

# --- shared-token coverage ---------------------------------------------------
grid = [1, 5, 20, 100]
cov = shared_token_coverage(pairs, grid)
print(f"\nshared tokens pooled over pairs: {cov.n_shared_tokens}")
for i, k in enumerate(grid):
    print(f"  top-{k:<3d} covers {cov.coverage_q[i]:5.1%} in Q, {cov.coverage_p[i]:5.1%} in P")

# --- token-level MRR ---------------------------------------------------------
print("\ntoken-level MRR in P by token subset:")
for selector in ("passage", "query", "shared", "query_only"):
    value, n = token_level_mrr(pairs, selector, "P")
    shown = f"{value:.3f}" if value is not None else "n/a"
    print(f"  {selector:<11s} {shown}  ({n} pairs)")

# --- top-k categorization and query expansion --------------------------------
rep = category_breakdown(pairs, 5, world.vocab, world.stop_ids, "Q")
print("\ntop-5 content tokens of Q come from:")
for name, frac in rep.fractions.items():
    print(f"  {name:<8s} {frac:5.1%}")
exp = query_expansion_stats(pairs, [5], world.vocab, world.stop_ids)
print(f"pairs with an expansion token in Q's top-5: {exp.pct_pairs_with_expansion[0]:.1%}")

# --- token amnesia -----------------------------------------------------------
# Queries BM25 solves easily but the dense model does not tend to have a
# shared token buried deep in the passage projection.
dense_run = dense_search(DenseIndex(world.passage_store), world.query_store, 100)
bm25_run = bm25_search_all(build_bm25_index(world.corpus), world.queries, 100)
profile = amnesia_profile(pairs, dense_run, bm25_run)
print("\nmax shared-token rank in P by dense-retrieval bucket:")
for bucket, stats in profile.bucket_summary.items():
    print(f"  dense rank {bucket:<6s} n={stats['n']:<3d} "
          f"median max rank = {stats['median_max_rank_p']:.0f}")
