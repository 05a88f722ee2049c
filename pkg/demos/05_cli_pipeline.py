# The whole pipeline through the CLI, exactly as you would run it on real
# exports: write a synthetic world to disk, then fit, index, search, analyze,
# sweep lambda, and evaluate, all via subcommands. Every output directory
# gets a manifest.json with input checksums, and reruns are byte-identical.

import json
import subprocess
import sys
import tempfile
from pathlib import Path

from vocablens.datastore import write_corpus, write_embeddings, write_queries
from vocablens.lexical import write_vocab
from vocablens.mlmhead import save_head
from vocablens.retrieval import Judgments, write_qrels
from vocablens.synth import make_amnesia_world


def vocablens(*args):
    cmd = [sys.executable, "-m", "vocablens", *map(str, args)]
    print("$ vocablens " + " ".join(map(str, args[:6])) + (" ..." if len(args) > 6 else ""))
    subprocess.run(cmd, check=True)


root = Path(tempfile.mkdtemp(prefix="vocablens_demo_"))
world = make_amnesia_world()
write_corpus(world.corpus, root / "corpus.jsonl")
write_queries(world.queries, root / "queries.jsonl")
write_vocab(world.vocab, root / "vocab.txt")
save_head(world.head, root / "head")
write_embeddings(world.query_store, root / "qemb")
write_embeddings(world.passage_store, root / "pemb")
write_qrels(Judgments.from_queries(world.queries), root / "qrels.txt")
print(f"workspace: {root}\n")

vocablens("project", "--head", root / "head", "--vocab", root / "vocab.txt",
          "--embeddings", root / "qemb", "--top-k", 10, "--out", root / "proj")
vocablens("enrich-fit", "--head", root / "head", "--seed", 7, "--out", root / "fit")
vocablens("index-bm25", "--corpus", root / "corpus.jsonl", "--mode", "word",
          "--out", root / "bm25")
vocablens("search", "--bm25-index", root / "bm25/bm25_index.json",
          "--queries", root / "queries.jsonl", "--k", 100, "--out", root / "bm25run")
vocablens("search", "--passage-embeddings", root / "pemb",
          "--query-embeddings", root / "qemb", "--k", 100, "--out", root / "denserun")
vocablens("analyze", "--head", root / "head", "--vocab", root / "vocab.txt",
          "--corpus", root / "corpus.jsonl", "--queries", root / "queries.jsonl",
          "--query-embeddings", root / "qemb", "--passage-embeddings", root / "pemb",
          "--dense-run", root / "denserun/run.trec", "--bm25-run", root / "bm25run/run.trec",
          "--out", root / "analysis")
vocablens("sweep", "--head", root / "head", "--vocab", root / "vocab.txt",
          "--enrichment", root / "fit/enrichment",
          "--query-embeddings", root / "qemb", "--passage-embeddings", root / "pemb",
          "--corpus", root / "corpus.jsonl", "--queries", root / "queries.jsonl",
          "--idf-corpus", root / "corpus.jsonl", "--lambda-grid", "0,0.5,2,5",
          "--k", 100, "--select-by", "top@5", "--out", root / "sweep")
vocablens("eval", "--run", root / "denserun/run.trec", "--qrels", root / "qrels.txt",
          "--out", root / "eval_baseline")
vocablens("report", "--run-dir", root)

best = json.loads((root / "sweep/best.json").read_text())
print(f"\nsweep picked lambda = {best['best_lambda']} "
      f"(top-5 accuracy {best['value']:.2f})")
print(f"baseline metrics:  {root}/eval_baseline/metrics.csv")
print(f"analysis reports:  {root}/analysis/")
print(f"full report:       {root}/report.json")
