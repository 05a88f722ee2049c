"""Command-line pipeline: project, analyze, enrich-fit, enrich-apply,
index-bm25, search, eval, sweep, report.

Every command takes an optional JSON config file (--config) whose keys match
the long flag names; explicit flags win. Each command writes its artifacts
plus a manifest.json recording the resolved configuration, its hash, the
seed, and sha256 checksums of every input file, so a run can be reproduced
byte for byte. Outputs carry no timestamps. Exit codes: 0 success, 1
validation error, 2 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis as an
from .datastore import (TensorBundle, load_corpus, load_queries,
                        read_embeddings, write_bundle, write_embeddings)
from .enrichment import (OptimizerConfig, build_enrichment_model, enrich_store,
                         fit_single_token_enrichments, fit_whitening, load_enrichment,
                         save_enrichment)
from .errors import ValidationError
from .lexical import (compute_idf, default_stoplist_path, load_stoplist, load_vocab,
                      read_idf, tokenize, write_idf)
from .mlmhead import load_head, project_store, top_k
from .retrieval import (DenseIndex, Judgments, RunList, bm25_search_all,
                        build_bm25_index, dense_search, load_bm25_index, ndcg_at_10,
                        read_qrels, read_run, run_mrr, save_bm25_index, topk_accuracy,
                        write_run)


def _parse_grid(text, kind=int):
    try:
        return [kind(x) for x in str(text).split(",") if x != ""]
    except ValueError as e:
        raise ValidationError(f"bad grid {text!r}: {e}") from e


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _hash_input(path) -> str:
    """Hash a plain file, or a bundle base (manifest + bin + optional ids)."""
    p = Path(path)
    if p.is_file():
        return _sha256(p)
    parts = []
    for suffix in (".manifest", ".bin", ".ids"):
        q = Path(f"{p}{suffix}")
        if q.is_file():
            parts.append(suffix + ":" + _sha256(q))
    if not parts:
        raise FileNotFoundError(f"no such input file or bundle: {path}")
    return hashlib.sha256("|".join(parts).encode()).hexdigest()


class Cfg:
    """Flag resolution: CLI value, then config-file value, then default."""

    def __init__(self, args: argparse.Namespace):
        self.args = vars(args)
        self.file = {}
        if self.args.get("config"):
            with open(self.args["config"], encoding="utf-8") as f:
                try:
                    self.file = json.load(f)
                except json.JSONDecodeError as e:
                    raise ValidationError(f"bad config file: {e}") from e
        self.resolved: dict = {}

    def get(self, name, default=None, required=False):
        key = name.replace("-", "_")
        if key == "lambda":          # argparse cannot use the keyword as a dest
            key = "lambda_"
        value = self.args.get(key)
        if value is None:
            value = self.file.get(name, self.file.get(key, default))
        if required and value is None:
            raise ValidationError(f"missing required option --{name}")
        self.resolved[name] = value
        return value

    def path(self, name, required=True, bundle=False):
        value = self.get(name, required=required)
        if value is None:
            return None
        p = Path(value)
        if bundle:
            if not Path(f"{p}.manifest").is_file():
                raise ValidationError(f"--{name}: no bundle at {p} (missing {p}.manifest)")
        elif not p.is_file():
            raise ValidationError(f"--{name}: no such file: {p}")
        return p


def _out_dir(cfg: Cfg) -> Path:
    out = Path(cfg.get("out", required=True))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, cfg: Cfg, inputs: dict, outputs: list[str]):
    resolved = {k: (str(v) if isinstance(v, Path) else v) for k, v in cfg.resolved.items()}
    resolved.pop("threads", None)    # worker cap never affects results
    resolved.pop("out", None)        # the manifest's own directory
    blob = json.dumps(resolved, sort_keys=True).encode()
    manifest = {
        "command": command,
        "config": resolved,
        "config_hash": hashlib.sha256(blob).hexdigest(),
        "inputs": {k: {"path": str(v), "sha256": _hash_input(v)} for k, v in inputs.items()},
        "outputs": sorted(outputs),
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_texts(path) -> dict[str, str]:
    """Id -> text from either a corpus or a queries JSONL file."""
    with open(path, encoding="utf-8") as f:
        first = f.readline()
    try:
        fields = set(json.loads(first))
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}:1: malformed line: {e}") from e
    if fields == {"id", "title", "text"}:
        return {r.id: (f"{r.title} {r.text}" if r.title else r.text)
                for r in load_corpus(path)}
    if fields == {"id", "text", "answers", "gold_pids"}:
        return {q.id: q.text for q in load_queries(path)}
    raise ValidationError(f"{path}: neither a corpus nor a queries file (fields {sorted(fields)})")


def _load_judgments(cfg: Cfg) -> tuple[Judgments, dict]:
    inputs = {}
    qrels_path = cfg.path("qrels", required=False)
    if qrels_path is not None:
        inputs["qrels"] = qrels_path
        return read_qrels(qrels_path), inputs
    queries_path = cfg.path("queries", required=False)
    if queries_path is None:
        raise ValidationError("need --qrels or --queries for evaluation")
    inputs["queries"] = queries_path
    return Judgments.from_queries(load_queries(queries_path)), inputs


def _resolve_idf(cfg: Cfg, vocab, inputs: dict, out: Path | None):
    """IDF from an explicit bundle, else computed over --idf-corpus."""
    bundle_path = cfg.get("idf-bundle")
    if bundle_path is not None:
        if not Path(f"{bundle_path}.manifest").is_file():
            raise ValidationError(f"--idf-bundle: no bundle at {bundle_path}")
        inputs["idf-bundle"] = Path(bundle_path)
        return read_idf(bundle_path)
    corpus_path = cfg.path("idf-corpus", required=False)
    if corpus_path is None:
        return None
    inputs["idf-corpus"] = corpus_path
    corpus = load_corpus(corpus_path)
    table = compute_idf(
        (tokenize(vocab, f"{r.title} {r.text}" if r.title else r.text) for r in corpus),
        len(vocab),
    )
    if out is not None:
        write_idf(table, out / "idf")
    return table


# ---------------------------------------------------------------------------
# Subcommands

def cmd_project(cfg: Cfg) -> int:
    head_path = cfg.path("head", bundle=True)
    vocab_path = cfg.path("vocab")
    emb_path = cfg.path("embeddings", bundle=True)
    k = int(cfg.get("top-k", 20))
    logits_out = cfg.get("logits-out")
    out = _out_dir(cfg)

    head = load_head(head_path)
    vocab = load_vocab(vocab_path)
    if len(vocab) != head.vocab_size:
        raise ValidationError(f"vocabulary has {len(vocab)} tokens, head expects {head.vocab_size}")
    if not 1 <= k <= head.vocab_size:
        raise ValidationError(f"--top-k must be in [1, {head.vocab_size}]")
    store = read_embeddings(emb_path)
    projections = project_store(head, store)

    outputs = ["projections.csv"]
    with open(out / "projections.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["id", "rank", "token_id", "token", "prob"])
        for proj in projections:
            for rank, (tid, prob) in enumerate(top_k(proj, k), start=1):
                w.writerow([proj.source_id, rank, tid, vocab.token_of(tid), repr(prob)])
    if logits_out:
        logits = np.stack([p.logits for p in projections]).astype(np.float32)
        write_bundle(TensorBundle({"logits": logits}, {"kind": "logits"}), out / logits_out)
        outputs += [f"{logits_out}.manifest", f"{logits_out}.bin"]
    _write_manifest(out, "project", cfg,
                    {"head": head_path, "vocab": vocab_path, "embeddings": emb_path}, outputs)
    return 0


def cmd_analyze(cfg: Cfg) -> int:
    head_path = cfg.path("head", bundle=True)
    vocab_path = cfg.path("vocab")
    corpus_path = cfg.path("corpus")
    queries_path = cfg.path("queries")
    qemb_path = cfg.path("query-embeddings", bundle=True)
    pemb_path = cfg.path("passage-embeddings", bundle=True)
    stop_path = cfg.get("stoplist", default_stoplist_path())
    dense_run_path = cfg.path("dense-run", required=False)
    bm25_run_path = cfg.path("bm25-run", required=False)
    k_grid = _parse_grid(cfg.get("k-grid", "1,5,20,100"))
    per_pair_mean = bool(cfg.get("per-pair-mean", False))
    out = _out_dir(cfg)
    if sorted(k_grid) != k_grid or any(k < 1 for k in k_grid):
        raise ValidationError("--k-grid must be ascending positive integers")

    head = load_head(head_path)
    vocab = load_vocab(vocab_path)
    if len(vocab) != head.vocab_size:
        raise ValidationError(f"vocabulary has {len(vocab)} tokens, head expects {head.vocab_size}")
    stop_ids = load_stoplist(vocab, stop_path)
    corpus = load_corpus(corpus_path)
    queries = load_queries(queries_path)
    if not queries:
        raise ValidationError(f"{queries_path}: no queries")
    pairs = an.build_pair_contexts(queries, corpus, read_embeddings(qemb_path),
                                   read_embeddings(pemb_path), head, vocab, stop_ids)
    if not pairs:
        raise ValidationError("no (query, gold passage) pairs: queries carry no gold_pids")

    coverage = an.shared_token_coverage(pairs, k_grid, per_pair_mean)
    an.write_coverage_csv(coverage, out / "coverage.csv")
    mrr_rows = []
    for target in ("P", "Q"):
        for selector in an.SELECTORS:
            value, n = an.token_level_mrr(pairs, selector, target)
            mrr_rows.append((selector, target, value, n))
    an.write_mrr_csv(mrr_rows, out / "mrr.csv")
    expansion = an.query_expansion_stats(pairs, k_grid, vocab, stop_ids)
    an.write_expansion_csv(expansion, out / "expansion.csv")
    categories = [an.category_breakdown(pairs, k, vocab, stop_ids, target)
                  for target in ("Q", "P") for k in k_grid]
    an.write_categories_csv(categories, out / "categories.csv")
    outputs = ["coverage.csv", "mrr.csv", "expansion.csv", "categories.csv", "summary.json"]

    inputs = {"head": head_path, "vocab": vocab_path, "corpus": corpus_path,
              "queries": queries_path, "query-embeddings": qemb_path,
              "passage-embeddings": pemb_path, "stoplist": Path(stop_path)}
    summary = {
        "n_pairs": len(pairs),
        "n_shared_tokens": coverage.n_shared_tokens,
        "coverage": {str(k): {"q": coverage.coverage_q[i], "p": coverage.coverage_p[i]}
                     for i, k in enumerate(k_grid)},
        "mrr": {f"{sel}->{tgt}": val for sel, tgt, val, _ in mrr_rows},
        "expansion": {str(k): {"pct_pairs": expansion.pct_pairs_with_expansion[i],
                               "token_fraction": expansion.expansion_token_fraction[i]}
                      for i, k in enumerate(k_grid)},
    }
    if dense_run_path is not None and bm25_run_path is not None:
        inputs["dense-run"] = dense_run_path
        inputs["bm25-run"] = bm25_run_path
        profile = an.amnesia_profile(pairs, read_run(dense_run_path), read_run(bm25_run_path))
        an.write_amnesia_csv(profile, out / "amnesia.csv")
        an.write_amnesia_pairs_csv(profile, out / "amnesia_pairs.csv")
        outputs += ["amnesia.csv", "amnesia_pairs.csv"]
        summary["amnesia"] = {"n_records": len(profile.records),
                              "n_skipped_no_shared": profile.n_skipped_no_shared,
                              "buckets": profile.bucket_summary}
    else:
        print("notice: amnesia report skipped (needs both --dense-run and --bm25-run)")
    with open(out / "summary.json", "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    _write_manifest(out, "analyze", cfg, inputs, outputs)
    return 0


def cmd_enrich_fit(cfg: Cfg) -> int:
    head_path = cfg.path("head", bundle=True)
    opt = OptimizerConfig(
        lr=float(cfg.get("lr", 0.01)),
        loss_threshold=float(cfg.get("loss-threshold", 0.1)),
        max_steps=int(cfg.get("max-steps", 2000)),
        seed=int(cfg.get("seed", 0)),
    )
    threads = int(cfg.get("threads", 1))
    out = _out_dir(cfg)

    head = load_head(head_path)
    table = fit_single_token_enrichments(head, opt, threads=threads)
    converged_rows = table.s[table.converged]
    whitening = None
    if int(table.converged.sum()) >= head.dim + 1:
        whitening = fit_whitening(converged_rows)
    else:
        print(f"notice: only {int(table.converged.sum())} converged rows "
              f"(< dim+1 = {head.dim + 1}); whitening parameters not fit")
    save_enrichment(table, whitening, out / "enrichment", {
        "lr": opt.lr, "loss_threshold": opt.loss_threshold,
        "max_steps": opt.max_steps, "seed": opt.seed,
        "head_sha256": _hash_input(head_path),
    })
    report = {
        "n_tokens": head.vocab_size,
        "n_converged": int(table.converged.sum()),
        "unconverged_token_ids": table.unconverged_ids,
        "max_converged_loss": float(table.losses[table.converged].max())
        if table.converged.any() else None,
        "whitening_fit": whitening is not None,
    }
    with open(out / "fit_report.json", "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    _write_manifest(out, "enrich-fit", cfg, {"head": head_path},
                    ["enrichment.manifest", "enrichment.bin", "fit_report.json"])
    return 0


def _build_model_from_cfg(cfg: Cfg, inputs: dict, out: Path | None, lam: float):
    head_path = cfg.path("head", bundle=True)
    vocab_path = cfg.path("vocab")
    enr_path = cfg.path("enrichment", bundle=True)
    inputs.update({"head": head_path, "vocab": vocab_path, "enrichment": enr_path})
    head = load_head(head_path)
    vocab = load_vocab(vocab_path)
    if len(vocab) != head.vocab_size:
        raise ValidationError(f"vocabulary has {len(vocab)} tokens, head expects {head.vocab_size}")
    table, whitening = load_enrichment(enr_path)
    use_idf = not bool(cfg.get("no-idf", False))
    idf = _resolve_idf(cfg, vocab, inputs, out) if use_idf else None
    if use_idf and idf is None:
        raise ValidationError("need --idf-bundle or --idf-corpus (or pass --no-idf)")
    model = build_enrichment_model(
        table, vocab, lam, idf=idf, whitening=whitening, head=head,
        use_idf=use_idf,
        use_whitening=not bool(cfg.get("no-whitening", False)),
        use_l2_norm=not bool(cfg.get("no-l2", False)),
        use_embedding_matrix=bool(cfg.get("use-embedding-matrix", False)),
        unique_tokens=bool(cfg.get("unique-tokens", False)),
    )
    return model


def cmd_enrich_apply(cfg: Cfg) -> int:
    emb_path = cfg.path("embeddings", bundle=True)
    texts_path = cfg.path("texts")
    lam = float(cfg.get("lambda", required=True))
    name = cfg.get("name", "enriched")
    out = _out_dir(cfg)
    inputs = {"embeddings": emb_path, "texts": texts_path}
    model = _build_model_from_cfg(cfg, inputs, out, lam)
    store = read_embeddings(emb_path)
    enriched = enrich_store(model, store, _load_texts(texts_path))
    write_embeddings(enriched, out / name)
    _write_manifest(out, "enrich-apply", cfg, inputs,
                    [f"{name}.manifest", f"{name}.bin", f"{name}.ids"])
    return 0


def cmd_index_bm25(cfg: Cfg) -> int:
    corpus_path = cfg.path("corpus")
    mode = cfg.get("mode", "word")
    out = _out_dir(cfg)
    inputs = {"corpus": corpus_path}
    vocab = None
    if mode == "wordpiece":
        vocab_path = cfg.path("vocab")
        inputs["vocab"] = vocab_path
        vocab = load_vocab(vocab_path)
    index = build_bm25_index(load_corpus(corpus_path), mode, vocab,
                             k1=float(cfg.get("k1", 0.9)), b=float(cfg.get("b", 0.4)))
    save_bm25_index(index, out / "bm25_index.json")
    _write_manifest(out, "index-bm25", cfg, inputs, ["bm25_index.json"])
    return 0


def cmd_search(cfg: Cfg) -> int:
    k = int(cfg.get("k", 100))
    threads = int(cfg.get("threads", 1))
    out = _out_dir(cfg)
    bm25_path = cfg.path("bm25-index", required=False)
    if bm25_path is not None:
        queries_path = cfg.path("queries")
        inputs = {"bm25-index": bm25_path, "queries": queries_path}
        vocab = None
        vocab_path = cfg.path("vocab", required=False)
        if vocab_path is not None:
            inputs["vocab"] = vocab_path
            vocab = load_vocab(vocab_path)
        index = load_bm25_index(bm25_path, vocab)
        run = bm25_search_all(index, load_queries(queries_path), k, threads=threads)
    else:
        pemb_path = cfg.path("passage-embeddings", bundle=True)
        qemb_path = cfg.path("query-embeddings", bundle=True)
        inputs = {"passage-embeddings": pemb_path, "query-embeddings": qemb_path}
        run = dense_search(DenseIndex(read_embeddings(pemb_path)),
                           read_embeddings(qemb_path), k, threads=threads)
    write_run(run, out / "run.trec", tag=cfg.get("tag", "vocablens"))
    _write_manifest(out, "search", cfg, inputs, ["run.trec"])
    return 0


def _eval_metrics(cfg: Cfg, run: RunList, judgments: Judgments,
                  corpus_texts: dict[str, str] | None, k_grid: list[int]):
    mode = cfg.get("mode", "auto")
    acc = topk_accuracy(run, judgments, k_grid, corpus_texts, mode)
    rows = [("accuracy_mode", "", acc.mode, acc.n_queries)]
    for k in k_grid:
        rows.append(("top_accuracy", k, acc.fractions[k], acc.n_queries))
    if acc.mode == "gold":
        rows.append(("mrr", "", run_mrr(run, judgments), acc.n_queries))
        ndcg = ndcg_at_10(run, judgments)
        rows.append(("ndcg", 10, ndcg.value, ndcg.n_evaluated))
        if ndcg.n_excluded:
            rows.append(("ndcg_excluded_queries", "", ndcg.n_excluded, acc.n_queries))
    return rows, acc


def cmd_eval(cfg: Cfg) -> int:
    run_path = cfg.path("run")
    k_grid = _parse_grid(cfg.get("k-grid", "1,5,20,100"))
    out = _out_dir(cfg)
    judgments, inputs = _load_judgments(cfg)
    inputs["run"] = run_path
    corpus_texts = None
    corpus_path = cfg.path("corpus", required=False)
    if corpus_path is not None:
        inputs["corpus"] = corpus_path
        corpus_texts = {r.id: (f"{r.title} {r.text}" if r.title else r.text)
                        for r in load_corpus(corpus_path)}
    rows, _ = _eval_metrics(cfg, read_run(run_path), judgments, corpus_texts, k_grid)
    with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["metric", "k", "value", "n_queries"])
        for metric, k, value, n in rows:
            w.writerow([metric, k, repr(value) if isinstance(value, float) else value, n])
    _write_manifest(out, "eval", cfg, inputs, ["metrics.csv"])
    return 0


def _parse_select_by(text: str, k_grid: list[int]):
    if text == "mrr":
        return ("mrr", "")
    if "@" in text:
        name, k = text.split("@", 1)
        k = int(k)
        if name == "top":
            if k not in k_grid:
                raise ValidationError(f"--select-by top@{k} needs {k} in --k-grid")
            return ("top_accuracy", k)
        if name == "ndcg" and k == 10:
            return ("ndcg", 10)
    raise ValidationError(f"--select-by must be top@K, ndcg@10 or mrr, got {text!r}")


def cmd_sweep(cfg: Cfg) -> int:
    emb_q_path = cfg.path("query-embeddings", bundle=True)
    emb_p_path = cfg.path("passage-embeddings", bundle=True)
    query_texts_path = cfg.path("query-texts", required=False) or cfg.path("queries")
    passage_texts_path = cfg.path("corpus")
    lam_grid = _parse_grid(cfg.get("lambda-grid", required=True), float)
    k = int(cfg.get("k", 100))
    k_grid = _parse_grid(cfg.get("k-grid", "1,5,20,100"))
    threads = int(cfg.get("threads", 1))
    out = _out_dir(cfg)
    select_metric, select_k = _parse_select_by(cfg.get("select-by", "top@5" if 5 in k_grid
                                                       else f"top@{k_grid[0]}"), k_grid)

    judgments, inputs = _load_judgments(cfg)
    inputs.update({"query-embeddings": emb_q_path, "passage-embeddings": emb_p_path,
                   "corpus": passage_texts_path})
    corpus_texts = {r.id: (f"{r.title} {r.text}" if r.title else r.text)
                    for r in load_corpus(passage_texts_path)}
    query_texts = _load_texts(query_texts_path)
    q_store = read_embeddings(emb_q_path)
    p_store = read_embeddings(emb_p_path)

    (out / "runs").mkdir(exist_ok=True)
    all_rows = []
    scoreboard = []
    outputs = ["sweep.csv", "best.json"]
    base_model = _build_model_from_cfg(cfg, inputs, out, lam_grid[0])
    for lam in lam_grid:
        model = replace(base_model, lam=float(lam))
        run = dense_search(DenseIndex(enrich_store(model, p_store, corpus_texts)),
                           enrich_store(model, q_store, query_texts), k, threads=threads)
        run_name = f"runs/lambda_{lam:g}.trec"
        write_run(run, out / run_name)
        outputs.append(run_name)
        rows, _ = _eval_metrics(cfg, run, judgments, corpus_texts, k_grid)
        for metric, mk, value, n in rows:
            all_rows.append((lam, metric, mk, value, n))
            if (metric, mk) == (select_metric, select_k):
                scoreboard.append((lam, float(value)))
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["lambda", "metric", "k", "value", "n_queries"])
        for lam, metric, mk, value, n in all_rows:
            w.writerow([repr(float(lam)), metric, mk,
                        repr(value) if isinstance(value, float) else value, n])
    if not scoreboard:
        raise ValidationError(
            f"--select-by metric {select_metric}@{select_k} unavailable for this judgment mode"
        )
    best_value = max(v for _, v in scoreboard)
    best_lambda = min(lam for lam, v in scoreboard if v == best_value)
    with open(out / "best.json", "w", encoding="utf-8") as f:
        json.dump({"select_by": f"{select_metric}@{select_k}" if select_k != "" else select_metric,
                   "best_lambda": best_lambda, "value": best_value,
                   "scoreboard": [[lam, v] for lam, v in scoreboard]},
                  f, indent=2, sort_keys=True)
        f.write("\n")
    _write_manifest(out, "sweep", cfg, inputs, outputs)
    return 0


def cmd_report(cfg: Cfg) -> int:
    run_dir = Path(cfg.get("run-dir", required=True))
    if not run_dir.is_dir():
        raise ValidationError(f"--run-dir: no such directory: {run_dir}")
    out_file = cfg.get("out", str(run_dir / "report.json"))
    report: dict = {"run_dir": str(run_dir), "commands": [], "tables": {}}
    for manifest in sorted(run_dir.rglob("manifest.json")):
        with open(manifest, encoding="utf-8") as f:
            m = json.load(f)
        report["commands"].append({
            "dir": str(manifest.parent.relative_to(run_dir)),
            "command": m.get("command"),
            "config_hash": m.get("config_hash"),
            "outputs": m.get("outputs", []),
        })
    for csv_path in sorted(run_dir.rglob("*.csv")):
        with open(csv_path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        report["tables"][str(csv_path.relative_to(run_dir))] = {
            "header": rows[0] if rows else [],
            "rows": rows[1:],
        }
    with open(out_file, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    for entry in report["commands"]:
        print(f"{entry['dir'] or '.'}: {entry['command']} -> {', '.join(entry['outputs'])}")
    print(f"report written to {out_file}")
    return 0


# ---------------------------------------------------------------------------
# Parser

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="seed for all randomness (default 0)")
    p.add_argument("--threads", type=int, help="worker cap; outputs do not depend on it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vocablens",
        description="Project dense-retrieval embeddings into vocabulary space, "
                    "analyze them, and enrich them with lexical information.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="dump top-k projected tokens per embedding")
    _add_common(p)
    p.add_argument("--head", help="head tensor-bundle base path")
    p.add_argument("--vocab", help="vocabulary file (one token per line)")
    p.add_argument("--embeddings", help="embedding bundle base path")
    p.add_argument("--top-k", type=int, help="tokens per embedding (default 20)")
    p.add_argument("--logits-out", help="also write raw logits as a bundle with this base name")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("analyze", help="coverage / MRR / expansion / categories / amnesia reports")
    _add_common(p)
    p.add_argument("--head", help="head tensor-bundle base path")
    p.add_argument("--vocab", help="vocabulary file")
    p.add_argument("--stoplist", help="stop-word file (default: packaged English list)")
    p.add_argument("--corpus", help="corpus JSONL")
    p.add_argument("--queries", help="queries JSONL with gold_pids")
    p.add_argument("--query-embeddings", help="query embedding bundle")
    p.add_argument("--passage-embeddings", help="passage embedding bundle")
    p.add_argument("--dense-run", help="TREC run from dense search (for the amnesia report)")
    p.add_argument("--bm25-run", help="TREC run from BM25 (for the amnesia report)")
    p.add_argument("--k-grid", help="ascending cutoffs, e.g. 1,5,20,100")
    p.add_argument("--per-pair-mean", action="store_const", const=True,
                   help="average per-pair coverage instead of pooling shared tokens")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("enrich-fit", help="fit single-token enrichments through the head")
    _add_common(p)
    p.add_argument("--head", help="head tensor-bundle base path")
    p.add_argument("--lr", type=float, help="Adam learning rate (default 0.01)")
    p.add_argument("--loss-threshold", type=float, help="stop at this cross-entropy (default 0.1)")
    p.add_argument("--max-steps", type=int, help="per-token step cap (default 2000)")
    p.set_defaults(func=cmd_enrich_fit)

    p = sub.add_parser("enrich-apply", help="mix lexical vectors into an embedding store")
    _add_common(p)
    p.add_argument("--head", help="head tensor-bundle base path")
    p.add_argument("--vocab", help="vocabulary file")
    p.add_argument("--enrichment", help="fitted enrichment bundle base path")
    p.add_argument("--embeddings", help="embedding bundle to enrich")
    p.add_argument("--texts", help="corpus or queries JSONL supplying each id's text")
    p.add_argument("--idf-bundle", help="precomputed IDF bundle base path")
    p.add_argument("--idf-corpus", help="corpus JSONL to compute IDF from")
    p.add_argument("--lambda", dest="lambda_", help="mixing weight")
    p.add_argument("--name", help="output bundle base name (default enriched)")
    for flag, help_text in (
        ("--no-idf", "uniform token weights"),
        ("--no-whitening", "use raw enrichment rows"),
        ("--no-l2", "skip lexical-vector normalization"),
        ("--use-embedding-matrix", "substitute the head's static token embeddings"),
        ("--unique-tokens", "sum over unique tokens instead of occurrences"),
    ):
        p.add_argument(flag, action="store_const", const=True, help=help_text)
    p.set_defaults(func=cmd_enrich_apply)

    p = sub.add_parser("index-bm25", help="build a BM25 inverted index")
    _add_common(p)
    p.add_argument("--corpus", help="corpus JSONL")
    p.add_argument("--vocab", help="vocabulary file (wordpiece mode only)")
    p.add_argument("--mode", choices=["word", "wordpiece"], help="term units (default word)")
    p.add_argument("--k1", type=float, help="BM25 k1 (default 0.9)")
    p.add_argument("--b", type=float, help="BM25 b (default 0.4)")
    p.set_defaults(func=cmd_index_bm25)

    p = sub.add_parser("search", help="exact dense search, or BM25 with --bm25-index")
    _add_common(p)
    p.add_argument("--passage-embeddings", help="passage embedding bundle (dense mode)")
    p.add_argument("--query-embeddings", help="query embedding bundle (dense mode)")
    p.add_argument("--bm25-index", help="bm25_index.json (switches to BM25 mode)")
    p.add_argument("--queries", help="queries JSONL (BM25 mode)")
    p.add_argument("--vocab", help="vocabulary file (wordpiece BM25 index)")
    p.add_argument("--k", type=int, help="results per query (default 100)")
    p.add_argument("--tag", help="run tag in the TREC output")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="top-k accuracy / MRR / nDCG@10 for a run file")
    _add_common(p)
    p.add_argument("--run", help="TREC run file")
    p.add_argument("--qrels", help="TREC qrels file")
    p.add_argument("--queries", help="queries JSONL with gold_pids/answers (alternative to --qrels)")
    p.add_argument("--corpus", help="corpus JSONL, needed for answer-containment accuracy")
    p.add_argument("--k-grid", help="ascending cutoffs, e.g. 1,5,20,100")
    p.add_argument("--mode", choices=["auto", "gold", "answer"],
                   help="hit definition (default auto)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid-search lambda end to end (enrich + search + eval)")
    _add_common(p)
    p.add_argument("--head", help="head tensor-bundle base path")
    p.add_argument("--vocab", help="vocabulary file")
    p.add_argument("--enrichment", help="fitted enrichment bundle base path")
    p.add_argument("--query-embeddings", help="query embedding bundle")
    p.add_argument("--passage-embeddings", help="passage embedding bundle")
    p.add_argument("--corpus", help="corpus JSONL (passage texts + judgments)")
    p.add_argument("--queries", help="queries JSONL (texts + judgments)")
    p.add_argument("--qrels", help="TREC qrels (overrides gold_pids from --queries)")
    p.add_argument("--query-texts", help="texts for query enrichment (default: --queries)")
    p.add_argument("--idf-bundle", help="precomputed IDF bundle base path")
    p.add_argument("--idf-corpus", help="corpus JSONL to compute IDF from")
    p.add_argument("--lambda-grid", help="comma-separated lambda values")
    p.add_argument("--k", type=int, help="results per query (default 100)")
    p.add_argument("--k-grid", help="ascending accuracy cutoffs")
    p.add_argument("--select-by", help="top@K, ndcg@10 or mrr (default top@5)")
    p.add_argument("--mode", choices=["auto", "gold", "answer"],
                   help="hit definition (default auto)")
    for flag, help_text in (
        ("--no-idf", "uniform token weights"),
        ("--no-whitening", "use raw enrichment rows"),
        ("--no-l2", "skip lexical-vector normalization"),
        ("--use-embedding-matrix", "substitute the head's static token embeddings"),
        ("--unique-tokens", "sum over unique tokens instead of occurrences"),
    ):
        p.add_argument(flag, action="store_const", const=True, help=help_text)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="aggregate a run directory into one JSON report")
    _add_common(p)
    p.add_argument("--run-dir", help="directory containing command outputs to aggregate")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = Cfg(args)
        return args.func(cfg)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
