"""File-level pipeline stages: each consumes and produces declared
artifacts under the run output directory, writes a manifest with content
hashes, and is deterministic given (config, seed)."""

from __future__ import annotations

import copy
import json
import time
from pathlib import Path

import numpy as np

from .checkpoints import load_checkpoint, save_checkpoint
from .config import RunConfig
from .contrastive import StyleEncoder
from .corpus import (Corpus, generate_corpus, load_corpus, save_corpus,
                     split_cross_topic)
from .errors import ConfigError, NotFoundError
from .evaluation import (DetectionScores, MetricsReport, aggregate_author,
                         author_rankings, detect_multi_target,
                         detect_single_target, mrr, pauc, recall_at_k,
                         write_detection_report, write_metrics_report,
                         write_scores_csv)
from .generator import default_templates, save_templates
from .kmeans import kmeans
from .mining import (load_pairs, mine_hard_pairs, save_pairs,
                     synth_explanations, tfidf_embeddings)
from .nn import assign_params
from .training import (VARIANT_EAVAE, VARIANT_SINGLE, finetune,
                       pretrain_style, write_training_log)
from .util import sha256_file, write_json_atomic
from .vae import GaussianEncoder


def artifact_paths(out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    return {
        "corpus": out / "corpus.jsonl",
        "pairs": out / "pairs.jsonl",
        "templates": out / "templates.json",
        "ckpt_pretrain": out / "ckpt_pretrain.json",
        "ckpt_eavae": out / "ckpt_eavae.json",
        "ckpt_single": out / "ckpt_single.json",
        "log_pretrain": out / "log_pretrain.csv",
        "log_eavae": out / "log_finetune_eavae.csv",
        "log_single": out / "log_finetune_single.csv",
        "config_echo": out / "resolved_config.json",
    }


def _manifest(out_dir, command: str, cfg: RunConfig, inputs: list[Path],
              outputs: list[Path], started: float) -> dict:
    manifest = {
        "command": command,
        "config_hash": cfg.config_hash(),
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {str(p): sha256_file(p) for p in outputs},
        "wall_seconds": time.monotonic() - started,
    }
    write_json_atomic(Path(out_dir) / f"manifest_{command}.json", manifest)
    write_json_atomic(artifact_paths(out_dir)["config_echo"],
                      {"config_hash": cfg.config_hash(), "config": cfg.to_dict()})
    return manifest


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise NotFoundError(f"{what} not found: {path} (run the upstream "
                            f"command first)")
    return path


def run_gen_corpus(cfg: RunConfig, out_dir) -> dict:
    started = time.monotonic()
    p = artifact_paths(out_dir)
    cc = cfg.corpus
    corpus = generate_corpus(cfg.seed, cc.n_authors, cc.n_topics,
                             cc.docs_per_author, cc.style_strength,
                             cc.topic_strength, topic_skew=cc.topic_skew,
                             min_tokens=cc.min_tokens,
                             max_tokens=cc.max_tokens,
                             balance_floor=cc.balance_floor,
                             balance_cap=cc.balance_cap)
    save_corpus(corpus, p["corpus"])
    save_templates(default_templates(corpus.tokenizer), p["templates"])
    if cc.n_authors == 1:
        print("warning: single-author corpus; different-author pair mining "
              "will come up empty")
    print(f"wrote {len(corpus.documents)} documents "
          f"({cc.n_authors} authors x {cc.n_topics} topics)")
    return _manifest(out_dir, "gen-corpus", cfg, [],
                     [p["corpus"], p["templates"]], started)


def _load_corpus_for(cfg: RunConfig, out_dir) -> Corpus:
    p = artifact_paths(out_dir)
    return load_corpus(_require(p["corpus"], "corpus file"))


def run_mine(cfg: RunConfig, out_dir) -> dict:
    started = time.monotonic()
    p = artifact_paths(out_dir)
    corpus = _load_corpus_for(cfg, out_dir)
    train_ids, _ = split_cross_topic(corpus)
    result = mine_training_pairs(corpus, train_ids, cfg)
    pairs = [synth_explanations(pr, corpus) for pr in result.pairs]
    save_pairs(pairs, p["pairs"])
    if result.warning_count:
        print(f"warning: mining quota unreachable "
              f"(short {result.shortfall_same_author} same-author, "
              f"{result.shortfall_diff_author} different-author)")
    print(f"mined {len(pairs)} pairs (quota {result.quota} per family)")
    return _manifest(out_dir, "mine", cfg, [p["corpus"]], [p["pairs"]], started)


def mine_training_pairs(corpus: Corpus, pool_ids: list[int], cfg: RunConfig):
    """Cluster the pool's content embeddings and mine both pair families,
    restricted to pool documents only."""
    rows = np.array(sorted(set(pool_ids)), dtype=np.int64)
    emb = tfidf_embeddings(corpus)
    k = min(cfg.mining.n_clusters, len(rows))
    km = kmeans(emb[rows], k, seed=cfg.seed)
    assignments = np.full(len(corpus.documents), -1, dtype=np.int64)
    assignments[rows] = km.labels
    return mine_hard_pairs(corpus, emb, assignments, cfg.mining.quota,
                           theta_lo=cfg.mining.theta_lo,
                           theta_hi=cfg.mining.theta_hi,
                           doc_ids=[int(r) for r in rows])


def run_pretrain(cfg: RunConfig, out_dir) -> dict:
    started = time.monotonic()
    p = artifact_paths(out_dir)
    corpus = _load_corpus_for(cfg, out_dir)
    train_ids, _ = split_cross_topic(corpus)
    encoder, rows = pretrain_style(corpus, train_ids, cfg.pretrain, cfg.seed,
                                   cfg.max_positions())
    meta = {
        "hidden": cfg.pretrain.hidden,
        "n_layers": cfg.pretrain.n_layers,
        "out_dim": cfg.pretrain.out_dim,
        "max_positions": cfg.max_positions(),
        "vocab_size": corpus.tokenizer.vocab_size,
        "tau": cfg.pretrain.tau,
        "lr": cfg.pretrain.lr,
        "seed": cfg.seed,
    }
    save_checkpoint(p["ckpt_pretrain"], encoder.params(), "contrastive", meta)
    write_training_log(rows, p["log_pretrain"])
    print(f"pretrained {len(rows)} steps; final loss {rows[-1].loss:.4f}")
    return _manifest(out_dir, "pretrain", cfg, [p["corpus"]],
                     [p["ckpt_pretrain"], p["log_pretrain"]], started)


def run_finetune(cfg: RunConfig, out_dir, variant: str | None = None) -> dict:
    started = time.monotonic()
    p = artifact_paths(out_dir)
    variant = variant or cfg.finetune.variant
    if variant not in (VARIANT_EAVAE, VARIANT_SINGLE):
        raise ConfigError(f"unknown finetune variant {variant!r}")
    corpus = _load_corpus_for(cfg, out_dir)
    pairs = load_pairs(_require(p["pairs"], "mined pairs file"))
    contrastive_arrays = None
    inputs = [p["corpus"], p["pairs"]]
    if cfg.finetune.warm_start:
        arrays, kind, _ = load_checkpoint(
            _require(p["ckpt_pretrain"], "pretrained checkpoint"))
        if kind != "contrastive":
            raise ConfigError(f"expected a contrastive checkpoint, got {kind!r}")
        contrastive_arrays = arrays
        inputs.append(p["ckpt_pretrain"])
    model, rows = finetune(corpus, pairs, cfg.finetune, cfg.seed, variant,
                           cfg.max_positions(),
                           contrastive_arrays=contrastive_arrays)
    meta = {
        "hidden": cfg.finetune.hidden,
        "n_layers": cfg.finetune.n_layers,
        "style_dim": cfg.finetune.style_dim,
        "content_dim": cfg.finetune.content_dim,
        "gen_embed_dim": cfg.finetune.gen_embed_dim,
        "gen_layers": cfg.finetune.gen_layers,
        "max_positions": cfg.max_positions(),
        "vocab_size": corpus.tokenizer.vocab_size,
        "beta_s": cfg.finetune.beta_s,
        "beta_c": cfg.finetune.beta_c,
        "lambda_dis": cfg.finetune.lambda_dis,
        "lr": cfg.finetune.lr,
        "seed": cfg.seed,
        "variant": variant,
    }
    kind = "eavae" if variant == VARIANT_EAVAE else "single_vae"
    ckpt = p["ckpt_eavae"] if variant == VARIANT_EAVAE else p["ckpt_single"]
    log = p["log_eavae"] if variant == VARIANT_EAVAE else p["log_single"]
    save_checkpoint(ckpt, model.params(), kind, meta)
    write_training_log(rows, log)
    print(f"finetuned ({variant}) {len(rows)} steps; "
          f"final loss {rows[-1].loss:.4f}")
    return _manifest(out_dir, f"finetune-{variant}", cfg, inputs,
                     [ckpt, log], started)


def style_embedder(ckpt_path, vocab_size: int):
    """Rebuild the style embedding function from any checkpoint kind."""
    arrays, kind, meta = load_checkpoint(ckpt_path)
    if meta.get("vocab_size") not in (None, vocab_size):
        raise ConfigError(f"checkpoint vocab {meta.get('vocab_size')} does "
                          f"not match corpus vocab {vocab_size}")
    rng = np.random.default_rng(0)
    if kind == "contrastive":
        enc = StyleEncoder(rng, vocab_size, hidden=meta["hidden"],
                           n_layers=meta["n_layers"], out_dim=meta["out_dim"],
                           max_positions=meta["max_positions"])
        assign_params(enc.params(), arrays)
        return enc.encode_vector, kind
    if kind in ("eavae", "single_vae"):
        enc = GaussianEncoder(rng, vocab_size, hidden=meta["hidden"],
                              n_layers=meta["n_layers"],
                              latent_dim=meta["style_dim"],
                              max_positions=meta["max_positions"])
        assign_params(enc.params("style"), arrays)
        return enc.mu_vector, kind
    raise ConfigError(f"unknown checkpoint kind {kind!r}")


def _checkpoint_for(cfg: RunConfig, out_dir, which: str | None) -> Path:
    p = artifact_paths(out_dir)
    name = which or ("eavae" if cfg.finetune.variant == VARIANT_EAVAE
                     else "single")
    key = f"ckpt_{name.replace('ckpt_', '')}"
    if key not in p:
        raise ConfigError(f"unknown checkpoint selector {which!r} "
                          f"(expected pretrain, eavae, or single)")
    return _require(p[key], "checkpoint")


def evaluate_attribution(corpus: Corpus, embed, query_ids: list[int],
                         reference_ids: list[int],
                         recall_k: int) -> MetricsReport:
    """Rank aggregated per-author reference embeddings for each query."""
    ref_by_author: dict[int, list[np.ndarray]] = {}
    for i in reference_ids:
        d = corpus.doc(i)
        ref_by_author.setdefault(d.author_id, []).append(embed(d.tokens))
    author_ids = sorted(ref_by_author)
    author_embs = [aggregate_author(ref_by_author[a]) for a in author_ids]
    q_embs = [embed(corpus.doc(i).tokens) for i in query_ids]
    q_authors = [corpus.doc(i).author_id for i in query_ids]
    rankings = author_rankings(query_ids, q_embs, q_authors,
                               author_ids, author_embs)
    per_domain: dict[str, dict[str, float]] = {}
    by_topic: dict[int, list] = {}
    for r, qid in zip(rankings, query_ids):
        by_topic.setdefault(corpus.doc(qid).topic_id, []).append(r)
    for topic in sorted(by_topic):
        rs = by_topic[topic]
        per_domain[f"topic_{topic}"] = {
            "mrr": mrr(rs),
            f"recall_at_{recall_k}": recall_at_k(rs, recall_k),
        }
    return MetricsReport(dataset="synthetic", split="cross-topic",
                         mrr=mrr(rankings),
                         recall_at_8=recall_at_k(rankings, recall_k),
                         per_domain=per_domain)


def run_eval_aa(cfg: RunConfig, out_dir, which: str | None = None) -> dict:
    started = time.monotonic()
    p = artifact_paths(out_dir)
    corpus = _load_corpus_for(cfg, out_dir)
    ckpt = _checkpoint_for(cfg, out_dir, which)
    embed, kind = style_embedder(ckpt, corpus.tokenizer.vocab_size)
    train_ids, held_ids = split_cross_topic(corpus)
    recall_k = min(cfg.eval.recall_k, len(corpus.authors))
    report = evaluate_attribution(corpus, embed, held_ids, train_ids, recall_k)
    json_path = Path(out_dir) / f"metrics_{kind}.json"
    csv_path = Path(out_dir) / f"metrics_{kind}.csv"
    write_metrics_report(report, json_path, csv_path)
    print(f"eval-aa [{kind}] mrr={report.mrr:.4f} "
          f"recall@{recall_k}={report.recall_at_8:.4f}")
    return _manifest(out_dir, f"eval-aa-{kind}", cfg, [p["corpus"], ckpt],
                     [json_path, csv_path], started)


def machine_author_ids(corpus: Corpus, n_machine: int) -> list[int]:
    """The synthetic stand-ins for machine generators: the last authors."""
    authors = sorted(corpus.authors)
    if not 1 <= n_machine < len(authors):
        raise ConfigError(f"n_machine_authors must be in [1, {len(authors) - 1}], "
                          f"got {n_machine}")
    return authors[-n_machine:]


def evaluate_detection(corpus: Corpus, embed, cfg: RunConfig,
                       query_ids: list[int],
                       reference_ids: list[int]) -> DetectionScores:
    machines = machine_author_ids(corpus, cfg.eval.n_machine_authors)
    refs_per_gen = []
    for m in machines:
        docs = [i for i in reference_ids if corpus.doc(i).author_id == m]
        if len(docs) < cfg.eval.detect_refs_k:
            raise ConfigError(f"author {m} has only {len(docs)} reference "
                              f"docs, need {cfg.eval.detect_refs_k}")
        refs_per_gen.append([embed(corpus.doc(i).tokens)
                             for i in docs[:cfg.eval.detect_refs_k]])
    if cfg.eval.protocol == "single-target":
        target = machines[0]
        qids = [i for i in query_ids
                if corpus.doc(i).author_id == target
                or corpus.doc(i).author_id not in machines]
        labels = ["machine" if corpus.doc(i).author_id == target else "human"
                  for i in qids]
        q_embs = [embed(corpus.doc(i).tokens) for i in qids]
        return detect_single_target(q_embs, labels, refs_per_gen[0],
                                    aggregate=cfg.eval.aggregate)
    if cfg.eval.protocol == "multi-target":
        labels = ["machine" if corpus.doc(i).author_id in machines else "human"
                  for i in query_ids]
        q_embs = [embed(corpus.doc(i).tokens) for i in query_ids]
        return detect_multi_target(q_embs, labels, refs_per_gen,
                                   aggregate=cfg.eval.aggregate)
    raise ConfigError(f"unknown detection protocol {cfg.eval.protocol!r}")


def run_eval_detect(cfg: RunConfig, out_dir, which: str | None = None) -> dict:
    started = time.monotonic()
    p = artifact_paths(out_dir)
    corpus = _load_corpus_for(cfg, out_dir)
    ckpt = _checkpoint_for(cfg, out_dir, which)
    embed, kind = style_embedder(ckpt, corpus.tokenizer.vocab_size)
    train_ids, held_ids = split_cross_topic(corpus)
    scores = evaluate_detection(corpus, embed, cfg, held_ids, train_ids)
    json_path = Path(out_dir) / f"detection_{kind}.json"
    csv_path = Path(out_dir) / f"scores_{kind}.csv"
    if cfg.eval.pauc_axis == "fpr":
        write_detection_report(scores, cfg.eval.fpr_caps, json_path)
    elif cfg.eval.pauc_axis == "refs":
        payload = {"protocol": scores.protocol, "k": scores.k, "pauc": {}}
        for k_refs in (1, 5, 10):
            sub_cfg_scores = evaluate_detection_with_k(corpus, embed, cfg,
                                                       held_ids, train_ids,
                                                       k_refs)
            payload["pauc"][f"pauc@{k_refs}"] = pauc(sub_cfg_scores,
                                                     cfg.eval.fpr_caps[0])
        write_json_atomic(json_path, payload)
    else:
        raise ConfigError(f"unknown pauc_axis {cfg.eval.pauc_axis!r}")
    write_scores_csv(scores, csv_path)
    print(f"eval-detect [{kind}] protocol={scores.protocol} k={scores.k}")
    return _manifest(out_dir, f"eval-detect-{kind}", cfg, [p["corpus"], ckpt],
                     [json_path, csv_path], started)


def evaluate_detection_with_k(corpus: Corpus, embed, cfg: RunConfig,
                              query_ids, reference_ids,
                              k_refs: int) -> DetectionScores:
    alt = copy.deepcopy(cfg)
    alt.eval.detect_refs_k = k_refs
    return evaluate_detection(corpus, embed, alt, query_ids, reference_ids)


def run_report(cfg: RunConfig, out_dir) -> dict:
    started = time.monotonic()
    out = Path(out_dir)
    combined: dict = {"metrics": {}, "detection": {}}
    for f in sorted(out.glob("metrics_*.json")):
        combined["metrics"][f.stem.replace("metrics_", "")] = \
            json.loads(f.read_text())
    for f in sorted(out.glob("detection_*.json")):
        combined["detection"][f.stem.replace("detection_", "")] = \
            json.loads(f.read_text())
    if not combined["metrics"] and not combined["detection"]:
        raise NotFoundError(f"no metric or detection reports under {out}")
    report_path = out / "report.json"
    write_json_atomic(report_path, combined)
    for name, m in sorted(combined["metrics"].items()):
        print(f"{name:12s} mrr={m['mrr']:.4f} recall@8={m['recall_at_8']:.4f}")
    for name, d in sorted(combined["detection"].items()):
        vals = " ".join(f"{k}={v:.4f}" for k, v in sorted(d["pauc"].items()))
        print(f"{name:12s} {d['protocol']} {vals}")
    return _manifest(out_dir, "report", cfg, [], [report_path], started)