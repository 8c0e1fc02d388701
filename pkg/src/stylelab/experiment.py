"""Disentanglement study: cross-topic attribution of three model variants.

On a corpus whose authors each hold out one topic, the study compares
cross-topic retrieval of (a) the contrastive pretrained encoder, (b) a
single-latent finetuned ablation, and (c) the dual-latent model, then
probes the latents for topic leakage and measures the explanation
channel (parse rate and label agreement of greedy decision outputs) on
pairs held out from finetuning.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from statistics import median

import numpy as np

from .config import RunConfig
from .corpus import Corpus, generate_corpus, split_cross_topic
from .errors import ConfigError
from .generator import (ROLE_PAIR_1, ROLE_PAIR_2, TASK_CONTENT, TASK_STYLE,
                        parse_decision)
from .mining import PairRecord, synth_explanations
from .pipeline import evaluate_attribution, mine_training_pairs
from .training import (VARIANT_EAVAE, VARIANT_SINGLE, FinetunedModel,
                       finetune, pretrain_style)
from .errors import ParseError


@dataclass
class SeedOutcome:
    seed: int
    mrr_pretrain: float
    mrr_single: float
    mrr_eavae: float
    probe_style_acc: float
    probe_content_acc: float
    probe_chance: float
    parse_rate: float
    label_agreement: float
    wall_seconds: float


@dataclass
class StudyResult:
    outcomes: list[SeedOutcome]

    def _med(self, attr: str) -> float:
        return median(getattr(o, attr) for o in self.outcomes)

    @property
    def mrr_pretrain(self) -> float:
        return self._med("mrr_pretrain")

    @property
    def mrr_single(self) -> float:
        return self._med("mrr_single")

    @property
    def mrr_eavae(self) -> float:
        return self._med("mrr_eavae")

    @property
    def probe_style_acc(self) -> float:
        return self._med("probe_style_acc")

    @property
    def probe_content_acc(self) -> float:
        return self._med("probe_content_acc")

    @property
    def parse_rate(self) -> float:
        return self._med("parse_rate")

    @property
    def label_agreement(self) -> float:
        return self._med("label_agreement")


def split_pairs(pairs: list[PairRecord], rng: np.random.Generator,
                eval_per_family: int) -> tuple[list[PairRecord], list[PairRecord]]:
    """Hold out a fixed number of pairs per family for evaluation."""
    fam1 = [p for p in pairs if p.style_label == "same-author"]
    fam2 = [p for p in pairs if p.style_label == "different-author"]
    train: list[PairRecord] = []
    held: list[PairRecord] = []
    for fam in (fam1, fam2):
        order = rng.permutation(len(fam))
        n_eval = min(eval_per_family, len(fam) // 5)
        for pos, idx in enumerate(order):
            (held if pos < n_eval else train).append(fam[int(idx)])
    return train, held


def softmax_probe_accuracy(x_train: np.ndarray, y_train: np.ndarray,
                           x_test: np.ndarray, y_test: np.ndarray,
                           n_classes: int, iters: int = 400,
                           lr: float = 0.5, l2: float = 1e-4) -> float:
    """Full-batch softmax regression from zero init (convex, deterministic)."""
    mean = x_train.mean(axis=0, keepdims=True)
    std = x_train.std(axis=0, keepdims=True)
    std[std == 0.0] = 1.0
    xtr = (x_train - mean) / std
    xte = (x_test - mean) / std
    n, d = xtr.shape
    w = np.zeros((d, n_classes))
    b = np.zeros(n_classes)
    onehot = np.eye(n_classes)[y_train]
    for _ in range(iters):
        logits = xtr @ w + b
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        g = (p - onehot) / n
        w -= lr * (xtr.T @ g + l2 * w)
        b -= lr * g.sum(axis=0)
    pred = np.argmax(xte @ w + b, axis=1)
    return float(np.mean(pred == y_test))


def topic_probes(model: FinetunedModel, corpus: Corpus, train_ids: list[int],
                 held_ids: list[int], probe_seed: int = 9) -> tuple[float, float]:
    """(style-latent, content-latent) topic accuracy on held-out docs.

    Probes read one posterior sample per document: the latent variable is
    the stochastic code, and its signal-to-noise ratio is what downstream
    consumers of the latent actually see.  The sampling rng is fixed so
    the measurement is reproducible.
    """
    n_topics = len(corpus.topics)
    y_tr = np.array([corpus.doc(i).topic_id for i in train_ids])
    y_te = np.array([corpus.doc(i).topic_id for i in held_ids])
    rng = np.random.default_rng(probe_seed)

    def sampled(ids):
        zs_rows, zc_rows = [], []
        for i in ids:
            z_s, z_c, _, _ = model.latents_for(corpus.doc(i).tokens, rng)
            zs_rows.append(z_s.data[0])
            zc_rows.append(z_c.data[0])
        return np.stack(zs_rows), np.stack(zc_rows)

    xs_tr, xc_tr = sampled(train_ids)
    xs_te, xc_te = sampled(held_ids)
    style_acc = softmax_probe_accuracy(xs_tr, y_tr, xs_te, y_te, n_topics)
    content_acc = softmax_probe_accuracy(xc_tr, y_tr, xc_te, y_te, n_topics)
    return style_acc, content_acc


def explanation_channel(model: FinetunedModel, corpus: Corpus,
                        pairs: list[PairRecord],
                        max_len: int = 96) -> tuple[float, float]:
    """Greedy-decode both decisions per pair; (parse rate, label agreement)."""
    if not pairs:
        raise ConfigError("no held-out pairs to evaluate")
    attempts = 0
    parsed = 0
    agreed = 0
    for pair in pairs:
        z_si, z_ci, _, _ = model.latents_for(corpus.doc(pair.doc_i).tokens, None)
        z_sj, z_cj, _, _ = model.latents_for(corpus.doc(pair.doc_j).tokens, None)
        tasks = [
            (TASK_STYLE, z_si, z_sj,
             "same" if pair.style_label == "same-author" else "different"),
            (TASK_CONTENT, z_ci, z_cj,
             "same" if pair.content_label == "same-content" else "different"),
        ]
        for task, z_i, z_j, gold in tasks:
            template = model.generator.templates[task]
            hybrid = model.generator.build_prompt(
                template, {ROLE_PAIR_1: z_i, ROLE_PAIR_2: z_j})
            out = model.generator.generate(hybrid, max_len=max_len)
            text = corpus.tokenizer.decode([t for t in out
                                            if t < corpus.tokenizer.vocab_size])
            attempts += 1
            try:
                record = parse_decision(text)
            except ParseError:
                continue
            parsed += 1
            if record.label == gold:
                agreed += 1
    parse_rate = parsed / attempts
    agreement = agreed / parsed if parsed else 0.0
    return parse_rate, agreement


def run_seed(seed: int, cfg: RunConfig | None = None,
             eval_pairs_per_family: int = 20,
             keep_models: bool = False) -> SeedOutcome | tuple:
    """One full study pass under one seed."""
    cfg = cfg or RunConfig()
    started = time.monotonic()
    cc = cfg.corpus
    corpus = generate_corpus(seed, cc.n_authors, cc.n_topics,
                             cc.docs_per_author, cc.style_strength,
                             cc.topic_strength, topic_skew=cc.topic_skew,
                             min_tokens=cc.min_tokens,
                             max_tokens=cc.max_tokens,
                             balance_floor=cc.balance_floor,
                             balance_cap=cc.balance_cap)
    train_ids, held_ids = split_cross_topic(corpus)
    recall_k = min(cfg.eval.recall_k, len(corpus.authors))
    max_pos = cfg.max_positions()

    encoder, _ = pretrain_style(corpus, train_ids, cfg.pretrain, seed, max_pos)
    contrastive_arrays = {name: p.data.copy()
                          for name, p in encoder.params().items()}
    mrr_pre = evaluate_attribution(corpus, encoder.encode_vector, held_ids,
                                   train_ids, recall_k).mrr

    mined = mine_training_pairs(corpus, train_ids, cfg)
    pairs = [synth_explanations(p, corpus) for p in mined.pairs]
    pair_rng = np.random.default_rng(seed + 17)
    train_pairs, held_pairs = split_pairs(pairs, pair_rng,
                                          eval_pairs_per_family)

    eavae, _ = finetune(corpus, train_pairs, cfg.finetune, seed,
                        VARIANT_EAVAE, max_pos,
                        contrastive_arrays=contrastive_arrays
                        if cfg.finetune.warm_start else None)
    single, _ = finetune(corpus, train_pairs, cfg.finetune, seed,
                         VARIANT_SINGLE, max_pos,
                         contrastive_arrays=contrastive_arrays
                         if cfg.finetune.warm_start else None)

    mrr_eavae = evaluate_attribution(
        corpus, eavae.style_embedding, held_ids, train_ids, recall_k).mrr
    mrr_single = evaluate_attribution(
        corpus, single.style_embedding, held_ids, train_ids, recall_k).mrr

    style_acc, content_acc = topic_probes(eavae, corpus, train_ids, held_ids)
    parse_rate, agreement = explanation_channel(eavae, corpus, held_pairs)

    outcome = SeedOutcome(
        seed=seed,
        mrr_pretrain=mrr_pre,
        mrr_single=mrr_single,
        mrr_eavae=mrr_eavae,
        probe_style_acc=style_acc,
        probe_content_acc=content_acc,
        probe_chance=1.0 / len(corpus.topics),
        parse_rate=parse_rate,
        label_agreement=agreement,
        wall_seconds=time.monotonic() - started,
    )
    if keep_models:
        return outcome, {"corpus": corpus, "eavae": eavae, "single": single,
                         "pretrain": encoder, "held_pairs": held_pairs}
    return outcome


def run_study(seeds=(0, 1, 2), cfg: RunConfig | None = None) -> StudyResult:
    return StudyResult(outcomes=[run_seed(s, cfg) for s in seeds])
