"""Training loops: contrastive pretraining and the two finetune variants.

Both stages use decoupled-weight-decay gradient descent at a constant
learning rate and log one CSV row per step.  All randomness flows from
the run seed; reparameterization noise uses a per-step derived seed
(seed * 1000003 + step, masked to 32 bits) so any step can be replayed
in isolation.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .bm25 import Bm25Index
from .contrastive import (StyleEncoder, build_batch, encode_batch,
                          hard_negative_map, supcon_loss)
from .corpus import Corpus
from .errors import ConfigError, NumericsError
from .generator import (Generator, default_templates, discriminator_loss,
                        total_loss)
from .mining import PairRecord
from .optim import AdamW, grads_from_map
from .util import write_text_atomic
from .vae import (DualEncoders, GaussianEncoder, kl_std_normal, reparameterize,
                  warm_start_style)

VARIANT_EAVAE = "eavae"
VARIANT_SINGLE = "single"


def noise_seed(run_seed: int, step: int) -> int:
    return (run_seed * 1_000_003 + step) & 0xFFFFFFFF


@dataclass
class LogRow:
    step: int
    loss: float
    lr: float
    seed: int


def write_training_log(rows: list[LogRow], path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["step", "loss", "lr", "seed"])
    for r in rows:
        w.writerow([r.step, repr(r.loss), repr(r.lr), r.seed])
    write_text_atomic(path, buf.getvalue())


def _check_finite(loss: float, step: int) -> None:
    if not np.isfinite(loss):
        raise NumericsError(f"training diverged at step {step}: loss={loss}")


def pretrain_style(corpus: Corpus, pool_ids: list[int], cfg, seed: int,
                   max_positions: int) -> tuple[StyleEncoder, list[LogRow]]:
    """Contrastive pretraining over the pool; returns encoder and log."""
    rng = np.random.default_rng(seed)
    encoder = StyleEncoder(rng, corpus.tokenizer.vocab_size, hidden=cfg.hidden,
                           n_layers=cfg.n_layers, out_dim=cfg.out_dim,
                           max_positions=max_positions)
    docs = [corpus.doc(i).tokens for i in pool_ids]
    authors = [corpus.doc(i).author_id for i in pool_ids]
    index = Bm25Index.from_tokens(docs, authors)
    neg_map = (hard_negative_map(corpus, index, pool_ids, cfg.k_negatives)
               if cfg.k_negatives > 0 else None)
    params = encoder.params()
    opt = AdamW(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    steps_per_epoch = max(1, len(pool_ids) // max(1, cfg.batch_anchors))
    rows: list[LogRow] = []
    step = 0
    for _ in range(cfg.epochs):
        for _ in range(steps_per_epoch):
            batch = build_batch(corpus, index, pool_ids, rng,
                                cfg.batch_anchors, cfg.k_negatives,
                                tau=cfg.tau, neg_map=neg_map)
            reps = encode_batch(encoder, corpus, batch.doc_ids)
            loss = supcon_loss(reps, batch.author_ids, tau=cfg.tau,
                               include_self=cfg.include_self_denominator)
            _check_finite(loss.item(), step)
            grad_map = ad.backward(loss)
            opt.step(grads_from_map(params, grad_map))
            rows.append(LogRow(step=step, loss=loss.item(), lr=cfg.lr, seed=seed))
            step += 1
    return encoder, rows


@dataclass
class FinetunedModel:
    variant: str
    generator: Generator
    dual: DualEncoders | None = None
    single: GaussianEncoder | None = None

    def params(self) -> dict[str, Tensor]:
        out = (self.dual.params() if self.variant == VARIANT_EAVAE
               else self.single.params("style"))
        out.update(self.generator.params("gen"))
        return out

    def style_embedding(self, token_ids) -> np.ndarray:
        enc = self.dual.style if self.variant == VARIANT_EAVAE else self.single
        return enc.mu_vector(token_ids)

    def content_embedding(self, token_ids) -> np.ndarray:
        enc = self.dual.content if self.variant == VARIANT_EAVAE else self.single
        return enc.mu_vector(token_ids)

    def latents_for(self, token_ids, noise_rng: np.random.Generator | None):
        """Sampled (z_s, z_c, gaussians) for one document; mean when no rng."""
        if self.variant == VARIANT_EAVAE:
            gs = self.dual.style.encode(token_ids)
            gc = self.dual.content.encode(token_ids)
        else:
            gs = self.single.encode(token_ids)
            gc = gs
        ns = noise_rng.standard_normal(gs.dim) if noise_rng is not None else None
        nc = noise_rng.standard_normal(gc.dim) if noise_rng is not None else None
        z_s = reparameterize(gs, ns if ns is not None else np.zeros(gs.dim))
        if self.variant == VARIANT_EAVAE:
            z_c = reparameterize(gc, nc if nc is not None else np.zeros(gc.dim))
        else:
            z_c = z_s
        return z_s, z_c, gs, gc


def build_finetune_model(rng: np.random.Generator, vocab_size: int, cfg,
                         variant: str, max_positions: int,
                         templates) -> FinetunedModel:
    if variant == VARIANT_EAVAE:
        dual = DualEncoders(rng, vocab_size, hidden=cfg.hidden,
                            n_layers=cfg.n_layers, style_dim=cfg.style_dim,
                            content_dim=cfg.content_dim,
                            max_positions=max_positions,
                            log_sigma_bias=cfg.log_sigma_bias)
        single = None
    elif variant == VARIANT_SINGLE:
        dual = None
        single = GaussianEncoder(rng, vocab_size, hidden=cfg.hidden,
                                 n_layers=cfg.n_layers,
                                 latent_dim=cfg.style_dim,
                                 max_positions=max_positions,
                                 log_sigma_bias=cfg.log_sigma_bias)
    else:
        raise ConfigError(f"unknown finetune variant {variant!r}")
    gen = Generator(rng, vocab_size, embed_dim=cfg.gen_embed_dim,
                    n_layers=cfg.gen_layers, style_dim=cfg.style_dim,
                    content_dim=(cfg.content_dim if variant == VARIANT_EAVAE
                                 else cfg.style_dim),
                    max_positions=max_positions,
                    templates=templates,
                    reverse_style_gradient=cfg.reverse_style_gradient,
                    adapter_scale=cfg.adapter_scale,
                    out_scale=cfg.gen_out_scale)
    return FinetunedModel(variant=variant, generator=gen, dual=dual,
                          single=single)


def _hinged_kl(g, free_nats: float) -> Tensor:
    """KL above a free-bits floor; no pull once below the floor.

    Keeps the posterior informative while the decoder is still learning
    to read it (otherwise the prior term wins the early race and the
    latents collapse before conditioning pays off)."""
    return ad.relu(ad.add(kl_std_normal(g), -free_nats))


def _pair_step_loss(model: FinetunedModel, corpus: Corpus, pair: PairRecord,
                    cfg, noise_rng: np.random.Generator) -> Tensor:
    """Training objective on a two-document minibatch: mean per-document
    VAE loss of the two documents plus the weighted pair loss."""
    d_i = corpus.doc(pair.doc_i).tokens
    d_j = corpus.doc(pair.doc_j).tokens
    z_si, z_ci, g_si, g_ci = model.latents_for(d_i, noise_rng)
    z_sj, z_cj, g_sj, g_cj = model.latents_for(d_j, noise_rng)

    def vae_total(z_s, z_c, g_s, g_c, doc):
        # which encoders reconstruction may update; the loss value is
        # identical either way, only gradient routing changes.  With
        # beta at 0.1 a live recon path pays for stuffing document
        # detail into whichever latent it can reach, which drags topic
        # into the style channel and wrecks cross-topic retrieval, so
        # by default recon feeds the content encoder only and the style
        # encoder learns from its pair task and the KL pull.
        if cfg.recon_updates_encoders == "both":
            recon = model.generator.reconstruction_nll(z_s, z_c, doc)
        elif cfg.recon_updates_encoders == "content":
            # the content slot stays live and the style slot is detached.
            # For the single-latent ablation both slots hold the same
            # tensor, so its lone encoder still trains through the
            # content slot; only the dual model has a style encoder to
            # protect.
            recon = model.generator.reconstruction_nll(
                ad.tensor(z_s.data), z_c, doc)
        elif cfg.recon_updates_encoders == "none":
            recon = model.generator.reconstruction_nll(
                ad.tensor(z_s.data), ad.tensor(z_c.data), doc)
        else:
            raise ConfigError(
                f"recon_updates_encoders must be 'both', 'content' or "
                f"'none', got {cfg.recon_updates_encoders!r}")
        if model.variant == VARIANT_EAVAE:
            # tight floor on style, generous floor on content: spare
            # reconstruction detail routes through the content latent
            kl = ad.mul(_hinged_kl(g_s, cfg.kl_free_style), cfg.beta_s)
            kl = ad.add(kl, ad.mul(_hinged_kl(g_c, cfg.kl_free_content),
                                   cfg.beta_c))
        else:
            # the lone latent carries both channels: combined budget
            combined = cfg.kl_free_style + cfg.kl_free_content
            kl = ad.mul(_hinged_kl(g_s, combined), cfg.beta_s)
        return ad.add(recon, kl)

    vae_i = vae_total(z_si, z_ci, g_si, g_ci, d_i)
    vae_j = vae_total(z_sj, z_cj, g_sj, g_cj, d_j)
    vae_mean = ad.mul(ad.add(vae_i, vae_j), 0.5)
    dis = discriminator_loss(pair, z_si, z_sj, z_ci, z_cj,
                             model.generator, corpus.tokenizer)
    return total_loss(vae_mean, dis, cfg.lambda_dis)


def finetune(corpus: Corpus, pairs: list[PairRecord], cfg, seed: int,
             variant: str, max_positions: int,
             contrastive_arrays: dict[str, np.ndarray] | None = None,
             ) -> tuple[FinetunedModel, list[LogRow]]:
    """Joint training of encoders and generator over mined pairs."""
    if not pairs:
        raise ConfigError("finetuning requires at least one mined pair")
    rng = np.random.default_rng(seed)
    templates = default_templates(corpus.tokenizer)
    model = build_finetune_model(rng, corpus.tokenizer.vocab_size, cfg,
                                 variant, max_positions, templates)
    if contrastive_arrays is not None:
        target = (model.dual.style if variant == VARIANT_EAVAE else model.single)
        warm_start_style(target, contrastive_arrays, mu_gain=cfg.warm_mu_gain)
    params = model.params()
    # the style encoder sits out the first phase so the content path and
    # the generator mature on reconstruction and discrimination before
    # the pretrained style geometry is exposed to their gradients.  By
    # default only the style head ever trains: the frozen trunk keeps the
    # pretrained similarity geometry and the linear head reweights it,
    # which bounds how far finetuning can drift the retrieval space.
    style_params = {k: v for k, v in params.items()
                    if k.startswith("style.")
                    and (cfg.style_trunk_trainable
                         or not k.startswith("style.trunk."))}
    other_params = {k: v for k, v in params.items()
                    if not k.startswith("style.")}
    total_steps = cfg.epochs * len(pairs)
    freeze_steps = int(cfg.style_freeze_frac * total_steps)
    opt_other = AdamW(other_params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    opt_style: AdamW | None = None
    rows: list[LogRow] = []
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(len(pairs))
        for pi in order:
            noise_rng = np.random.default_rng(noise_seed(seed, step))
            loss = _pair_step_loss(model, corpus, pairs[int(pi)], cfg, noise_rng)
            _check_finite(loss.item(), step)
            grad_map = ad.backward(loss)
            opt_other.step(grads_from_map(other_params, grad_map))
            if step >= freeze_steps:
                if opt_style is None:
                    opt_style = AdamW(style_params, lr=cfg.lr,
                                      weight_decay=cfg.weight_decay)
                opt_style.step(grads_from_map(style_params, grad_map))
            rows.append(LogRow(step=step, loss=loss.item(), lr=cfg.lr, seed=seed))
            step += 1
    return model, rows
