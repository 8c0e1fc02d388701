"""Dual Gaussian encoders, reparameterized sampling, and the VAE objective.

Style and content encoders are fully separate parameter sets.  Each maps
a document to a diagonal Gaussian via a pooled hidden state and a linear
head producing (mu, log_sigma) halves.  The objective is a one-sample
reconstruction NLL through the generator plus beta-weighted analytic KL
terms against a standard-normal prior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ContractError, ShapeError
from .nn import Linear, SequenceEncoder

DEFAULT_BETA = 0.1
DEFAULT_LATENT_DIM = 32


@dataclass
class LatentGaussian:
    mu: Tensor
    log_sigma: Tensor

    @property
    def dim(self) -> int:
        return self.mu.shape[-1]


class GaussianEncoder:
    """Trunk plus a linear head emitting mu and log_sigma halves."""

    def __init__(self, rng: np.random.Generator, vocab_size: int, hidden: int = 64,
                 n_layers: int = 2, latent_dim: int = DEFAULT_LATENT_DIM,
                 max_positions: int = 640, head_scale: float = 0.02,
                 log_sigma_bias: float = 0.0):
        self.latent_dim = latent_dim
        self.trunk = SequenceEncoder(rng, vocab_size, hidden, n_layers, max_positions)
        self.head = Linear(rng, hidden, 2 * latent_dim, scale=head_scale)
        # starting the posterior narrower than the prior keeps the sampled
        # latent informative before the decoder has learned to read it
        self.head.b.data[0, latent_dim:] = log_sigma_bias

    def encode(self, token_ids) -> LatentGaussian:
        if len(token_ids) == 0:
            raise ContractError("cannot encode an empty document")
        h = self.head(self.trunk.pooled(token_ids))
        d = self.latent_dim
        mu = ad.narrow(h, (slice(None), slice(0, d)))
        log_sigma = ad.narrow(h, (slice(None), slice(d, 2 * d)))
        return LatentGaussian(mu=mu, log_sigma=log_sigma)

    def mu_vector(self, token_ids) -> np.ndarray:
        """Detached [latent_dim] posterior mean for evaluation code."""
        return self.encode(token_ids).mu.data[0].copy()

    def params(self, prefix: str) -> dict[str, Tensor]:
        out = self.trunk.params(f"{prefix}.trunk")
        out.update(self.head.params(f"{prefix}.head"))
        return out


class DualEncoders:
    """Independent style and content Gaussian encoders."""

    def __init__(self, rng: np.random.Generator, vocab_size: int, hidden: int = 64,
                 n_layers: int = 2, style_dim: int = DEFAULT_LATENT_DIM,
                 content_dim: int = DEFAULT_LATENT_DIM, max_positions: int = 640,
                 log_sigma_bias: float = 0.0):
        self.style = GaussianEncoder(rng, vocab_size, hidden, n_layers,
                                     style_dim, max_positions,
                                     log_sigma_bias=log_sigma_bias)
        self.content = GaussianEncoder(rng, vocab_size, hidden, n_layers,
                                       content_dim, max_positions,
                                       log_sigma_bias=log_sigma_bias)

    def params(self) -> dict[str, Tensor]:
        out = self.style.params("style")
        out.update(self.content.params("content"))
        return out


def warm_start_style(encoder: GaussianEncoder,
                     contrastive_arrays: dict[str, np.ndarray],
                     mu_gain: float = 1.0) -> None:
    """Initialize the style trunk and the mu half of the head from a
    pretrained contrastive checkpoint.

    The projection is scaled by mu_gain so the posterior mean stands
    clear of the sampling noise (cosine geometry is scale invariant).
    The log_sigma half keeps the encoder's constructed bias and gets
    zero weights, so every document starts at the same spread."""
    trunk_params = encoder.trunk.params("style.trunk")
    for name, p in trunk_params.items():
        if name not in contrastive_arrays:
            raise ShapeError(f"contrastive checkpoint missing {name!r}")
        arr = contrastive_arrays[name]
        if arr.shape != p.data.shape:
            raise ShapeError(f"{name}: shape {arr.shape} != {p.data.shape}")
        p.data[...] = arr
    pw = contrastive_arrays.get("style.proj.w")
    pb = contrastive_arrays.get("style.proj.b")
    if pw is None or pb is None:
        raise ShapeError("contrastive checkpoint missing the projection head")
    d = encoder.latent_dim
    if pw.shape != (encoder.head.w.data.shape[0], d):
        raise ShapeError(f"projection shape {pw.shape} does not fit head "
                         f"{encoder.head.w.data.shape} with latent dim {d}")
    encoder.head.w.data[:, :d] = pw * mu_gain
    encoder.head.w.data[:, d:] = 0.0
    encoder.head.b.data[0, :d] = pb[0] * mu_gain


def reparameterize(g: LatentGaussian, noise: np.ndarray) -> Tensor:
    """z = mu + exp(log_sigma) * noise, differentiable in mu and log_sigma."""
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape[-1] != g.dim or noise.size != g.mu.size:
        raise ShapeError(f"noise shape {noise.shape} does not match latent "
                         f"shape {g.mu.shape}")
    sigma = ad.exp(g.log_sigma)
    return ad.add(g.mu, ad.mul(sigma, Tensor(noise.reshape(g.mu.shape))))


def kl_std_normal(g: LatentGaussian) -> Tensor:
    """Sum over dims of 0.5 * (mu^2 + sigma^2 - 1 - 2 log_sigma); >= 0."""
    mu2 = ad.mul(g.mu, g.mu)
    sigma2 = ad.exp(ad.mul(g.log_sigma, 2.0))
    inner = ad.add(ad.add(mu2, sigma2), ad.mul(g.log_sigma, -2.0))
    return ad.mul(ad.add(ad.tsum(inner), -float(g.dim)), 0.5)


@dataclass
class VaeLossTerms:
    recon_nll: Tensor
    kl_style: Tensor
    kl_content: Tensor
    beta_s: float
    beta_c: float
    total: Tensor

    def scalars(self) -> dict[str, float]:
        return {
            "recon_nll": self.recon_nll.item(),
            "kl_style": self.kl_style.item(),
            "kl_content": self.kl_content.item(),
            "total": self.total.item(),
        }


def vae_loss(doc_tokens, encoders: DualEncoders, recon_handle,
             beta_s: float = DEFAULT_BETA, beta_c: float = DEFAULT_BETA,
             noise_s: np.ndarray | None = None,
             noise_c: np.ndarray | None = None) -> VaeLossTerms:
    """One-sample objective: recon NLL plus beta-weighted KL terms.

    ``recon_handle(z_s, z_c, doc_tokens)`` must return the teacher-forced
    reconstruction NLL as a scalar graph node; the generator module
    provides it.  ``noise_s``/``noise_c`` default to zero, which reduces
    sampling to the posterior mean.
    """
    if beta_s < 0.0 or beta_c < 0.0:
        raise ConfigError(f"betas must be nonnegative, got {beta_s}, {beta_c}")
    gs = encoders.style.encode(doc_tokens)
    gc = encoders.content.encode(doc_tokens)
    ns = np.zeros(gs.dim) if noise_s is None else noise_s
    nc = np.zeros(gc.dim) if noise_c is None else noise_c
    z_s = reparameterize(gs, ns)
    z_c = reparameterize(gc, nc)
    recon = recon_handle(z_s, z_c, doc_tokens)
    kls = kl_std_normal(gs)
    klc = kl_std_normal(gc)
    total = ad.add(recon, ad.add(ad.mul(kls, beta_s), ad.mul(klc, beta_c)))
    return VaeLossTerms(recon_nll=recon, kl_style=kls, kl_content=klc,
                        beta_s=beta_s, beta_c=beta_c, total=total)
