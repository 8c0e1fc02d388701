"""Style-encoder pretraining with a supervised contrastive loss.

The encoder is bidirectional (every token attends to the full context)
and maps a document to an L2-normalized style vector.  Batches pair each
anchor with one same-author positive and its top BM25 matches written by
other authors, so lexical overlap alone cannot satisfy the loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .bm25 import Bm25Index
from .corpus import Corpus
from .errors import ConfigError, ContractError, MiningError
from .mining import mine_hard_negatives_tokens
from .nn import Linear, SequenceEncoder

DEFAULT_TAU = 0.02


class StyleEncoder:
    """Bidirectional trunk plus a linear projection to the style space."""

    def __init__(self, rng: np.random.Generator, vocab_size: int, hidden: int = 64,
                 n_layers: int = 2, out_dim: int = 32, max_positions: int = 640):
        self.out_dim = out_dim
        self.trunk = SequenceEncoder(rng, vocab_size, hidden, n_layers, max_positions)
        self.proj = Linear(rng, hidden, out_dim)

    def encode(self, token_ids) -> Tensor:
        """Unit style vector as a [1, out_dim] graph node."""
        if len(token_ids) == 0:
            raise ContractError("cannot encode an empty document")
        pooled = self.trunk.pooled(token_ids)
        return ad.l2_normalize(self.proj(pooled))

    def encode_vector(self, token_ids) -> np.ndarray:
        """Detached [out_dim] unit vector for evaluation code."""
        return self.encode(token_ids).data[0].copy()

    def params(self, prefix: str = "style") -> dict[str, Tensor]:
        out = self.trunk.params(f"{prefix}.trunk")
        out.update(self.proj.params(f"{prefix}.proj"))
        return out


@dataclass
class ContrastiveBatch:
    doc_ids: list[int]
    author_ids: list[int]
    temperature: float = DEFAULT_TAU
    # anchor positions within doc_ids (every doc still enters the denominator)
    anchor_rows: list[int] = field(default_factory=list)


def encode_batch(encoder: StyleEncoder, corpus: Corpus,
                 doc_ids: list[int]) -> Tensor:
    rows = [encoder.encode(corpus.doc(i).tokens) for i in doc_ids]
    return ad.concat(rows, axis=0)


def positive_mask(author_ids, include_self: bool = False) -> np.ndarray:
    """0/1 matrix marking same-author pairs; the diagonal is never positive."""
    a = np.asarray(author_ids)
    m = (a[:, None] == a[None, :]).astype(np.float64)
    np.fill_diagonal(m, 1.0 if include_self else 0.0)
    return m


def supcon_loss_from_logits(scaled_logits: Tensor, author_ids,
                            include_self: bool = False) -> Tensor:
    """Contrastive loss from a [B, B] matrix of already temperature-scaled logits.

    For each anchor i and positive j:  -log softmax_j over k != i.  With
    ``include_self`` the denominator keeps the k = i term, matching the
    summation bounds as printed rather than the usual self-excluded form.
    """
    n = scaled_logits.shape[0]
    if scaled_logits.shape != (n, n):
        raise ConfigError(f"logits must be square, got {scaled_logits.shape}")
    if len(author_ids) != n:
        raise ConfigError("author ids must match the logit matrix size")
    if include_self:
        denom_input = scaled_logits
    else:
        diag_mask = np.zeros((n, n))
        np.fill_diagonal(diag_mask, ad.MASK_VALUE)
        denom_input = ad.add(scaled_logits, Tensor(diag_mask))
    lse = ad.logsumexp(denom_input, axis=1, keepdims=True)
    log_prob = ad.add(scaled_logits, ad.mul(lse, -1.0))
    positives = positive_mask(author_ids, include_self=False)
    return ad.mul(ad.tsum(ad.mul(log_prob, Tensor(positives))), -1.0)


def supcon_loss(representations: Tensor, author_ids, tau: float = DEFAULT_TAU,
                include_self: bool = False) -> Tensor:
    """Loss over unit representations [B, D]; pairwise logits are r_i . r_j / tau."""
    if tau <= 0.0:
        raise ConfigError(f"temperature must be positive, got {tau}")
    logits = ad.matmul(representations, representations, transpose_b=True)
    scaled = ad.div(logits, tau)
    return supcon_loss_from_logits(scaled, author_ids, include_self=include_self)


def hard_negative_map(corpus: Corpus, index: Bm25Index, pool_ids: list[int],
                      k: int) -> dict[int, list[int]]:
    """Precompute every pool position's top-k other-author matches once."""
    out = {}
    for p, doc_id in enumerate(pool_ids):
        doc = corpus.doc(doc_id)
        out[p] = mine_hard_negatives_tokens(index, doc.tokens, doc.author_id, k)
    return out


def build_batch(corpus: Corpus, index: Bm25Index, pool_ids: list[int],
                rng: np.random.Generator, batch_size: int, k: int,
                tau: float = DEFAULT_TAU,
                neg_map: dict[int, list[int]] | None = None) -> ContrastiveBatch:
    """Sample anchors from the pool, each with one positive and K hard negatives.

    ``index`` must be built over exactly ``pool_ids`` (position p in the
    index is document pool_ids[p]).  Duplicate picks collapse to one row.
    """
    if len(index) != len(pool_ids):
        raise ConfigError("index does not cover the document pool")
    by_author: dict[int, list[int]] = {}
    for p, doc_id in enumerate(pool_ids):
        by_author.setdefault(corpus.doc(doc_id).author_id, []).append(p)
    eligible = [p for positions in by_author.values() if len(positions) >= 2
                for p in positions]
    if len(eligible) < batch_size:
        raise MiningError(f"only {len(eligible)} anchors have a same-author "
                          f"partner, need {batch_size}")
    eligible.sort()
    anchors = rng.choice(len(eligible), size=batch_size, replace=False)
    chosen: list[int] = []
    row_of: dict[int, int] = {}
    anchor_rows: list[int] = []

    def push(pos: int) -> int:
        if pos not in row_of:
            row_of[pos] = len(chosen)
            chosen.append(pos)
        return row_of[pos]

    for a in sorted(int(x) for x in anchors):
        pos = eligible[a]
        anchor_rows.append(push(pos))
        doc = corpus.doc(pool_ids[pos])
        partners = [p for p in by_author[doc.author_id] if p != pos]
        push(partners[int(rng.integers(len(partners)))])
        if k > 0:
            negs = (neg_map[pos] if neg_map is not None else
                    mine_hard_negatives_tokens(index, doc.tokens, doc.author_id, k))
            for neg_pos in negs:
                push(neg_pos)

    doc_ids = [pool_ids[p] for p in chosen]
    author_ids = [corpus.doc(i).author_id for i in doc_ids]
    return ContrastiveBatch(doc_ids=doc_ids, author_ids=author_ids,
                            temperature=tau, anchor_rows=anchor_rows)
