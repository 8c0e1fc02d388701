"""Hard-negative and hard-pair mining with template explanations.

Hard negatives come from BM25: the top matches written by other
authors.  Hard pairs come from content clustering: same-author pairs in
different clusters with low cosine similarity, and different-author
pairs in the same cluster with high similarity.  Explanation targets
are synthesized from the corpus ground truth so the discriminator has
a deterministic supervised signal.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import lexicon
from .bm25 import Bm25Index
from .corpus import Corpus, Document
from .errors import MiningError, ParseError
from .util import write_text_atomic

SAME_AUTHOR = "same-author"
DIFF_AUTHOR = "different-author"
SAME_CONTENT = "same-content"
DIFF_CONTENT = "different-content"

THETA_LO = 0.3
THETA_HI = 0.7


@dataclass
class PairRecord:
    doc_i: int
    doc_j: int
    style_label: str
    content_label: str
    style_explanation: str = ""
    content_explanation: str = ""


@dataclass
class MiningResult:
    pairs: list[PairRecord]
    quota: int
    shortfall_same_author: int
    shortfall_diff_author: int
    theta_lo: float
    theta_hi: float

    @property
    def warning_count(self) -> int:
        return int(self.shortfall_same_author > 0) + int(self.shortfall_diff_author > 0)


def mine_hard_negatives(index: Bm25Index, anchor: Document, k: int) -> list[int]:
    """Top-k BM25 matches by other authors; ties favor lower doc ids."""
    return mine_hard_negatives_tokens(index, anchor.tokens, anchor.author_id, k)


def mine_hard_negatives_tokens(index: Bm25Index, query_tokens: list[int],
                               anchor_author: int, k: int) -> list[int]:
    if k < 1:
        raise MiningError(f"k must be positive, got {k}")
    all_scores = index.scores(query_tokens)
    scored = [(-all_scores[i], i) for i in range(len(index))
              if index.doc_authors[i] != anchor_author]
    if len(scored) < k:
        raise MiningError(f"anchor has {len(scored)} other-author "
                          f"candidates, needs {k}")
    scored.sort()
    return [i for _, i in scored[:k]]


def tfidf_embeddings(corpus: Corpus) -> np.ndarray:
    """L2-normalized tf-idf rows; a content proxy available before training."""
    n = len(corpus.documents)
    vocab = corpus.tokenizer.vocab_size
    counts = np.zeros((n, vocab), dtype=np.float64)
    for d in corpus.documents:
        for t, f in Counter(d.tokens).items():
            counts[d.id, t] = f
    df = (counts > 0).sum(axis=0)
    with np.errstate(divide="ignore"):
        idf = np.where(df > 0, np.log((n + 1.0) / (df + 1.0)) + 1.0, 0.0)
    x = counts * idf
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return x / norms


def cosine_matrix(embeddings: np.ndarray) -> np.ndarray:
    x = np.asarray(embeddings, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    x = x / norms
    return x @ x.T


def mine_hard_pairs(corpus: Corpus, content_embeddings: np.ndarray,
                    assignments: np.ndarray, quota: int, *,
                    theta_lo: float = THETA_LO,
                    theta_hi: float = THETA_HI,
                    doc_ids: list[int] | None = None) -> MiningResult:
    """Enumerate qualifying pairs in ascending (doc_i, doc_j) order.

    Family one: same author, different cluster, cosine < theta_lo.
    Family two: different author, same cluster, cosine > theta_hi.
    Each family is truncated to the quota independently.  ``doc_ids``
    restricts both families to pairs drawn from that subset.
    """
    n = len(corpus.documents)
    if len(content_embeddings) != n or len(assignments) != n:
        raise MiningError("embeddings and assignments must cover the corpus")
    if quota < 1:
        raise MiningError(f"quota must be positive, got {quota}")

    sim = cosine_matrix(content_embeddings)
    authors = np.array([d.author_id for d in corpus.documents])
    clusters = np.asarray(assignments)
    same_author = authors[:, None] == authors[None, :]
    same_cluster = clusters[:, None] == clusters[None, :]
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    if doc_ids is not None:
        include = np.zeros(n, dtype=bool)
        include[np.asarray(doc_ids, dtype=np.int64)] = True
        upper &= include[:, None] & include[None, :]

    fam1 = upper & same_author & ~same_cluster & (sim < theta_lo)
    fam2 = upper & ~same_author & same_cluster & (sim > theta_hi)

    pairs: list[PairRecord] = []
    idx1 = np.argwhere(fam1)
    for i, j in idx1[:quota]:
        pairs.append(PairRecord(int(i), int(j), SAME_AUTHOR, DIFF_CONTENT))
    idx2 = np.argwhere(fam2)
    for i, j in idx2[:quota]:
        pairs.append(PairRecord(int(i), int(j), DIFF_AUTHOR, SAME_CONTENT))

    result = MiningResult(
        pairs=pairs, quota=quota,
        shortfall_same_author=max(0, quota - len(idx1)),
        shortfall_diff_author=max(0, quota - len(idx2)),
        theta_lo=theta_lo, theta_hi=theta_hi,
    )
    for p in result.pairs:
        _check_label(corpus, p)
    return result


def _check_label(corpus: Corpus, pair: PairRecord) -> None:
    same = corpus.doc(pair.doc_i).author_id == corpus.doc(pair.doc_j).author_id
    if (pair.style_label == SAME_AUTHOR) != same:
        raise MiningError(f"pair ({pair.doc_i}, {pair.doc_j}) has inconsistent "
                          f"style label {pair.style_label!r}")


def factor_phrases(style_factors: list[int]) -> list[str]:
    return [table[v] for table, v in zip(lexicon.FACTOR_DESCRIPTORS, style_factors)]


def topic_keyword(topic_id: int) -> str:
    return lexicon.TOPIC_BANK[topic_id][1][0]


def synth_explanations(pair: PairRecord, corpus: Corpus) -> PairRecord:
    """Fill explanation targets from ground-truth factors and topics."""
    a = corpus.doc(pair.doc_i)
    b = corpus.doc(pair.doc_j)
    pa = factor_phrases(a.style_factors)
    pb = factor_phrases(b.style_factors)

    if pair.style_label == SAME_AUTHOR:
        style = "both texts show " + " and ".join(pa)
    else:
        diff = [(x, y) for x, y in zip(pa, pb) if x != y] or list(zip(pa, pb))
        style = ("text 1 shows " + " and ".join(x for x, _ in diff)
                 + " while text 2 shows " + " and ".join(y for _, y in diff))

    if a.topic_id == b.topic_id:
        content = f"both texts discuss {topic_keyword(a.topic_id)}"
    else:
        content = (f"text 1 discusses {topic_keyword(a.topic_id)} "
                   f"while text 2 discusses {topic_keyword(b.topic_id)}")

    return replace(pair, style_explanation=style, content_explanation=content)


def save_pairs(pairs: list[PairRecord], path: str | Path) -> None:
    lines = []
    for p in pairs:
        lines.append(json.dumps({
            "doc_i": p.doc_i,
            "doc_j": p.doc_j,
            "style_label": p.style_label,
            "content_label": p.content_label,
            "style_explanation": p.style_explanation,
            "content_explanation": p.content_explanation,
        }, sort_keys=False))
    write_text_atomic(Path(path), "\n".join(lines) + "\n")


def load_pairs(path: str | Path) -> list[PairRecord]:
    path = Path(path)
    pairs = []
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            r = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}:{ln}: bad pair row: {e}", line) from None
        pairs.append(PairRecord(
            doc_i=r["doc_i"], doc_j=r["doc_j"],
            style_label=r["style_label"], content_label=r["content_label"],
            style_explanation=r.get("style_explanation", ""),
            content_explanation=r.get("content_explanation", ""),
        ))
    return pairs


def doc_frequencies(docs: list[list[int]]) -> dict[int, int]:
    df: dict[int, int] = {}
    for d in docs:
        for t in set(d):
            df[t] = df.get(t, 0) + 1
    return df


def idf_value(n_docs: int, df: int) -> float:
    return math.log((n_docs - df + 0.5) / (df + 0.5) + 1.0)
