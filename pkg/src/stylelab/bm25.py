"""Okapi BM25 over tokenized documents.

Scores use the smoothed idf ln((N - df + 0.5)/(df + 0.5) + 1) with k1/b
term-frequency saturation.  Repeated query terms contribute once per
occurrence.  Indexes are immutable after construction and safe for
concurrent reads.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .errors import ConfigError, NotFoundError

K1 = 1.2
B = 0.75


@dataclass
class Bm25Index:
    doc_freq: dict[int, int]
    doc_len: list[int]
    avg_len: float
    postings: dict[int, list[tuple[int, int]]]
    doc_authors: list[int]
    k1: float = K1
    b: float = B
    # per-doc term counts, kept for O(1) single-document scoring
    _tf: list[Counter] = field(default_factory=list, repr=False)

    @classmethod
    def from_corpus(cls, corpus, k1: float = K1, b: float = B) -> "Bm25Index":
        docs = [d.tokens for d in corpus.documents]
        authors = [d.author_id for d in corpus.documents]
        return cls.from_tokens(docs, authors, k1=k1, b=b)

    @classmethod
    def from_tokens(cls, docs: list[list[int]], authors: list[int], *,
                    k1: float = K1, b: float = B) -> "Bm25Index":
        if not docs:
            raise ConfigError("cannot index an empty document list")
        if len(docs) != len(authors):
            raise ConfigError("docs and authors disagree in length")
        tf = [Counter(d) for d in docs]
        doc_freq: dict[int, int] = {}
        postings: dict[int, list[tuple[int, int]]] = {}
        for i, c in enumerate(tf):
            for t, f in sorted(c.items()):
                doc_freq[t] = doc_freq.get(t, 0) + 1
                postings.setdefault(t, []).append((i, f))
        doc_len = [len(d) for d in docs]
        avg_len = sum(doc_len) / len(docs)
        return cls(doc_freq=doc_freq, doc_len=doc_len, avg_len=avg_len,
                   postings=postings, doc_authors=list(authors),
                   k1=k1, b=b, _tf=tf)

    def __len__(self) -> int:
        return len(self.doc_len)

    def idf(self, term: int) -> float:
        df = self.doc_freq.get(term, 0)
        if df == 0:
            return 0.0
        n = len(self.doc_len)
        return math.log((n - df + 0.5) / (df + 0.5) + 1.0)

    def score(self, query: list[int], doc_id: int) -> float:
        if not 0 <= doc_id < len(self.doc_len):
            raise NotFoundError(f"doc id {doc_id} not in index of {len(self.doc_len)}")
        c = self._tf[doc_id]
        norm = self.k1 * (1.0 - self.b + self.b * self.doc_len[doc_id] / self.avg_len)
        total = 0.0
        for t in query:
            f = c.get(t, 0)
            if f == 0:
                continue
            total += self.idf(t) * f * (self.k1 + 1.0) / (f + norm)
        return total

    def scores(self, query: list[int]) -> list[float]:
        """Score every document; accumulated over postings lists."""
        out = [0.0] * len(self.doc_len)
        qf = Counter(query)
        for t, q_count in qf.items():
            posting = self.postings.get(t)
            if posting is None:
                continue
            idf = self.idf(t)
            for i, f in posting:
                norm = self.k1 * (1.0 - self.b + self.b * self.doc_len[i] / self.avg_len)
                out[i] += q_count * idf * f * (self.k1 + 1.0) / (f + norm)
        return out
