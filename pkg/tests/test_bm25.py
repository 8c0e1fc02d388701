"""Okapi BM25: hand-evaluated oracle values and ranking contracts."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stylelab.bm25 import Bm25Index
from stylelab.errors import ConfigError, NotFoundError

CAT, DOG, FISH, EEL, NEWT = 7, 3, 4, 5, 6


@pytest.fixture()
def toy_index():
    docs = [[CAT, CAT, DOG], [CAT, FISH], [DOG, FISH, EEL, NEWT]]
    return Bm25Index.from_tokens(docs, [0, 1, 2])


class TestHandCase:
    """3-doc toy index, query [CAT], k1=1.2, b=0.75, worked by hand:

    N=3, df(CAT)=2, avg_len=3, idf = ln((3-2+0.5)/(2+0.5)+1) = ln(1.6).
    doc0: tf=2, len=3 -> idf*2*2.2 / (2 + 1.2*(0.25+0.75*3/3))
    doc1: tf=1, len=2 -> idf*1*2.2 / (1 + 1.2*(0.25+0.75*2/3))
    doc2: no CAT -> 0
    """

    def test_idf(self, toy_index):
        assert toy_index.idf(CAT) == pytest.approx(math.log(1.6), abs=1e-15)

    def test_doc0(self, toy_index):
        expected = math.log(1.6) * 2 * 2.2 / 3.2
        assert toy_index.score([CAT], 0) == pytest.approx(expected, abs=1e-12)
        assert toy_index.score([CAT], 0) == pytest.approx(0.6462549901, abs=1e-9)

    def test_doc1(self, toy_index):
        expected = math.log(1.6) * 1 * 2.2 / 1.9
        assert toy_index.score([CAT], 1) == pytest.approx(expected, abs=1e-12)
        assert toy_index.score([CAT], 1) == pytest.approx(0.5442147286, abs=1e-9)

    def test_absent_term_contributes_zero(self, toy_index):
        assert toy_index.score([CAT], 2) == 0.0
        with_absent = toy_index.score([CAT, NEWT], 0)
        assert with_absent == pytest.approx(toy_index.score([CAT], 0), abs=1e-15)

    def test_empty_query(self, toy_index):
        assert toy_index.score([], 0) == 0.0

    def test_unknown_doc_id(self, toy_index):
        with pytest.raises(NotFoundError):
            toy_index.score([CAT], 3)

    def test_scores_matches_per_doc_score(self, toy_index):
        batch = toy_index.scores([CAT, DOG, DOG])
        singles = [toy_index.score([CAT, DOG, DOG], i) for i in range(3)]
        np.testing.assert_allclose(batch, singles, atol=1e-12)


class TestIndexInvariants:
    def test_avg_len_is_mean(self, toy_index):
        assert toy_index.avg_len == pytest.approx(np.mean(toy_index.doc_len))

    def test_posting_freqs_at_least_one(self, toy_index):
        for term, posting in toy_index.postings.items():
            assert all(f >= 1 for _, f in posting)

    def test_doc_freq_counts_docs_not_occurrences(self, toy_index):
        assert toy_index.doc_freq[CAT] == 2
        assert toy_index.doc_freq[DOG] == 2
        assert toy_index.doc_freq[EEL] == 1

    def test_empty_corpus_rejected(self):
        with pytest.raises(ConfigError):
            Bm25Index.from_tokens([], [])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            Bm25Index.from_tokens([[1]], [0, 1])

    def test_unseen_term_idf_zero(self, toy_index):
        assert toy_index.idf(999) == 0.0


@st.composite
def random_docs(draw):
    n = draw(st.integers(min_value=2, max_value=12))
    docs = [draw(st.lists(st.integers(min_value=0, max_value=9),
                          min_size=1, max_size=16)) for _ in range(n)]
    return docs


class TestAgainstBruteForce:
    @given(random_docs(), st.lists(st.integers(min_value=0, max_value=9),
                                   min_size=1, max_size=6))
    @settings(max_examples=40, deadline=None)
    def test_score_matches_direct_formula(self, docs, query):
        index = Bm25Index.from_tokens(docs, list(range(len(docs))))
        n = len(docs)
        avg = sum(len(d) for d in docs) / n
        for i, doc in enumerate(docs):
            expected = 0.0
            for t in query:
                tf = doc.count(t)
                if tf == 0:
                    continue
                df = sum(1 for d in docs if t in d)
                idf = math.log((n - df + 0.5) / (df + 0.5) + 1.0)
                norm = 1.2 * (1 - 0.75 + 0.75 * len(doc) / avg)
                expected += idf * tf * 2.2 / (tf + norm)
            assert index.score(query, i) == pytest.approx(expected, abs=1e-10)

    def test_self_query_dominates_subset_query(self):
        # fixed-length toy docs so the length normalizer is shared
        docs = [[1, 1, 2, 3], [1, 2, 2, 4], [3, 4, 5, 5]]
        index = Bm25Index.from_tokens(docs, [0, 1, 2])
        full = docs[0]
        subset = [1, 1, 2]
        assert index.score(full, 0) >= index.score(subset, 0)
