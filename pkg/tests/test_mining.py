"""Hard-negative and hard-pair mining against exhaustive enumeration."""

import numpy as np
import pytest

from stylelab.bm25 import Bm25Index
from stylelab.corpus import generate_corpus
from stylelab.errors import MiningError, ParseError
from stylelab.mining import (DIFF_AUTHOR, DIFF_CONTENT, SAME_AUTHOR,
                             SAME_CONTENT, PairRecord, cosine_matrix,
                             load_pairs, mine_hard_negatives,
                             mine_hard_negatives_tokens, mine_hard_pairs,
                             save_pairs, synth_explanations, tfidf_embeddings)


def brute_force_negatives(index, query, anchor_author, k):
    scores = index.scores(query)
    order = sorted((i for i in range(len(index))
                    if index.doc_authors[i] != anchor_author),
                   key=lambda i: (-scores[i], i))
    return order[:k]


def brute_force_pairs(corpus, emb, assign, theta_lo, theta_hi):
    sim = cosine_matrix(emb)
    fam1, fam2 = [], []
    n = len(corpus.documents)
    for i in range(n):
        for j in range(i + 1, n):
            a, b = corpus.doc(i), corpus.doc(j)
            if (a.author_id == b.author_id and assign[i] != assign[j]
                    and sim[i, j] < theta_lo):
                fam1.append((i, j))
            if (a.author_id != b.author_id and assign[i] == assign[j]
                    and sim[i, j] > theta_hi):
                fam2.append((i, j))
    return fam1, fam2


class TestHardNegatives:
    def test_matches_brute_force_across_seeds(self):
        for seed in range(4):
            corpus = generate_corpus(seed, 5, 2, 10, 0.8, 0.8)
            index = Bm25Index.from_corpus(corpus)
            for doc in corpus.documents[::7]:
                got = mine_hard_negatives(index, doc, 3)
                want = brute_force_negatives(index, doc.tokens,
                                             doc.author_id, 3)
                assert got == want

    def test_ties_prefer_lower_doc_id(self):
        # identical docs score identically, forcing the tie-break
        docs = [[7, 8], [9, 9], [9, 9], [9, 9]]
        index = Bm25Index.from_tokens(docs, [0, 1, 2, 3])
        got = mine_hard_negatives_tokens(index, [9], anchor_author=0, k=2)
        assert got == [1, 2]

    def test_excludes_anchor_author(self):
        corpus = generate_corpus(1, 4, 2, 10, 1.0, 1.0)
        index = Bm25Index.from_corpus(corpus)
        for doc in corpus.documents[::5]:
            for n in mine_hard_negatives(index, doc, 5):
                assert corpus.doc(n).author_id != doc.author_id

    def test_k_contracts(self):
        docs = [[1, 2], [3, 4], [5, 6]]
        index = Bm25Index.from_tokens(docs, [0, 1, 1])
        with pytest.raises(MiningError):
            mine_hard_negatives_tokens(index, [1], anchor_author=0, k=0)
        with pytest.raises(MiningError):
            mine_hard_negatives_tokens(index, [1], anchor_author=0, k=3)


class TestHardPairs:
    def _setup(self, seed):
        corpus = generate_corpus(seed, 6, 3, 12, 0.7, 0.9)
        emb = tfidf_embeddings(corpus)
        rng = np.random.default_rng(seed)
        assign = rng.integers(0, 3, size=len(corpus.documents))
        return corpus, emb, assign

    def test_matches_exhaustive_enumeration(self):
        for seed in range(4):
            corpus, emb, assign = self._setup(seed)
            res = mine_hard_pairs(corpus, emb, assign, quota=10_000,
                                  theta_lo=0.9, theta_hi=0.5)
            fam1, fam2 = brute_force_pairs(corpus, emb, assign, 0.9, 0.5)
            got1 = [(p.doc_i, p.doc_j) for p in res.pairs
                    if p.style_label == SAME_AUTHOR]
            got2 = [(p.doc_i, p.doc_j) for p in res.pairs
                    if p.style_label == DIFF_AUTHOR]
            assert got1 == fam1
            assert got2 == fam2

    def test_pairs_ascend_and_labels_consistent(self):
        corpus, emb, assign = self._setup(2)
        res = mine_hard_pairs(corpus, emb, assign, quota=50,
                              theta_lo=0.9, theta_hi=0.5)
        for p in res.pairs:
            assert p.doc_i < p.doc_j
            same = corpus.doc(p.doc_i).author_id == corpus.doc(p.doc_j).author_id
            assert (p.style_label == SAME_AUTHOR) == same
            if p.style_label == SAME_AUTHOR:
                assert p.content_label == DIFF_CONTENT
                assert assign[p.doc_i] != assign[p.doc_j]
            else:
                assert p.content_label == SAME_CONTENT
                assert assign[p.doc_i] == assign[p.doc_j]

    def test_quota_truncates_each_family(self):
        corpus, emb, assign = self._setup(3)
        full = mine_hard_pairs(corpus, emb, assign, quota=10_000,
                               theta_lo=0.95, theta_hi=0.4)
        capped = mine_hard_pairs(corpus, emb, assign, quota=5,
                                 theta_lo=0.95, theta_hi=0.4)
        fam1_full = [p for p in full.pairs if p.style_label == SAME_AUTHOR]
        fam2_full = [p for p in full.pairs if p.style_label == DIFF_AUTHOR]
        fam1_cap = [p for p in capped.pairs if p.style_label == SAME_AUTHOR]
        fam2_cap = [p for p in capped.pairs if p.style_label == DIFF_AUTHOR]
        assert fam1_cap == fam1_full[:5]
        assert fam2_cap == fam2_full[:5]

    def test_shortfall_reporting(self):
        corpus, emb, assign = self._setup(1)
        # impossible thresholds leave both families empty
        res = mine_hard_pairs(corpus, emb, assign, quota=7,
                              theta_lo=-1.0, theta_hi=2.0)
        assert res.pairs == []
        assert res.shortfall_same_author == 7
        assert res.shortfall_diff_author == 7
        assert res.warning_count == 2

    def test_doc_ids_subset_restricts_both_families(self):
        corpus, emb, assign = self._setup(0)
        subset = [d.id for d in corpus.documents if d.id % 2 == 0]
        res = mine_hard_pairs(corpus, emb, assign, quota=10_000,
                              theta_lo=0.9, theta_hi=0.5, doc_ids=subset)
        allowed = set(subset)
        for p in res.pairs:
            assert p.doc_i in allowed and p.doc_j in allowed

    def test_validation_errors(self):
        corpus, emb, assign = self._setup(0)
        with pytest.raises(MiningError):
            mine_hard_pairs(corpus, emb[:-1], assign, quota=5)
        with pytest.raises(MiningError):
            mine_hard_pairs(corpus, emb, assign, quota=0)


class TestEmbeddings:
    def test_tfidf_rows_unit_norm(self):
        corpus = generate_corpus(0, 3, 2, 10, 1.0, 1.0)
        emb = tfidf_embeddings(corpus)
        assert emb.shape[0] == len(corpus.documents)
        np.testing.assert_allclose(np.linalg.norm(emb, axis=1), 1.0,
                                   atol=1e-12)

    def test_cosine_matrix_properties(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(6, 3))
        sim = cosine_matrix(x)
        np.testing.assert_allclose(sim, sim.T, atol=1e-12)
        np.testing.assert_allclose(np.diag(sim), 1.0, atol=1e-12)
        assert np.all(sim <= 1.0 + 1e-12) and np.all(sim >= -1.0 - 1e-12)

    def test_cosine_matrix_zero_row_safe(self):
        x = np.array([[0.0, 0.0], [1.0, 0.0]])
        sim = cosine_matrix(x)
        assert sim[0, 1] == 0.0


class TestExplanations:
    def test_same_author_pair_describes_shared_factors(self):
        corpus = generate_corpus(0, 4, 2, 10, 1.0, 1.0)
        a = corpus.authors[1]
        pair = PairRecord(a[0], a[1], SAME_AUTHOR, DIFF_CONTENT)
        filled = synth_explanations(pair, corpus)
        assert filled.style_explanation.startswith("both texts show ")
        if corpus.doc(a[0]).topic_id == corpus.doc(a[1]).topic_id:
            assert filled.content_explanation.startswith("both texts discuss")
        else:
            assert "text 1 discusses" in filled.content_explanation

    def test_diff_author_pair_contrasts_factors(self):
        corpus = generate_corpus(0, 4, 2, 10, 1.0, 1.0)
        i = corpus.authors[0][0]
        j = corpus.authors[2][0]
        filled = synth_explanations(
            PairRecord(i, j, DIFF_AUTHOR, SAME_CONTENT), corpus)
        assert "text 1 shows" in filled.style_explanation
        assert "while text 2 shows" in filled.style_explanation

    def test_deterministic(self):
        corpus = generate_corpus(0, 4, 2, 10, 1.0, 1.0)
        pair = PairRecord(0, 11, DIFF_AUTHOR, SAME_CONTENT)
        a = synth_explanations(pair, corpus)
        b = synth_explanations(pair, corpus)
        assert a == b


class TestPairIo:
    def test_round_trip(self, tmp_path):
        pairs = [
            PairRecord(0, 3, SAME_AUTHOR, DIFF_CONTENT, "habit match",
                       "subjects differ"),
            PairRecord(1, 2, DIFF_AUTHOR, SAME_CONTENT, "rhythm differs",
                       "same subject"),
        ]
        path = tmp_path / "pairs.jsonl"
        save_pairs(pairs, path)
        assert load_pairs(path) == pairs

    def test_bad_json_raises(self, tmp_path):
        path = tmp_path / "pairs.jsonl"
        path.write_text('{"doc_i": 0, "doc_j": 1\nnot json\n')
        with pytest.raises(ParseError):
            load_pairs(path)
