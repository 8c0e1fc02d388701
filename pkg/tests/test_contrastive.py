"""Style pretraining loss and batch construction."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stylelab import autodiff as ad
from stylelab.bm25 import Bm25Index
from stylelab.contrastive import (StyleEncoder, build_batch, encode_batch,
                                  hard_negative_map, positive_mask,
                                  supcon_loss, supcon_loss_from_logits)
from stylelab.errors import ConfigError, ContractError, MiningError


def unit_rows(a: np.ndarray) -> np.ndarray:
    return a / np.linalg.norm(a, axis=1, keepdims=True)


class TestSupconHandCases:
    def test_two_same_author_docs_zero_loss(self):
        reps = ad.tensor(unit_rows(np.array([[1.0, 0.0], [1.0, 0.0]])))
        loss = supcon_loss(reps, [0, 0], tau=1.0)
        # the only non-self denominator term is the positive itself
        assert loss.item() == pytest.approx(0.0, abs=1e-12)

    def test_three_doc_hand_value(self):
        """Authors A,A,B with r0=[1,0], r1=[0,1], r2=unit diagonal, tau=1.

        Anchor 0: positive sim 0, negative sim 1/sqrt(2)
          -> -log(1 / (1 + e^{1/sqrt 2})); anchor 1 symmetric; anchor 2
          has no positive and is excluded.
        """
        r = np.array([[1.0, 0.0], [0.0, 1.0],
                      [math.sqrt(0.5), math.sqrt(0.5)]])
        loss = supcon_loss(ad.tensor(r), [0, 0, 1], tau=1.0)
        per_anchor = math.log(1.0 + math.exp(math.sqrt(0.5)))
        assert loss.item() == pytest.approx(2 * per_anchor, abs=1e-12)
        assert loss.item() == pytest.approx(2.2158806153145, abs=1e-10)

    def test_duplicate_negative_increases_loss(self):
        base = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        bigger = np.vstack([base, [0.0, 1.0]])
        l_base = supcon_loss(ad.tensor(base), [0, 0, 1], tau=0.5).item()
        l_big = supcon_loss(ad.tensor(bigger), [0, 0, 1, 1], tau=0.5).item()
        assert l_big > l_base

    def test_temperature_must_be_positive(self):
        reps = ad.tensor(np.eye(2))
        with pytest.raises(ConfigError):
            supcon_loss(reps, [0, 0], tau=0.0)

    def test_include_self_matches_printed_form(self):
        r = unit_rows(np.array([[1.0, 0.2], [0.3, 1.0], [-1.0, 0.1]]))
        sims = r @ r.T
        tau = 0.7
        expected = 0.0
        for i in range(3):
            for j in range(3):
                if i != j and [0, 0, 1][i] == [0, 0, 1][j]:
                    denom = np.exp(sims[i] / tau).sum()  # includes k = i
                    expected -= math.log(math.exp(sims[i, j] / tau) / denom)
        got = supcon_loss(ad.tensor(r), [0, 0, 1], tau=tau, include_self=True)
        assert got.item() == pytest.approx(expected, abs=1e-10)


class TestSupconProperties:
    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=25, deadline=None)
    def test_tau_scaling_identity(self, seed):
        rng = np.random.default_rng(seed)
        r = unit_rows(rng.normal(size=(5, 4)))
        authors = rng.integers(0, 2, size=5).tolist()
        if len(set(authors)) == 1 or authors.count(authors[0]) == 5:
            authors[0] = 1 - authors[0]
        tau = float(rng.uniform(0.02, 2.0))
        via_reps = supcon_loss(ad.tensor(r), authors, tau=tau).item()
        scaled = ad.div(ad.tensor(r @ r.T), tau)
        via_logits = supcon_loss_from_logits(scaled, authors).item()
        assert via_reps == via_logits

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=25, deadline=None)
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        r = unit_rows(rng.normal(size=(6, 3)))
        authors = [0, 0, 1, 1, 2, 2]
        perm = rng.permutation(6)
        base = supcon_loss(ad.tensor(r), authors, tau=0.3).item()
        shuffled = supcon_loss(ad.tensor(r[perm]),
                               [authors[i] for i in perm], tau=0.3).item()
        assert shuffled == pytest.approx(base, rel=1e-12)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=15, deadline=None)
    def test_loss_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        r = unit_rows(rng.normal(size=(4, 3)))
        loss = supcon_loss(ad.tensor(r), [0, 0, 1, 1], tau=0.5)
        assert loss.item() >= -1e-12

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        reps = ad.tensor(unit_rows(rng.normal(size=(4, 3))), requires_grad=True)
        err = ad.grad_check(
            lambda: supcon_loss(ad.l2_normalize(reps), [0, 0, 1, 1], tau=0.5),
            [reps])
        assert err < 1e-4

    def test_positive_mask_diagonal(self):
        m = positive_mask([0, 0, 1])
        assert m[0, 0] == 0 and m[1, 1] == 0
        assert m[0, 1] == 1 and m[1, 0] == 1 and m[0, 2] == 0
        assert positive_mask([0, 0], include_self=True)[0, 0] == 1


class TestEncoder:
    def test_unit_norm_output(self, tiny_corpus, rng):
        enc = StyleEncoder(rng, tiny_corpus.tokenizer.vocab_size, hidden=16,
                           n_layers=1, out_dim=8)
        for doc in tiny_corpus.documents[:5]:
            v = enc.encode_vector(doc.tokens)
            assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-9)

    def test_empty_document_rejected(self, rng):
        enc = StyleEncoder(rng, 32, hidden=8, n_layers=1, out_dim=4)
        with pytest.raises(ContractError):
            enc.encode([])

    def test_deterministic(self, tiny_corpus, rng):
        enc = StyleEncoder(rng, tiny_corpus.tokenizer.vocab_size, hidden=16,
                           n_layers=1, out_dim=8)
        tokens = tiny_corpus.documents[0].tokens
        np.testing.assert_array_equal(enc.encode_vector(tokens),
                                      enc.encode_vector(tokens))

    def test_representation_independent_of_batch_company(self, tiny_corpus, rng):
        enc = StyleEncoder(rng, tiny_corpus.tokenizer.vocab_size, hidden=16,
                           n_layers=1, out_dim=8)
        alone = enc.encode_vector(tiny_corpus.documents[0].tokens)
        batch = encode_batch(enc, tiny_corpus, [0, 1, 2]).data
        np.testing.assert_allclose(batch[0], alone, atol=1e-12)

    def test_bidirectional_context(self, rng):
        """A suffix change must reach prefix hidden states."""
        enc = StyleEncoder(rng, 32, hidden=16, n_layers=1, out_dim=8)
        h1 = enc.trunk.hidden_states([7, 8, 9]).data
        h2 = enc.trunk.hidden_states([7, 8, 10]).data
        assert not np.allclose(h1[0], h2[0])


class TestBatchConstruction:
    def _index(self, corpus, pool):
        docs = [corpus.doc(i).tokens for i in pool]
        authors = [corpus.doc(i).author_id for i in pool]
        return Bm25Index.from_tokens(docs, authors)

    def test_k_zero_only_anchors_and_positives(self, tiny_corpus, rng):
        pool = [d.id for d in tiny_corpus.documents]
        batch = build_batch(tiny_corpus, self._index(tiny_corpus, pool), pool,
                            rng, batch_size=4, k=0)
        assert len(batch.doc_ids) <= 8
        authors = [tiny_corpus.doc(i).author_id for i in batch.doc_ids]
        for row in batch.anchor_rows:
            partners = [r for r, a in enumerate(authors)
                        if a == authors[row] and r != row]
            assert partners

    def test_negatives_never_share_author(self, small_corpus, rng):
        pool = [d.id for d in small_corpus.documents]
        index = self._index(small_corpus, pool)
        neg_map = hard_negative_map(small_corpus, index, pool, 3)
        for p, negs in neg_map.items():
            anchor_author = small_corpus.doc(pool[p]).author_id
            for n in negs:
                assert small_corpus.doc(pool[n]).author_id != anchor_author

    def test_negatives_match_brute_force(self, tiny_corpus):
        pool = [d.id for d in tiny_corpus.documents]
        index = self._index(tiny_corpus, pool)
        for p, doc_id in enumerate(pool):
            doc = tiny_corpus.doc(doc_id)
            got = hard_negative_map(tiny_corpus, index, pool, 2)[p]
            scores = index.scores(doc.tokens)
            order = sorted(
                (i for i in range(len(pool))
                 if tiny_corpus.doc(pool[i]).author_id != doc.author_id),
                key=lambda i: (-scores[i], i))
            assert got == order[:2]

    def test_batch_too_large_raises(self, tiny_corpus, rng):
        pool = [d.id for d in tiny_corpus.documents]
        with pytest.raises(MiningError):
            build_batch(tiny_corpus, self._index(tiny_corpus, pool), pool,
                        rng, batch_size=len(pool) + 1, k=0)

    def test_index_pool_mismatch_rejected(self, tiny_corpus, rng):
        pool = [d.id for d in tiny_corpus.documents]
        index = self._index(tiny_corpus, pool[:-1])
        with pytest.raises(ConfigError):
            build_batch(tiny_corpus, index, pool, rng, batch_size=2, k=0)


class TestPretrainLoop:
    def _cfg(self, **kw):
        from stylelab.config import PretrainConfig
        base = dict(epochs=1, hidden=16, n_layers=1, out_dim=8,
                    batch_anchors=4, k_negatives=1)
        base.update(kw)
        return PretrainConfig(**base)

    def test_zero_lr_leaves_parameters_unchanged(self, tiny_corpus):
        from stylelab.training import pretrain_style
        pool = [d.id for d in tiny_corpus.documents]
        enc, _ = pretrain_style(tiny_corpus, pool, self._cfg(lr=0.0), seed=1,
                                max_positions=600)
        rng = np.random.default_rng(1)
        fresh = StyleEncoder(rng, tiny_corpus.tokenizer.vocab_size, hidden=16,
                             n_layers=1, out_dim=8, max_positions=600)
        for name, p in enc.params().items():
            np.testing.assert_array_equal(p.data, fresh.params()[name].data)

    def test_loss_decreases_and_log_is_complete(self, tiny_corpus):
        from stylelab.training import pretrain_style
        pool = [d.id for d in tiny_corpus.documents]
        cfg = self._cfg(epochs=8)
        _, rows = pretrain_style(tiny_corpus, pool, cfg, seed=2,
                                 max_positions=600)
        assert [r.step for r in rows] == list(range(len(rows)))
        assert all(r.lr == cfg.lr and r.seed == 2 for r in rows)
        head = np.mean([r.loss for r in rows[:3]])
        tail = np.mean([r.loss for r in rows[-3:]])
        assert tail < head

    def test_training_separates_authors(self, tiny_corpus):
        from stylelab.training import pretrain_style
        pool = [d.id for d in tiny_corpus.documents]
        enc, _ = pretrain_style(tiny_corpus, pool, self._cfg(epochs=8),
                                seed=3, max_positions=600)
        vecs = {i: enc.encode_vector(tiny_corpus.doc(i).tokens) for i in pool}
        same, diff = [], []
        for i in pool:
            for j in pool:
                if j <= i:
                    continue
                sim = float(vecs[i] @ vecs[j])
                ai = tiny_corpus.doc(i).author_id
                aj = tiny_corpus.doc(j).author_id
                (same if ai == aj else diff).append(sim)
        assert np.mean(same) > np.mean(diff)
