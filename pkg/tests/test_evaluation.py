"""Correlations, ranking, analogy, aggregation, and the linear probe.

scipy.stats serves as the independent oracle for the hand-rolled Pearson and
Spearman implementations.
"""

from __future__ import annotations

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from sen2pro.core import (
    AnalogyQuad,
    CombinedEmbedding,
    DegenerateInputError,
    EvalDataset,
    RankPool,
    ScoredPair,
    ValidationError,
)
from sen2pro.embedding import DistanceConfig
from sen2pro.evaluation import (
    CorrelationResult,
    RankResult,
    analogy_x,
    correlation,
    eval_analogy,
    eval_rank,
    eval_scored_pairs,
    probe_accuracy,
    probe_predict,
    system_score,
    train_probe,
)

PER_PAIR = DistanceConfig(alpha_mode="per_pair")


def _ce(mu, sigma=None, sid="c"):
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.zeros_like(mu) if sigma is None else np.asarray(sigma, dtype=np.float64)
    return CombinedEmbedding(sentence_id=sid, mu=mu, sigma_diag=sigma)


finite_floats = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


class TestCorrelation:
    def test_perfect_agreement(self):
        r = correlation([1.0, 2.0, 3.0, 4.0], [10.0, 20.0, 30.0, 40.0])
        assert r.spearman == pytest.approx(1.0)
        assert r.pearson == pytest.approx(1.0)
        assert r.n == 4

    def test_perfect_reversal(self):
        r = correlation([4.0, 3.0, 2.0, 1.0], [1.0, 2.0, 3.0, 4.0])
        assert r.spearman == pytest.approx(-1.0)

    def test_hand_value(self):
        r = correlation([1.0, 2.0, 3.0, 5.0], [1.0, 2.0, 3.0, 4.0])
        assert r.pearson == pytest.approx(0.9827, abs=5e-5)

    def test_zero_variance_degenerate(self):
        with pytest.raises(DegenerateInputError, match="degenerate input"):
            correlation([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_too_short_rejected(self):
        with pytest.raises(ValidationError):
            correlation([1.0], [2.0])

    @given(
        st.lists(finite_floats, min_size=3, max_size=40),
        st.integers(min_value=0, max_value=2**32 - 1),
    )
    @settings(max_examples=60)
    def test_matches_scipy(self, gold, seed):
        rng = np.random.default_rng(seed)
        pred = rng.normal(size=len(gold)).tolist()
        # all-equal gold is degenerate for ranks even when float rounding
        # leaves the variance a hair above zero
        if len(set(gold)) <= 1 or len(set(pred)) <= 1:
            return
        r = correlation(pred, gold)
        want_p = scipy.stats.pearsonr(pred, gold).statistic
        want_s = scipy.stats.spearmanr(pred, gold).statistic
        assert r.pearson == pytest.approx(want_p, abs=1e-12)
        assert r.spearman == pytest.approx(want_s, abs=1e-12)

    def test_matches_scipy_with_heavy_ties(self):
        pred = [1.0, 1.0, 2.0, 2.0, 2.0, 3.0, 1.0, 3.0]
        gold = [0.5, 0.5, 0.5, 1.0, 1.5, 1.5, 2.0, 2.5]
        r = correlation(pred, gold)
        assert r.spearman == pytest.approx(
            scipy.stats.spearmanr(pred, gold).statistic, abs=1e-12
        )

    @given(
        st.lists(finite_floats, min_size=4, max_size=25),
        st.integers(min_value=0, max_value=2**32 - 1),
    )
    @settings(max_examples=40)
    def test_spearman_invariant_under_monotone_transform(self, gold, seed):
        rng = np.random.default_rng(seed)
        pred = rng.normal(size=len(gold))
        if np.std(gold) == 0.0:
            return
        base = correlation(pred.tolist(), gold).spearman
        # strictly increasing transform of predictions preserves all ranks
        warped = (np.exp(pred / (1.0 + np.abs(pred).max()))).tolist()
        assert correlation(warped, gold).spearman == pytest.approx(base, abs=1e-12)

    def test_result_bounds_validated(self):
        with pytest.raises(ValidationError):
            CorrelationResult(spearman=1.5, pearson=0.0, n=3)


class TestEvalScoredPairs:
    def test_order_matching_pairs(self):
        ds = EvalDataset(
            kind="scored_pairs",
            records=(ScoredPair("a", "b", 1.0), ScoredPair("a", "c", 0.1)),
        )
        emb = {"a": _ce([0.0, 0.0]), "b": _ce([0.5, 0.0]), "c": _ce([5.0, 0.0])}
        r = eval_scored_pairs(ds, emb, PER_PAIR)
        assert r.spearman == pytest.approx(1.0)
        assert r.n == 2

    def test_missing_embedding_names_sentence(self):
        ds = EvalDataset(kind="scored_pairs", records=(ScoredPair("a", "zz", 0.5),) * 2)
        with pytest.raises(ValidationError, match="zz"):
            eval_scored_pairs(ds, {"a": _ce([1.0])}, PER_PAIR)

    def test_random_gold_near_zero_correlation(self):
        rng = np.random.default_rng(123)
        names = [f"s{i}" for i in range(80)]
        emb = {n: _ce(rng.normal(size=4), np.abs(rng.normal(size=4))) for n in names}
        records = []
        for _ in range(1000):
            i, j = rng.choice(80, size=2, replace=False)
            records.append(ScoredPair(names[i], names[j], float(rng.random())))
        ds = EvalDataset(kind="scored_pairs", records=tuple(records))
        assert abs(eval_scored_pairs(ds, emb, PER_PAIR).spearman) < 0.1

    def test_wrong_kind_rejected(self):
        ds = EvalDataset(kind="rank_pools", records=(RankPool("q", "p", ("p", "x")),))
        with pytest.raises(ValidationError):
            eval_scored_pairs(ds, {}, PER_PAIR)


class TestEvalRank:
    def test_exact_duplicate_is_rank_one(self):
        emb = {
            "q": _ce([0.0, 0.0]),
            "dup": _ce([0.0, 0.0]),
            "far": _ce([9.0, 0.0]),
            "farther": _ce([20.0, 0.0]),
        }
        ds = EvalDataset(
            kind="rank_pools", records=(RankPool("q", "dup", ("far", "dup", "farther")),)
        )
        r = eval_rank(ds, emb, PER_PAIR)
        assert r.mrr == pytest.approx(1.0)
        assert r.hits_at[1] == pytest.approx(1.0)

    def test_positive_always_second(self):
        emb = {"q": _ce([0.0]), "near": _ce([1.0]), "pos": _ce([2.0])}
        ds = EvalDataset(kind="rank_pools", records=(RankPool("q", "pos", ("pos", "near")),))
        r = eval_rank(ds, emb, PER_PAIR)
        assert r.mrr == pytest.approx(0.5)
        assert r.hits_at[1] == 0.0
        assert r.hits_at[3] == pytest.approx(1.0)

    def test_uniform_ranks_expectation(self):
        """Random geometry: MRR approaches sum(1/r)/10 ~ 0.293 for pool size 10."""
        rng = np.random.default_rng(7)
        pools = []
        emb = {}
        for p in range(500):
            names = [f"p{p}_{i}" for i in range(11)]
            for n in names:
                emb[n] = _ce(rng.normal(size=8), np.abs(rng.normal(size=8)))
            pools.append(RankPool(names[0], names[1], tuple(names[1:])))
        ds = EvalDataset(kind="rank_pools", records=tuple(pools))
        r = eval_rank(ds, emb, PER_PAIR)
        expected = sum(1.0 / k for k in range(1, 11)) / 10.0
        assert r.mrr == pytest.approx(expected, abs=0.03)

    def test_custom_hits_ks(self):
        emb = {"q": _ce([0.0]), "a": _ce([1.0]), "pos": _ce([2.0])}
        ds = EvalDataset(kind="rank_pools", records=(RankPool("q", "pos", ("pos", "a")),))
        r = eval_rank(ds, emb, PER_PAIR, hits_ks=(2,))
        assert set(r.hits_at) == {2}
        assert r.hits_at[2] == pytest.approx(1.0)


class TestAnalogy:
    def test_equal_pairs_exact_zero(self):
        a = _ce([0.3, 0.4])
        c = _ce([5.0, 1.0])
        assert analogy_x(a, a, c, c) == 0.0

    def test_orthogonal_pair_negative_root_two(self):
        a = _ce([1.0, 0.0])
        c, d = _ce([1.0, 0.0]), _ce([0.0, 1.0])
        assert analogy_x(a, a, c, d) == pytest.approx(-np.sqrt(2.0), abs=1e-12)

    def test_hand_example_positive_root_two(self):
        x = analogy_x(_ce([1.0, 0.0]), _ce([0.0, 1.0]), _ce([1.0, 0.0]), _ce([1.0, 0.0]))
        assert x == pytest.approx(np.sqrt(2.0), abs=1e-12)

    @given(
        st.integers(min_value=0, max_value=2**32 - 1),
        st.floats(min_value=0.01, max_value=100.0),
    )
    @settings(max_examples=40)
    def test_scale_invariance(self, seed, scale):
        """l2 normalization makes x invariant to rescaling any mu."""
        rng = np.random.default_rng(seed)
        vecs = [rng.normal(size=5) for _ in range(4)]
        ces = [_ce(v) for v in vecs]
        scaled = [_ce(v * scale) for v in vecs]
        x0 = analogy_x(*ces)
        x1 = analogy_x(*scaled)
        assert x1 == pytest.approx(x0, abs=1e-9)

    def test_zero_mu_degenerate(self):
        with pytest.raises(DegenerateInputError):
            analogy_x(_ce([0.0, 0.0]), _ce([1.0, 0.0]), _ce([1.0, 0.0]), _ce([1.0, 0.0]))

    def test_dataset_score_is_mean_absolute_x(self):
        emb = {
            "a": _ce([1.0, 0.0]),
            "b": _ce([0.0, 1.0]),
            "c": _ce([1.0, 1.0]),
        }
        ds = EvalDataset(
            kind="analogy_quads",
            records=(AnalogyQuad("a", "a", "c", "c"), AnalogyQuad("a", "b", "c", "c")),
        )
        score, xs = eval_analogy(ds, emb)
        assert xs[0] == 0.0
        assert score == pytest.approx(np.mean(np.abs(xs)))


class TestSystemScore:
    def test_identical_segments_max(self):
        emb = {"h": _ce([1.0, 2.0], [0.5, 0.5])}
        assert system_score([("h", "h")], emb, PER_PAIR) == 0.0

    def test_single_segment_equals_similarity(self):
        from sen2pro.embedding import similarity_score

        emb = {"h": _ce([1.0, 0.0], [1.0, 0.5]), "r": _ce([3.0, 1.0], [2.0, 0.25])}
        want = similarity_score(emb["h"], emb["r"], PER_PAIR)
        assert system_score([("h", "r")], emb, PER_PAIR) == pytest.approx(want)

    def test_dominated_system_scores_lower(self):
        emb = {
            "r1": _ce([0.0]),
            "r2": _ce([0.0]),
            "近": _ce([1.0]),
            "远": _ce([5.0]),
        }
        close = system_score([("近", "r1"), ("近", "r2")], emb, PER_PAIR)
        far = system_score([("远", "r1"), ("远", "r2")], emb, PER_PAIR)
        assert close >= far


class TestProbe:
    def _separable(self, rng, n_per=10):
        x0 = rng.normal(size=(n_per, 2)) + [4.0, 0.0]
        x1 = rng.normal(size=(n_per, 2)) + [-4.0, 0.0]
        feats = np.vstack([x0, x1])
        labels = [0] * n_per + [1] * n_per
        return list(feats), labels

    def test_separable_clusters_converge(self):
        rng = np.random.default_rng(0)
        feats, labels = self._separable(rng)
        probe = train_probe(feats, labels, 2, lr=0.1, epochs=200)
        assert probe_accuracy(probe, feats, labels) == 1.0

    def test_lr_zero_keeps_initialization(self):
        rng = np.random.default_rng(1)
        feats, labels = self._separable(rng)
        probe = train_probe(feats, labels, 2, lr=0.0, epochs=50)
        assert np.all(probe.weights == 0.0)
        assert np.all(probe.bias == 0.0)

    def test_duplicated_training_set_same_predictions(self):
        rng = np.random.default_rng(2)
        feats, labels = self._separable(rng)
        p1 = train_probe(feats, labels, 2)
        p2 = train_probe(feats + feats, labels + labels, 2)
        test = [rng.normal(size=2) * 3.0 for _ in range(50)]
        np.testing.assert_array_equal(probe_predict(p1, test), probe_predict(p2, test))

    def test_feature_rescaling_invariance_of_predictions(self):
        # z-scoring inside the probe absorbs per-feature affine rescaling
        rng = np.random.default_rng(3)
        feats, labels = self._separable(rng)
        scale, shift = np.array([100.0, 0.01]), np.array([-7.0, 3.0])
        p_raw = train_probe(feats, labels, 2)
        p_scaled = train_probe([f * scale + shift for f in feats], labels, 2)
        test = [rng.normal(size=2) * 3.0 for _ in range(50)]
        np.testing.assert_array_equal(
            probe_predict(p_raw, test),
            probe_predict(p_scaled, [t * scale + shift for t in test]),
        )

    def test_four_class_task(self):
        rng = np.random.default_rng(4)
        centers = np.array([[5.0, 0.0], [-5.0, 0.0], [0.0, 5.0], [0.0, -5.0]])
        feats, labels = [], []
        for c in range(4):
            for _ in range(10):
                feats.append(rng.normal(size=2) * 0.5 + centers[c])
                labels.append(c)
        probe = train_probe(feats, labels, 4)
        assert probe_accuracy(probe, feats, labels) == 1.0

    def test_missing_class_rejected(self):
        with pytest.raises(ValidationError):
            train_probe([np.zeros(2), np.ones(2)], [0, 0], 2)

    def test_accuracy_hand_scored(self):
        rng = np.random.default_rng(5)
        feats, labels = self._separable(rng, n_per=10)
        probe = train_probe(feats, labels, 2, lr=0.1, epochs=200)
        # 5 hand-picked points: 4 on the correct side, 1 forced wrong
        test_feats = [
            np.array([4.0, 0.0]),
            np.array([5.0, 1.0]),
            np.array([-4.0, 0.0]),
            np.array([-6.0, -1.0]),
            np.array([4.0, 0.0]),
        ]
        test_labels = [0, 0, 1, 1, 1]  # last one contradicts geometry
        assert probe_accuracy(probe, test_feats, test_labels) == pytest.approx(0.8)

    def test_perfect_and_constant_predictor_accuracy(self):
        rng = np.random.default_rng(6)
        feats, labels = self._separable(rng)
        probe = train_probe(feats, labels, 2)
        assert probe_accuracy(probe, feats, labels) == 1.0
        # untrained probe predicts class 0 everywhere: balanced 4-class -> 0.25
        zero_probe = train_probe(
            [np.ones(2)] * 4, [0, 1, 2, 3], 4, lr=0.0, epochs=1
        )
        quarter = probe_accuracy(zero_probe, [np.ones(2)] * 4, [0, 1, 2, 3])
        assert quarter == pytest.approx(0.25)


class TestRankResult:
    def test_bounds_validated(self):
        with pytest.raises(ValidationError):
            RankResult(mrr=1.2, hits_at={1: 0.5})
        with pytest.raises(ValidationError):
            RankResult(mrr=0.5, hits_at={1: -0.1})

    def test_hits_must_be_monotone_in_k(self):
        with pytest.raises(ValidationError):
            RankResult(mrr=0.5, hits_at={1: 0.9, 3: 0.4})
