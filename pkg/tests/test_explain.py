import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairdrop.explain import (
    KernelConfig,
    TabularStats,
    exact_shapley,
    fit_weighted_surrogate,
    lime_explain,
    lime_explain_text,
    lime_kernel,
    map_to_feature_space,
    shap_explain,
    shap_explain_text,
    shap_kernel,
)
from fairdrop.models import TrainConfig, train
from tests.conftest import StubModel, StubTextModel, mixed_dataset, numeric_dataset


class TestKernels:
    def test_lime_kernel_values(self):
        assert lime_kernel(0.0, 2.0) == 1.0
        assert abs(lime_kernel(1.5, 1.5) - math.exp(-1)) < 1e-12
        assert abs(lime_kernel(2.0, 1.0) - math.exp(-4)) < 1e-12

    def test_lime_kernel_requires_positive_sigma(self):
        with pytest.raises(ValueError):
            lime_kernel(1.0, 0.0)

    @given(st.floats(0.0, 10.0), st.floats(0.01, 10.0), st.floats(0.01, 5.0))
    @settings(max_examples=50, deadline=None)
    def test_lime_kernel_decreasing(self, delta, step, sigma):
        assert lime_kernel(delta + step, sigma) < lime_kernel(delta, sigma) + 1e-15

    def test_shap_kernel_values(self):
        assert abs(shap_kernel(4, 1) - 0.25) < 1e-15
        assert abs(shap_kernel(4, 2) - 0.125) < 1e-15

    def test_shap_kernel_symmetry_and_minimum(self):
        for M in range(3, 12):
            weights = [shap_kernel(M, s) for s in range(1, M)]
            for s in range(1, M):
                assert shap_kernel(M, s) == pytest.approx(shap_kernel(M, M - s))
            assert np.argmin(weights) + 1 in (M // 2, M - M // 2)

    def test_shap_kernel_endpoints_infinite(self):
        assert shap_kernel(5, 0) == math.inf
        assert shap_kernel(5, 5) == math.inf
        with pytest.raises(ValueError):
            shap_kernel(5, 6)


class TestMapToFeatureSpace:
    def test_all_ones_is_identity(self):
        ds = mixed_dataset(40, seed=0)
        stats = TabularStats.from_dataset(ds)
        x = ds.values[7]
        rng = np.random.default_rng(0)
        rows = map_to_feature_space(x, np.ones(3), stats, ds.feature_names, rng)
        np.testing.assert_array_equal(rows[0], x)

    def test_all_zeros_resampled_deterministically(self):
        ds = mixed_dataset(40, seed=1)
        stats = TabularStats.from_dataset(ds)
        x = ds.values[3]
        r1 = map_to_feature_space(x, np.zeros(3), stats, ds.feature_names,
                                  np.random.default_rng(9))
        r2 = map_to_feature_space(x, np.zeros(3), stats, ds.feature_names,
                                  np.random.default_rng(9))
        np.testing.assert_array_equal(r1, r2)
        # every cell comes from the observed training marginal
        for j, name in enumerate(ds.feature_names):
            assert r1[0, j] in stats.columns[name]

    def test_quartile_bins(self):
        ds = mixed_dataset(200, seed=2)
        stats = TabularStats.from_dataset(ds)
        edges = stats.quartiles["x1"]
        assert len(edges) == 3
        assert stats.bin_of("x1", edges[0] - 1.0) == 0
        assert stats.bin_of("x1", edges[2] + 1.0) == 3


class TestWeightedSurrogate:
    def test_exact_linear_recovery(self):
        rng = np.random.default_rng(0)
        Z = rng.random((200, 4))
        coef = np.array([0.4, -1.2, 0.0, 2.5])
        y = 0.3 + Z @ coef
        w = rng.uniform(0.1, 1.0, 200)
        exp = fit_weighted_surrogate(Z, y, w)
        np.testing.assert_allclose(exp.weights, coef, atol=1e-6)
        assert abs(exp.intercept - 0.3) < 1e-6
        assert exp.fidelity >= 1.0 - 1e-9

    def test_constant_targets(self):
        Z = np.random.default_rng(1).random((50, 3))
        exp = fit_weighted_surrogate(Z, np.full(50, 0.7), np.ones(50))
        np.testing.assert_allclose(exp.weights, 0.0, atol=1e-9)
        assert abs(exp.intercept - 0.7) < 1e-9
        assert exp.fidelity == 1.0

    def test_doubled_weight_equals_duplicated_rows(self):
        rng = np.random.default_rng(2)
        Z = rng.random((40, 3))
        y = rng.random(40)
        w = rng.uniform(0.5, 2.0, 40)
        dup_row = Z[5]
        # route A: double the weight of row 5
        wA = w.copy()
        wA[5] *= 2
        a = fit_weighted_surrogate(Z, y, wA)
        # route B: append a second unit-weight copy (independent oracle path)
        Zb = np.vstack([Z, dup_row])
        yb = np.append(y, y[5])
        wb = np.append(w, w[5])
        b = fit_weighted_surrogate(Zb, yb, wb)
        np.testing.assert_allclose(a.weights, b.weights, atol=1e-9)
        np.testing.assert_allclose(a.intercept, b.intercept, atol=1e-9)

    def test_complexity_limit_support_size(self):
        rng = np.random.default_rng(3)
        Z = rng.random((100, 5))
        y = 2.0 * Z[:, 1] - 1.5 * Z[:, 3] + 0.01 * rng.standard_normal(100)
        exp = fit_weighted_surrogate(Z, y, np.ones(100), complexity_limit=2)
        assert np.count_nonzero(exp.weights) <= 2
        assert set(np.flatnonzero(exp.weights)) == {1, 3}

    def test_rank_deficient_ridge_fallback(self):
        rng = np.random.default_rng(4)
        col = rng.random(30)
        Z = np.column_stack([col, col])  # perfectly collinear
        y = col * 2.0
        exp = fit_weighted_surrogate(Z, y, np.ones(30))
        assert exp.degraded
        assert np.isfinite(exp.weights).all()

    def test_needs_enough_rows(self):
        with pytest.raises(ValueError):
            fit_weighted_surrogate(np.eye(3), np.zeros(3), np.ones(3))


def ignoring_model(d, ignored, seed=0):
    """Model provably independent of one input column."""
    rng = np.random.default_rng(seed)
    coef = rng.uniform(0.5, 1.5, size=d)
    coef[ignored] = 0.0

    def fn(X):
        return 1.0 / (1.0 + np.exp(-(X @ coef - coef.sum() / 2)))

    return StubModel(fn, [f"f{j}" for j in range(d)])


class TestLimeTabular:
    def test_ignored_feature_gets_negligible_weight(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(150, 5))
        ds = numeric_dataset(X, (X[:, 0] > 0).astype(int))
        stats = TabularStats.from_dataset(ds)
        model = ignoring_model(5, ignored=2)
        ratios = []
        for seed in range(20):
            cfg = KernelConfig("lime", n_samples=1500, seed=seed)
            exp = lime_explain(model, X[0], cfg, stats)
            ratios.append(abs(exp.weights[2]) / np.abs(exp.weights).max())
        assert np.median(ratios) <= 0.05

    def test_k_one_single_weight(self):
        ds = mixed_dataset(60, seed=1)
        stats = TabularStats.from_dataset(ds)
        model = train(TrainConfig("lr", seed=0), ds)
        cfg = KernelConfig("lime", n_samples=800, seed=0, complexity_limit=1)
        exp = lime_explain(model, ds.values[0], cfg, stats)
        assert np.count_nonzero(exp.weights) == 1

    def test_deterministic_under_seed(self):
        ds = mixed_dataset(60, seed=2)
        stats = TabularStats.from_dataset(ds)
        model = train(TrainConfig("rf", seed=0, n_trees=10), ds)
        cfg = KernelConfig("lime", n_samples=500, seed=11)
        e1 = lime_explain(model, ds.values[4], cfg, stats)
        e2 = lime_explain(model, ds.values[4], cfg, stats)
        np.testing.assert_array_equal(e1.weights, e2.weights)


class TestLimeText:
    def test_dominant_word_tops(self):
        # model keyed to one strong token
        model = StubTextModel(lambda d: 0.9 if "grault" in d else 0.2)
        tokens = ["foo", "grault", "baz", "qux", "foo"]
        cfg = KernelConfig("lime", n_samples=600, seed=0)
        exp = lime_explain_text(model, tokens, cfg)
        top = exp.feature_names[int(np.argmax(np.abs(exp.weights)))]
        assert top == "grault"

    def test_linear_model_recovered_exactly(self):
        words = ["alpha", "beta", "gamma", "delta"]
        coefs = {"alpha": 0.30, "beta": -0.15, "gamma": 0.20, "delta": 0.05}

        def fn(doc):
            present = set(doc)
            return 0.4 + sum(c for w, c in coefs.items() if w in present)

        model = StubTextModel(fn)
        cfg = KernelConfig("lime", n_samples=800, seed=3)
        exp = lime_explain_text(model, words, cfg)
        for w, c in coefs.items():
            got = exp.weights[exp.feature_names.index(w)]
            assert abs(got - c) < 1e-8
        assert exp.fidelity >= 1.0 - 1e-9

    def test_empty_document(self):
        model = StubTextModel(lambda d: 0.5)
        exp = lime_explain_text(model, [], KernelConfig("lime", seed=0))
        assert exp.feature_names == []


class TestShap:
    def _dataset_and_stats(self, d, n=120, seed=0):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, d))
        ds = numeric_dataset(X, (X[:, 0] > 0).astype(int))
        return ds, TabularStats.from_dataset(ds)

    def test_efficiency_constraint(self):
        ds, stats = self._dataset_and_stats(6)
        model = train(TrainConfig("rf", seed=0, n_trees=15), ds)
        cfg = KernelConfig("shap", n_samples=200, seed=0, background_size=20)
        x = ds.values[0]
        exp = shap_explain(model, x, cfg, stats)
        fx = model.predict_proba(x[None])[0, 1]
        assert abs(exp.intercept + exp.weights.sum() - fx) < 1e-9

    def test_symmetric_model_equal_weights(self):
        model = StubModel(lambda X: 0.2 + 0.3 * (X[:, 0] + X[:, 1]),
                          ["f0", "f1"])
        # identical per-feature sample marginals, as the symmetry axiom needs
        col = np.array([-0.5, 0.0, 0.25, 0.5])
        bg = np.column_stack([col, col])
        ds, stats = self._dataset_and_stats(2, seed=1)
        cfg = KernelConfig("shap", n_samples=64, seed=0)
        x = np.array([1.0, 1.0])
        exp = shap_explain(model, x, cfg, stats, background=bg)
        phi = exact_shapley(model, x, bg)
        assert abs(phi[0] - phi[1]) < 1e-9  # identical roles
        np.testing.assert_allclose(exp.weights, phi, atol=1e-9)

    def test_full_enumeration_matches_exact_shapley(self):
        for seed, kind in [(0, "lr"), (1, "rf")]:
            ds, stats = self._dataset_and_stats(7, seed=seed)
            model = train(TrainConfig(kind, seed=seed, n_trees=10), ds)
            rng = np.random.default_rng(seed + 10)
            bg = stats.sample_background(12, rng)
            cfg = KernelConfig("shap", n_samples=256, seed=seed)
            x = ds.values[5]
            exp = shap_explain(model, x, cfg, stats, background=bg)
            phi = exact_shapley(model, x, bg)
            np.testing.assert_allclose(exp.weights, phi, atol=1e-6)

    def test_sampled_path_close_to_exact(self):
        ds, stats = self._dataset_and_stats(12, seed=2)
        model = train(TrainConfig("lr", seed=0), ds)
        rng = np.random.default_rng(3)
        bg = stats.sample_background(10, rng)
        cfg = KernelConfig("shap", n_samples=3000, seed=0)  # 2^12 > 3000
        x = ds.values[1]
        exp = shap_explain(model, x, cfg, stats, background=bg)
        phi = exact_shapley(model, x, bg)
        assert np.max(np.abs(exp.weights - phi)) < 0.05
        fx = model.predict_proba(x[None])[0, 1]
        assert abs(exp.intercept + exp.weights.sum() - fx) < 1e-9

    def test_deterministic(self):
        ds, stats = self._dataset_and_stats(5, seed=3)
        model = train(TrainConfig("rf", seed=1, n_trees=10), ds)
        cfg = KernelConfig("shap", n_samples=100, seed=21, background_size=15)
        e1 = shap_explain(model, ds.values[2], cfg, stats)
        e2 = shap_explain(model, ds.values[2], cfg, stats)
        np.testing.assert_array_equal(e1.weights, e2.weights)

    def test_single_feature(self):
        ds, stats = self._dataset_and_stats(1, seed=4)
        model = StubModel(lambda X: 0.5 + 0.1 * X[:, 0], ["f0"])
        cfg = KernelConfig("shap", n_samples=16, seed=0, background_size=10)
        x = np.array([2.0])
        exp = shap_explain(model, x, cfg, stats)
        fx = model.predict_proba(x[None])[0, 1]
        assert abs(exp.intercept + exp.weights.sum() - fx) < 1e-12


class TestShapText:
    def test_efficiency_and_word_order(self):
        model = StubTextModel(
            lambda d: 0.1 + 0.5 * ("slur" in d) + 0.2 * ("mild" in d)
        )
        tokens = ["mild", "slur", "other", "slur"]
        cfg = KernelConfig("shap", n_samples=64, seed=0)
        exp = shap_explain_text(model, tokens, cfg)
        f_full = 0.8
        assert abs(exp.intercept + exp.weights.sum() - f_full) < 1e-9
        top = exp.feature_names[int(np.argmax(exp.weights))]
        assert top == "slur"


class TestExactShapley:
    def test_additive_model_marginals(self):
        coef = np.array([0.2, -0.1, 0.05])
        model = StubModel(lambda X: 0.5 + X @ coef, ["a", "b", "c"])
        x = np.array([1.0, 1.0, 1.0])
        bg = np.zeros((4, 3))
        phi = exact_shapley(model, x, bg)
        np.testing.assert_allclose(phi, coef, atol=1e-12)

    def test_dummy_feature_zero(self):
        model = StubModel(lambda X: 0.3 + 0.4 * X[:, 0], ["a", "b"])
        rng = np.random.default_rng(5)
        phi = exact_shapley(model, np.array([1.0, 9.9]), rng.normal(size=(8, 2)))
        assert abs(phi[1]) < 1e-12

    def test_majority_function_symmetric_split(self):
        # x = (1,1,1) against the uniform 8-row binary background:
        # v(empty) = 1/2, v(full) = 1, so each feature gets 1/6 by symmetry
        def majority(X):
            return (X.sum(axis=1) >= 2).astype(float)

        model = StubModel(majority, ["a", "b", "c"])
        bg = np.array(
            [[i >> 2 & 1, i >> 1 & 1, i & 1] for i in range(8)], dtype=float
        )
        phi = exact_shapley(model, np.ones(3), bg)
        np.testing.assert_allclose(phi, [1 / 6] * 3, atol=1e-12)

    def test_dimension_cap(self):
        model = StubModel(lambda X: np.full(len(X), 0.5), None)
        with pytest.raises(ValueError):
            exact_shapley(model, np.zeros(16), np.zeros((2, 16)))
