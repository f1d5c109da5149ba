import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfsa.classifier import (TrainConfig, TrainedModel, fit, fit_logistic, fit_logistic_arrays, load_model,
                             logistic_gradient, logistic_loss, predict, predict_proba, save_model)
from cfsa.errors import ConfigError, DegenerateTrainingError, ShapeError

from conftest import toy_dataset


def separable(n=20, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    y = (X[:, 0] + X[:, 1] > 1.0).astype(int)
    # push points away from the boundary so a margin exists
    X = np.clip(X + 0.15 * (2 * y[:, None] - 1), 0, 1)
    return X, y


class TestFit:
    def test_separable_toy_reaches_full_accuracy(self):
        X, y = separable()
        model = fit_logistic_arrays(X, y, TrainConfig(learning_rate=1.0, epochs=5000, l2_penalty=0.0))
        np.testing.assert_array_equal(predict(model, X), y)

    def test_identical_features_give_half(self):
        X = np.full((10, 2), 0.3)
        y = np.array([0, 1] * 5)
        model = fit_logistic_arrays(X, y, TrainConfig())
        np.testing.assert_allclose(predict_proba(model, X)[:, 1], 0.5, atol=0.05)

    def test_gradient_small_at_optimum(self):
        rng = np.random.default_rng(4)
        X = rng.random((50, 3))
        y = (rng.random(50) < X.mean(axis=1)).astype(int)
        model = fit_logistic_arrays(X, y, TrainConfig(learning_rate=0.5, epochs=10_000, l2_penalty=1e-4))
        gw, gb = logistic_gradient(model.weights, model.bias, X, y, 1e-4)
        assert np.linalg.norm(np.append(gw, gb)) < 1e-3

    def test_single_class_raises(self):
        with pytest.raises(DegenerateTrainingError):
            fit_logistic_arrays(np.random.default_rng(0).random((5, 2)), np.ones(5), TrainConfig())

    def test_deterministic(self):
        X, y = separable(40, 2)
        a = fit_logistic_arrays(X, y, TrainConfig(epochs=300))
        b = fit_logistic_arrays(X, y, TrainConfig(epochs=300))
        assert a.weights.tobytes() == b.weights.tobytes() and a.bias == b.bias

    def test_loss_monotone_at_small_lr(self):
        rng = np.random.default_rng(8)
        X = rng.random((60, 4))
        y = (rng.random(60) < 0.4).astype(int)
        hist = []
        fit_logistic_arrays(X, y, TrainConfig(learning_rate=0.01, epochs=500), history=hist)
        assert np.all(np.diff(hist) <= 1e-15)

    def test_dataset_entry_point(self):
        X, y = separable()
        d = toy_dataset(np.column_stack([X, np.arange(20) % 2]), y)
        model = fit_logistic(d, TrainConfig(epochs=50))
        assert model.feature_count == 3

    @pytest.mark.parametrize("kw", [{"learning_rate": 0}, {"epochs": 0}, {"l2_penalty": -1}])
    def test_config_validation(self, kw):
        with pytest.raises(ConfigError):
            TrainConfig(**kw)


class TestGradient:
    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), l2=st.sampled_from([0.0, 1e-3, 0.1]))
    def test_matches_central_differences(self, seed, l2):
        rng = np.random.default_rng(seed)
        X = rng.random((12, 3))
        y = rng.integers(0, 2, 12).astype(float)
        w = rng.normal(0, 1, 3)
        b = float(rng.normal())
        gw, gb = logistic_gradient(w, b, X, y, l2)
        h = 1e-6
        num = []
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            num.append((logistic_loss(w + e, b, X, y, l2) - logistic_loss(w - e, b, X, y, l2)) / (2 * h))
        num_b = (logistic_loss(w, b + h, X, y, l2) - logistic_loss(w, b - h, X, y, l2)) / (2 * h)
        analytic = np.append(gw, gb)
        numeric = np.append(num, num_b)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-9)


class TestPredict:
    def test_zero_model(self):
        m = TrainedModel("logistic", np.zeros(3), 0.0, 3)
        np.testing.assert_array_equal(predict_proba(m, [0.1, 0.9, 0.4]), [0.5, 0.5])
        assert predict(m, [[0.1, 0.9, 0.4]])[0] == 0

    def test_definition(self):
        w = np.array([1.5, -2.0])
        m = TrainedModel("logistic", w, 0.25, 2)
        x = np.array([0.4, 0.3])
        z = w @ x + 0.25
        sig = 1 / (1 + np.exp(-z))
        np.testing.assert_allclose(predict_proba(m, x), [1 - sig, sig], rtol=1e-15)

    def test_fitted_model_matches_hand_sigmoid(self):
        X, y = separable(30, 3)
        m = fit_logistic_arrays(X, y, TrainConfig(epochs=500))
        held = np.random.default_rng(11).random((15, 2))
        manual = np.array([1 / (1 + np.exp(-(sum(wi * xi for wi, xi in zip(m.weights, row)) + m.bias)))
                           for row in held])
        np.testing.assert_allclose(predict_proba(m, held)[:, 1], manual, rtol=1e-12)

    def test_width_mismatch(self):
        m = TrainedModel("logistic", np.zeros(3), 0.0, 3)
        with pytest.raises(ShapeError):
            predict_proba(m, [0.1, 0.2])

    @settings(max_examples=50, deadline=None)
    @given(w=st.lists(st.floats(-50, 50), min_size=3, max_size=3), b=st.floats(-50, 50),
           x=st.lists(st.floats(0, 1), min_size=3, max_size=3))
    def test_probability_validity(self, w, b, x):
        p = predict_proba(TrainedModel("logistic", np.array(w), b, 3), np.array(x))
        assert (p >= 0).all() and (p <= 1).all()
        assert abs(p.sum() - 1.0) <= 1e-9


class TestOtherKinds:
    def test_linear_svm_probabilities(self):
        X, y = separable(60, 5)
        d = toy_dataset(np.column_stack([X, np.arange(60) % 2]), y)
        m = fit("linear_svm", d, TrainConfig(epochs=500))
        p = predict_proba(m, d.features)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
        assert (predict(m, d.features) == y).mean() > 0.9

    def test_unknown_kind(self):
        X, y = separable()
        d = toy_dataset(np.column_stack([X, np.arange(20) % 2]), y)
        with pytest.raises(ConfigError):
            fit("forest", d)


class TestPersistence:
    @pytest.mark.parametrize("kind", ["logistic", "linear_svm"])
    def test_round_trip(self, tmp_path, kind):
        X, y = separable(40, 6)
        d = toy_dataset(np.column_stack([X, np.arange(40) % 2]), y)
        m = fit(kind, d, TrainConfig(epochs=200))
        save_model(m, tmp_path / "m.json")
        back = load_model(tmp_path / "m.json")
        np.testing.assert_array_equal(predict_proba(back, d.features), predict_proba(m, d.features))
