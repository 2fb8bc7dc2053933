import numpy as np
import pytest

from conformalbox import (
    ErrorModel,
    MlpModel,
    RegressorSpec,
    fit,
    fit_error_model,
    mlp_gradient,
    selu,
    selu_grad,
)
from conformalbox.errors import (
    ConfigError,
    DimensionMismatch,
    DomainError,
    NonFiniteLoss,
)


class TestSelu:
    def test_zero(self):
        assert selu(0.0) == 0.0

    def test_positive_is_scaled_identity(self):
        assert selu(2.0) == 2.101401974710961

    def test_negative_example(self):
        assert selu(-1.0) == pytest.approx(-1.1113307378125625, rel=1e-15)

    def test_saturates_left(self):
        assert selu(-50.0) == pytest.approx(-1.7580993408473766, rel=1e-12)

    def test_no_overflow_on_large_inputs(self):
        out = selu(np.array([1e6, -1e6]))
        assert np.all(np.isfinite(out))

    def test_grad_matches_finite_difference(self):
        xs = np.array([-2.0, -0.3, 0.4, 1.7])
        h = 1e-7
        fd = (selu(xs + h) - selu(xs - h)) / (2 * h)
        np.testing.assert_allclose(selu_grad(xs), fd, rtol=1e-6)

    def test_grad_example(self):
        assert selu_grad(-1.0) == pytest.approx(0.646768603034814, rel=1e-15)


class TestRegressorSpec:
    def test_defaults(self):
        spec = RegressorSpec()
        assert spec.kind == "ridge"
        assert spec.widths == (128, 64, 32)

    @pytest.mark.parametrize("kwargs", [
        {"kind": "tree"},
        {"dropout": 1.0},
        {"dropout": -0.1},
        {"epochs": 0},
        {"batch": 0},
        {"lr": 0.0},
        {"k": 0},
        {"l2": -1e-6},
        {"widths": (8, 0)},
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ConfigError):
            RegressorSpec(**kwargs)

    def test_dict_round_trip(self):
        spec = RegressorSpec(kind="mlp", widths=(16, 8), dropout=0.2, epochs=7)
        again = RegressorSpec.from_dict(spec.to_dict())
        assert again == spec

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ConfigError):
            RegressorSpec.from_dict({"kind": "ridge", "alpha": 1.0})


class TestRidge:
    def test_recovers_planted_linear_map(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(200, 4))
        W = np.array([[1.0, -2.0], [0.5, 0.0], [3.0, 1.0], [0.0, -1.0]])
        b = np.array([0.7, -0.3])
        Y = X @ W + b
        model = fit(RegressorSpec(kind="ridge", l2=0.0), X, Y)
        np.testing.assert_allclose(model.coef[:-1], W, atol=1e-10)
        np.testing.assert_allclose(model.coef[-1], b, atol=1e-10)
        np.testing.assert_allclose(model.predict(X), Y, atol=1e-9)

    def test_small_penalty_stays_close(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(100, 3))
        Y = X @ np.array([[2.0], [0.0], [-1.0]]) + 5.0
        model = fit(RegressorSpec(kind="ridge", l2=1e-6), X, Y)
        np.testing.assert_allclose(model.predict(X), Y, atol=1e-5)

    def test_penalty_skips_intercept(self):
        # constant targets: a penalized slope would shrink, the intercept must not
        X = np.arange(10, dtype=float).reshape(-1, 1)
        Y = np.full((10, 1), 42.0)
        model = fit(RegressorSpec(kind="ridge", l2=10.0), X, Y)
        np.testing.assert_allclose(model.predict(X), 42.0, atol=1e-8)

    def test_constant_feature_plus_noise_free_targets(self):
        X = np.ones((12, 2))
        X[:, 0] = np.linspace(-1, 1, 12)
        Y = (2.0 * X[:, :1]) + 1.0
        model = fit(RegressorSpec(kind="ridge", l2=0.0), X, Y)
        np.testing.assert_allclose(model.predict(X), Y, atol=1e-10)

    def test_predict_checks_width(self):
        model = fit(RegressorSpec(kind="ridge"), np.ones((5, 3)), np.ones((5, 1)))
        with pytest.raises(DimensionMismatch):
            model.predict(np.ones((2, 4)))


class TestKnn:
    def test_k_one_memorizes_training_points(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(30, 3))
        Y = rng.normal(size=(30, 2))
        model = fit(RegressorSpec(kind="knn", k=1), X, Y)
        np.testing.assert_allclose(model.predict(X), Y, atol=1e-12)

    def test_mean_of_nearest_two(self):
        X = np.array([[0.0], [1.0], [10.0]])
        Y = np.array([[0.0], [2.0], [100.0]])
        model = fit(RegressorSpec(kind="knn", k=2), X, Y)
        np.testing.assert_allclose(model.predict([[0.2]]), [[1.0]])
        np.testing.assert_allclose(model.predict([[8.0]]), [[51.0]])

    def test_k_equals_n_predicts_global_mean(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(7, 2))
        Y = rng.normal(size=(7, 3))
        model = fit(RegressorSpec(kind="knn", k=7), X, Y)
        np.testing.assert_allclose(
            model.predict(rng.normal(size=(4, 2))),
            np.tile(Y.mean(axis=0), (4, 1)),
            atol=1e-12,
        )

    def test_k_larger_than_train_rejected(self):
        with pytest.raises(DomainError):
            fit(RegressorSpec(kind="knn", k=8), np.ones((5, 2)), np.ones((5, 1)))

    def test_chunked_path_matches_direct(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(50, 2))
        Y = rng.normal(size=(50, 1))
        model = fit(RegressorSpec(kind="knn", k=3), X, Y)
        Xq = rng.normal(size=(700, 2))
        got = model.predict(Xq)
        for i in (0, 350, 699):
            d2 = ((X - Xq[i]) ** 2).sum(axis=1)
            near = np.argsort(d2, kind="stable")[:3]
            assert got[i, 0] == pytest.approx(Y[near, 0].mean(), rel=1e-12)


class TestMlp:
    SPEC = RegressorSpec(kind="mlp", widths=(16, 16), dropout=0.0, epochs=60,
                         lr=1e-2, batch=16)

    def test_loss_decreases_on_smooth_target(self):
        X = np.linspace(-2, 2, 128).reshape(-1, 1)
        Y = np.sin(2.0 * X)
        model = fit(self.SPEC, X, Y, seed=0)
        assert len(model.loss_history) == 60
        assert model.loss_history[-1] < 0.1 * model.loss_history[0]

    def test_training_is_deterministic(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(64, 2))
        Y = rng.normal(size=(64, 2))
        spec = RegressorSpec(kind="mlp", widths=(8,), dropout=0.3, epochs=5, batch=8)
        a = fit(spec, X, Y, seed=9)
        b = fit(spec, X, Y, seed=9)
        for Wa, Wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(Wa, Wb)
        np.testing.assert_array_equal(a.predict(X), b.predict(X))
        assert a.loss_history == b.loss_history

    def test_different_seeds_differ(self):
        X = np.linspace(-1, 1, 32).reshape(-1, 1)
        Y = X.copy()
        spec = RegressorSpec(kind="mlp", widths=(4,), dropout=0.0, epochs=2)
        a = fit(spec, X, Y, seed=0)
        b = fit(spec, X, Y, seed=1)
        assert not np.array_equal(a.weights[0], b.weights[0])

    def test_zero_weights_predict_bias(self):
        spec = RegressorSpec(kind="mlp", widths=(4,))
        model = MlpModel(
            spec,
            weights=[np.zeros((3, 4)), np.zeros((4, 2))],
            biases=[np.zeros(4), np.array([1.5, -2.0])],
        )
        out = model.predict(np.random.default_rng(0).normal(size=(6, 3)))
        np.testing.assert_array_equal(out, np.tile([1.5, -2.0], (6, 1)))

    def test_divergence_raises(self):
        # Adam steps are bounded by lr, so an absurd lr blows the weights up
        # past the float range within an epoch
        X = np.linspace(-1, 1, 32).reshape(-1, 1)
        Y = 1e3 * X
        spec = RegressorSpec(kind="mlp", widths=(8,), dropout=0.0, epochs=3, lr=1e100)
        with pytest.raises(NonFiniteLoss), np.errstate(over="ignore", invalid="ignore"):
            fit(spec, X, Y, seed=0)

    def test_loss_history_uses_full_data_without_dropout(self):
        X = np.linspace(-1, 1, 40).reshape(-1, 1)
        Y = 0.5 * X
        spec = RegressorSpec(kind="mlp", widths=(6,), dropout=0.5, epochs=3, batch=10)
        model = fit(spec, X, Y, seed=2)
        # recomputing the clean full-data loss from the final weights must
        # reproduce the last recorded entry exactly
        final = float(np.mean((model.predict(X) - Y) ** 2))
        assert model.loss_history[-1] == final


class TestMlpGradient:
    def test_single_linear_layer_closed_form(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(9, 3))
        Y = rng.normal(size=(9, 2))
        W = rng.normal(size=(3, 2))
        b = rng.normal(size=2)
        model = MlpModel(RegressorSpec(kind="mlp", widths=(1,)), [W], [b])
        gw, gb = mlp_gradient(model, X, Y)
        resid = (X @ W + b) - Y
        n_terms = 9 * 2
        np.testing.assert_allclose(gw[0], 2.0 * X.T @ resid / n_terms, rtol=1e-12)
        np.testing.assert_allclose(gb[0], 2.0 * resid.sum(axis=0) / n_terms, rtol=1e-12)

    def test_zero_residual_gives_zero_gradient(self):
        X = np.array([[1.0, 2.0], [3.0, 4.0]])
        W = np.array([[1.0], [0.5]])
        b = np.array([0.25])
        model = MlpModel(RegressorSpec(kind="mlp"), [W], [b])
        gw, gb = mlp_gradient(model, X, X @ W + b)
        np.testing.assert_array_equal(gw[0], 0.0)
        np.testing.assert_array_equal(gb[0], 0.0)

    def test_matches_finite_differences_on_deep_net(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(12, 3))
        Y = rng.normal(size=(12, 2))
        spec = RegressorSpec(kind="mlp", widths=(5, 4), dropout=0.0, epochs=1)
        model = fit(spec, X, Y, seed=3)
        gw, gb = mlp_gradient(model, X, Y)
        h = 1e-5

        def loss_with(weights, biases):
            out = np.asarray(X)
            for i, (W, b) in enumerate(zip(weights, biases)):
                z = out @ W + b
                out = selu(z) if i < len(weights) - 1 else z
            return np.mean((out - Y) ** 2)

        for layer in range(3):
            for idx in [(0, 0), (-1, -1)]:
                Wp = [W.copy() for W in model.weights]
                Wm = [W.copy() for W in model.weights]
                Wp[layer][idx] += h
                Wm[layer][idx] -= h
                fd = (loss_with(Wp, model.biases) - loss_with(Wm, model.biases)) / (2 * h)
                assert gw[layer][idx] == pytest.approx(fd, rel=1e-4, abs=1e-10)
            bp = [b.copy() for b in model.biases]
            bm = [b.copy() for b in model.biases]
            bp[layer][0] += h
            bm[layer][0] -= h
            fd = (loss_with(model.weights, bp) - loss_with(model.weights, bm)) / (2 * h)
            assert gb[layer][0] == pytest.approx(fd, rel=1e-4, abs=1e-10)

    def test_row_mismatch(self):
        model = MlpModel(RegressorSpec(kind="mlp"), [np.ones((2, 1))], [np.zeros(1)])
        with pytest.raises(DimensionMismatch):
            mlp_gradient(model, np.ones((3, 2)), np.ones((2, 1)))


class TestFit:
    def test_rejects_mismatched_rows(self):
        with pytest.raises(DimensionMismatch):
            fit(RegressorSpec(), np.ones((4, 2)), np.ones((3, 1)))

    def test_rejects_one_dimensional_targets(self):
        with pytest.raises(DimensionMismatch):
            fit(RegressorSpec(), np.ones((4, 2)), np.ones(4))


class TestErrorModel:
    def test_targets_are_log_absolute_residuals(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        Y = np.array([[1.0], [2.0], [3.0], [4.0]])
        Yhat = np.array([[1.5], [2.0], [2.5], [4.25]])
        em = fit_error_model(RegressorSpec(kind="knn", k=1), X, Y, Yhat)
        mu = em.predict_log_error(X)
        # |res| = .5, 1e-8 (floored), .5, .25
        np.testing.assert_allclose(
            mu[:, 0],
            [np.log(0.5), np.log(1e-8), np.log(0.5), np.log(0.25)],
            rtol=1e-12,
        )
        assert mu[1, 0] == pytest.approx(-18.420680743952367, rel=1e-15)

    def test_floor_applies_elementwise(self):
        X = np.array([[0.0], [1.0]])
        Y = np.array([[1.0, 5.0], [1.0, 5.0]])
        Yhat = np.array([[1.0, 4.0], [1.0, 5.0]])
        em = fit_error_model(RegressorSpec(kind="knn", k=1), X, Y, Yhat, floor=1e-3)
        mu = em.predict_log_error(X)
        np.testing.assert_allclose(
            mu, [[np.log(1e-3), 0.0], [np.log(1e-3), np.log(1e-3)]], atol=1e-12
        )
        assert em.floor == 1e-3

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            fit_error_model(RegressorSpec(), np.ones((2, 1)), np.ones((2, 1)),
                            np.ones((3, 1)))

    def test_bad_floor(self):
        with pytest.raises(DomainError):
            fit_error_model(RegressorSpec(), np.ones((2, 1)), np.ones((2, 1)),
                            np.ones((2, 1)), floor=0.0)

    def test_exposes_model_dims(self):
        em = fit_error_model(
            RegressorSpec(kind="ridge"), np.ones((6, 3)), np.zeros((6, 2)),
            np.ones((6, 2)),
        )
        assert isinstance(em, ErrorModel)
        assert em.input_dim == 3
        assert em.output_dim == 2
