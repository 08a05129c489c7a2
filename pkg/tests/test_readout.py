import numpy as np
import pytest

from peckbench.readout import (
    SoftmaxReadout,
    TrainSpec,
    cross_entropy_and_grad,
    predict,
    predict_proba,
    scores,
    softmax,
    train,
)


def make_blobs(n_per_class=67, k=3, sep=6.0, seed=0):
    """k Gaussian blobs with unit sigma, centers sep apart."""
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0], [sep, 0.0], [0.0, sep]])[:k]
    X = np.concatenate([rng.normal(c, 1.0, size=(n_per_class, 2))
                        for c in centers])
    y = np.repeat(np.arange(k), n_per_class)
    return X, y


def identity_model(theta, k):
    """Model with given theta, identity standardization."""
    m = SoftmaxReadout()
    m.classes_ = np.arange(k)
    m.mean_ = np.zeros(theta.shape[0] - 1)
    m.scale_ = np.ones(theta.shape[0] - 1)
    m.theta_ = theta
    return m


class TestScores:
    def test_zero_theta_zero_scores(self):
        m = identity_model(np.zeros((3, 2)), 2)
        np.testing.assert_array_equal(scores(m, np.array([1.0, -2.0])),
                                      np.zeros(2))

    def test_unit_weight_unit_score(self):
        theta = np.zeros((3, 2))
        theta[1, 0] = 1.0  # weight on x0 for class 0
        m = identity_model(theta, 2)
        s = scores(m, np.array([1.0, 0.0]))
        assert s[0] == pytest.approx(1.0)
        assert s[1] == 0.0

    def test_linearity_without_bias(self):
        rng = np.random.default_rng(1)
        theta = np.concatenate([np.zeros((1, 3)), rng.normal(size=(4, 3))])
        m = identity_model(theta, 3)
        x, y = rng.normal(size=4), rng.normal(size=4)
        np.testing.assert_allclose(scores(m, x + y),
                                   scores(m, x) + scores(m, y), atol=1e-12)

    def test_dimension_mismatch(self):
        m = identity_model(np.zeros((3, 2)), 2)
        with pytest.raises(ValueError):
            scores(m, np.ones(5))


class TestPredictProba:
    def test_equal_scores_uniform(self):
        m = identity_model(np.zeros((4, 3)), 3)
        p = predict_proba(m, np.ones(3))
        np.testing.assert_allclose(p, np.full(3, 1 / 3))

    def test_log2_example(self):
        p = softmax(np.array([np.log(2.0), 0.0, 0.0]))
        np.testing.assert_allclose(p, [0.5, 0.25, 0.25], atol=1e-12)

    def test_shift_invariance(self):
        s = np.array([0.3, -1.2, 2.5])
        np.testing.assert_allclose(softmax(s), softmax(s + 17.0), atol=1e-12)

    def test_simplex(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            p = softmax(rng.normal(scale=50.0, size=5))
            assert np.all(p >= 0.0)
            assert abs(p.sum() - 1.0) < 1e-12

    def test_extreme_scores_stable(self):
        p = softmax(np.array([1e4, 0.0, -1e4]))
        assert np.all(np.isfinite(p))
        assert p[0] == pytest.approx(1.0)


class TestPredict:
    def test_argmax(self):
        theta = np.zeros((2, 3))
        theta[0] = [0.2, 0.5, 0.3]  # bias row orders the classes
        m = identity_model(theta, 3)
        assert predict(m, np.zeros(1)) == 1

    def test_tie_breaks_low(self):
        m = identity_model(np.zeros((2, 2)), 2)
        assert predict(m, np.zeros(1)) == 0

    def test_invariant_under_monotone_score_transform(self):
        rng = np.random.default_rng(3)
        theta = rng.normal(size=(4, 3))
        m1 = identity_model(theta, 3)
        m2 = identity_model(theta * 3.0, 3)  # strictly increasing transform
        X = rng.normal(size=(20, 3))
        np.testing.assert_array_equal(m1.predict(X), m2.predict(X))


class TestGradient:
    def test_matches_central_differences(self):
        rng = np.random.default_rng(4)
        for trial in range(5):
            X = rng.normal(size=(20, 10))
            onehot = np.zeros((20, 3))
            onehot[np.arange(20), rng.integers(0, 3, 20)] = 1.0
            xb = np.concatenate([np.ones((20, 1)), X], axis=1)
            theta = rng.normal(scale=0.5, size=(11, 3))
            _, grad = cross_entropy_and_grad(theta, xb, onehot, 1e-3)
            h = 1e-5
            for _ in range(10):
                i = rng.integers(0, 11)
                j = rng.integers(0, 3)
                tp = theta.copy()
                tp[i, j] += h
                tm = theta.copy()
                tm[i, j] -= h
                lp, _ = cross_entropy_and_grad(tp, xb, onehot, 1e-3)
                lm, _ = cross_entropy_and_grad(tm, xb, onehot, 1e-3)
                fd = (lp - lm) / (2 * h)
                denom = max(abs(fd), 1e-8)
                assert abs(grad[i, j] - fd) / denom < 1e-4


class TestTrain:
    def test_separable_blobs(self):
        X, y = make_blobs(seed=5)
        model = train(X, y, TrainSpec())
        acc = float((model.predict(X) == y).mean())
        assert acc >= 0.99

    def test_shuffled_labels_chance(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(300, 8))
        y = rng.integers(0, 3, 300)
        model = train(X, y, TrainSpec(epochs=200))
        acc = float((model.predict(X) == y).mean())
        assert abs(acc - 1 / 3) < 0.1

    def test_zero_learning_keeps_uniform(self):
        X, y = make_blobs(n_per_class=10, seed=7)
        with pytest.raises(ValueError):
            TrainSpec(epochs=0)
        # lr -> tiny with one epoch: theta barely moves from zero
        model = train(X, y, TrainSpec(learning_rate=1e-30, epochs=1))
        p = model.predict_proba(X[:5])
        np.testing.assert_allclose(p, np.full((5, 3), 1 / 3), atol=1e-12)

    def test_missing_class_rejected(self):
        X = np.zeros((10, 2))
        with pytest.raises(ValueError):
            train(X, np.zeros(10, dtype=int))

    def test_non_finite_rejected(self):
        X = np.zeros((4, 2))
        X[0, 0] = np.nan
        with pytest.raises(ValueError):
            train(X, np.array([0, 1, 0, 1]))

    def test_deterministic(self):
        X, y = make_blobs(n_per_class=20, seed=8)
        a = train(X, y).theta_
        b = train(X, y).theta_
        assert np.array_equal(a, b)

    def test_loss_non_increasing(self):
        X, y = make_blobs(n_per_class=20, seed=9)
        model = train(X, y, TrainSpec(learning_rate=0.1, epochs=300,
                                      l2_penalty=1e-3))
        losses = np.array(model.loss_curve_)
        assert np.all(np.diff(losses) <= 1e-12)

    def test_standardization_stored(self):
        X, y = make_blobs(n_per_class=15, seed=10)
        model = train(X, y)
        np.testing.assert_allclose(model.mean_, X.mean(axis=0))
        np.testing.assert_allclose(model.scale_, X.std(axis=0))

    def test_constant_feature_scale_floor(self):
        rng = np.random.default_rng(11)
        X = np.concatenate([rng.normal(size=(40, 1)),
                            np.full((40, 1), 2.5)], axis=1)
        y = (X[:, 0] > 0).astype(int)
        model = train(X, y)
        assert model.scale_[1] == pytest.approx(1e-9)
        assert np.all(np.isfinite(model.theta_))


class TestEstimatorApi:
    def test_get_set_params(self):
        m = SoftmaxReadout(learning_rate=0.05, epochs=10)
        params = m.get_params()
        assert params["learning_rate"] == 0.05
        m.set_params(epochs=20)
        assert m.epochs == 20

    def test_score_method(self):
        X, y = make_blobs(n_per_class=20, seed=12)
        m = SoftmaxReadout(epochs=200).fit(X, y)
        assert m.score(X, y) >= 0.95

    def test_classes_preserved(self):
        X, y = make_blobs(n_per_class=15, k=2, seed=13)
        m = SoftmaxReadout(epochs=50).fit(X, y + 5)
        assert set(m.predict(X)) <= {5, 6}

    def test_export_csv(self, tmp_path):
        X, y = make_blobs(n_per_class=10, seed=14)
        m = SoftmaxReadout(epochs=20).fit(X, y)
        path = tmp_path / "theta.csv"
        m.export_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "parameter,class_0,class_1,class_2"
        assert len(lines) == 1 + 1 + X.shape[1]  # header + bias + features
