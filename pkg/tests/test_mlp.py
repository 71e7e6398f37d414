import numpy as np
import pytest

from hepoly import ops
from hepoly.data import compute_metrics, generate_synthetic
from hepoly.errors import InputError, PersistenceError, TrainingDivergedError
from hepoly.mlp import (
    MlpParams,
    TrainConfig,
    forward_encrypted,
    forward_plain,
    init_params,
    load_params,
    loss_and_grads,
    save_params,
    train_plain,
)


def identity_params():
    return MlpParams(np.eye(2), np.zeros(2), np.array([1.0, 1.0]), 0.0)


def finite_difference_grads(params, X, y, activation, step=1e-5):
    """Central differences of the MSE in every parameter."""
    flat = np.concatenate([params.W1.ravel(), params.b1, params.W2, [params.b2]])
    h, d = params.W1.shape

    def unpack(v):
        i = h * d
        return MlpParams(v[:i].reshape(h, d), v[i:i + h], v[i + h:i + 2 * h], v[-1])

    def loss(v):
        pred = forward_plain(unpack(v), X, activation)
        return np.mean((pred - y) ** 2)

    grad = np.zeros_like(flat)
    for i in range(flat.size):
        e = np.zeros_like(flat)
        e[i] = step
        grad[i] = (loss(flat + e) - loss(flat - e)) / (2 * step)
    return grad


class TestInit:
    def test_deterministic(self):
        a, b = init_params(13, TrainConfig(seed=5)), init_params(13, TrainConfig(seed=5))
        assert np.array_equal(a.W1, b.W1) and np.array_equal(a.W2, b.W2)

    def test_zero_biases_and_limits(self):
        p = init_params(13, TrainConfig(hidden_units=16, seed=5))
        assert np.all(p.b1 == 0) and p.b2 == 0.0
        assert np.all(np.abs(p.W1) <= np.sqrt(6 / 29)) and np.all(np.abs(p.W2) <= np.sqrt(6 / 17))

    def test_degenerate_shape(self):
        p = init_params(1, TrainConfig(hidden_units=1))
        assert p.W1.shape == (1, 1) and p.W2.shape == (1,)

    def test_config_validation(self):
        with pytest.raises(InputError):
            TrainConfig(epochs=0)
        with pytest.raises(InputError):
            TrainConfig(learning_rate=0)
        with pytest.raises(InputError):
            TrainConfig(train_activation="tanh")


class TestForward:
    def test_identity_hand(self):
        assert forward_plain(identity_params(), np.array([1.0, 2.0]), "identity") == 3.0

    def test_relu_kill(self):
        p = MlpParams(-np.eye(2), np.zeros(2), np.array([1.0, 1.0]), 0.7)
        assert forward_plain(p, np.array([1.0, 2.0]), "relu") == 0.7

    def test_relu_identity_agree_on_positive(self):
        x = np.array([1.0, 2.0])
        p = identity_params()
        assert forward_plain(p, x, "relu") == forward_plain(p, x, "identity")

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            forward_plain(identity_params(), np.zeros(3))

    def test_encrypted_hand(self, E, D):
        assert D(forward_encrypted(identity_params(), E(np.array([1.0, 2.0])))) == pytest.approx(3.0, abs=1e-9)

    def test_encrypted_zero_weights(self, E, D):
        p = MlpParams(np.zeros((3, 2)), np.zeros(3), np.zeros(3), -0.4)
        assert D(forward_encrypted(p, E(np.array([0.5, 0.5])))) == pytest.approx(-0.4, abs=1e-12)

    def test_encrypted_level_and_no_ct_products(self, E):
        p = init_params(4, TrainConfig(hidden_units=3))
        with ops.count_ops() as c:
            out = forward_encrypted(p, E(np.zeros(4)))
        assert out.level == 0 and c.ct_mul == 0

    def test_encrypted_matches_plain_random(self, E, D):
        rng = np.random.default_rng(0)
        for _ in range(1000 // 50):
            d, h = int(rng.integers(1, 6)), int(rng.integers(1, 6))
            p = MlpParams(rng.normal(size=(h, d)), rng.normal(size=h), rng.normal(size=h), rng.normal())
            X = rng.uniform(-1, 1, (50, d))
            assert np.max(np.abs(D(forward_encrypted(p, E(X))) - forward_plain(p, X, "identity"))) < 1e-6

    def test_encrypted_dimension_mismatch(self, E):
        with pytest.raises(InputError):
            forward_encrypted(identity_params(), E(np.zeros(3)))


class TestTraining:
    @pytest.mark.parametrize("activation", ["relu", "identity"])
    def test_gradient_check(self, activation):
        rng = np.random.default_rng(1)
        for _ in range(10):
            d, h = int(rng.integers(1, 4)), int(rng.integers(1, 5))
            p = MlpParams(rng.normal(size=(h, d)), rng.normal(size=h), rng.normal(size=h), rng.normal())
            X, y = rng.normal(size=(7, d)), rng.normal(size=7)
            _, g = loss_and_grads(p, X, y, activation)
            analytic = np.concatenate([g.W1.ravel(), g.b1, g.W2, [g.b2]])
            numeric = finite_difference_grads(p, X, y, activation)
            assert np.all(np.abs(analytic - numeric) <= 1e-4 * np.maximum(np.abs(numeric), 1e-2))

    def test_linear_target_identity(self):
        ds = generate_synthetic(300, "linear", 0.0, seed=2)
        p, hist = train_plain(ds.features, ds.target, TrainConfig(8, 0.05, 3000, 0, "identity"))
        assert compute_metrics(ds.target, forward_plain(p, ds.features, "identity")).r2 > 0.999
        assert hist[-1] < hist[0]

    def test_loss_decreases_default(self):
        ds = generate_synthetic(200, "linear", 0.01, seed=4)
        _, hist = train_plain(ds.features, ds.target)
        assert len(hist) == 500 and hist[-1] < hist[0]

    def test_divergence_reported(self):
        X = np.random.default_rng(0).normal(size=(20, 3)) * 100
        with pytest.raises(TrainingDivergedError) as info:
            train_plain(X, X[:, 0] * 100, TrainConfig(learning_rate=10.0, epochs=200))
        assert info.value.epoch >= 0


def test_params_file_roundtrip(tmp_path):
    p = init_params(3, TrainConfig(hidden_units=4, seed=9))
    save_params(p, tmp_path / "p.json")
    back = load_params(tmp_path / "p.json")
    assert np.array_equal(back.W1, p.W1) and np.array_equal(back.W2, p.W2) and back.b2 == p.b2


def test_params_file_bad_shape(tmp_path):
    doc = init_params(3, TrainConfig(hidden_units=4)).to_dict()
    doc["W1"] = doc["W1"][:-1]
    with pytest.raises(PersistenceError):
        MlpParams.from_dict(doc)
