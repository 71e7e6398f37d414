"""One-hidden-layer regression MLP: plaintext training, encrypted inference.

Encrypted inference replaces the hidden activation with the identity, so
with plaintext weights the whole network is an affine map of the encrypted
inputs and needs no ciphertext-ciphertext product.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import ops
from .ckks import Ciphertext
from .errors import InputError, PersistenceError, TrainingDivergedError

ACTIVATIONS = ("relu", "identity")
PARAMS_KIND = "mlp_params"


@dataclass(frozen=True, eq=False)
class MlpParams:
    W1: np.ndarray  # (h, d)
    b1: np.ndarray  # (h,)
    W2: np.ndarray  # (h,), the single output row
    b2: float

    def __post_init__(self):
        W1 = np.atleast_2d(np.asarray(self.W1, dtype=float))
        b1 = np.asarray(self.b1, dtype=float).reshape(-1)
        W2 = np.asarray(self.W2, dtype=float).reshape(-1)
        h = W1.shape[0]
        if b1.shape != (h,) or W2.shape != (h,):
            raise InputError(f"inconsistent shapes W1{W1.shape}, b1{b1.shape}, W2{W2.shape}")
        if not all(np.all(np.isfinite(a)) for a in (W1, b1, W2)) or not np.isfinite(self.b2):
            raise InputError("MLP parameters must be finite")
        object.__setattr__(self, "W1", W1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "W2", W2)
        object.__setattr__(self, "b2", float(self.b2))

    @property
    def d(self) -> int:
        return self.W1.shape[1]

    @property
    def h(self) -> int:
        return self.W1.shape[0]

    def to_dict(self) -> dict:
        return {
            "kind": PARAMS_KIND,
            "d": self.d,
            "h": self.h,
            "W1": self.W1.ravel().tolist(),
            "b1": self.b1.tolist(),
            "W2": self.W2.tolist(),
            "b2": self.b2,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MlpParams":
        if doc.get("kind") != PARAMS_KIND:
            raise PersistenceError("not an MLP params file", "kind")
        try:
            d, h = int(doc["d"]), int(doc["h"])
            W1 = np.asarray(doc["W1"], dtype=float)
            if W1.size != h * d:
                raise PersistenceError(f"W1 has {W1.size} entries, expected {h * d}", "W1")
            return cls(W1.reshape(h, d), doc["b1"], doc["W2"], doc["b2"])
        except (KeyError, TypeError, ValueError) as exc:
            raise PersistenceError(f"malformed MLP params: {exc}") from exc


@dataclass(frozen=True)
class TrainConfig:
    hidden_units: int = 16
    learning_rate: float = 0.01
    epochs: int = 500
    seed: int = 0
    train_activation: str = "relu"

    def __post_init__(self):
        if self.hidden_units < 1:
            raise InputError("hidden_units must be >= 1")
        if self.epochs < 1:
            raise InputError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise InputError("learning_rate must be > 0")
        if self.train_activation not in ACTIVATIONS:
            raise InputError(f"unknown activation {self.train_activation!r}")


def init_params(d: int, config: TrainConfig) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    if d < 1:
        raise InputError("input dimension must be >= 1")
    h = config.hidden_units
    rng = np.random.default_rng(config.seed)
    lim1 = np.sqrt(6.0 / (d + h))
    lim2 = np.sqrt(6.0 / (h + 1))
    return MlpParams(rng.uniform(-lim1, lim1, (h, d)), np.zeros(h), rng.uniform(-lim2, lim2, h), 0.0)


def _act(z, activation):
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "identity":
        return z
    raise InputError(f"unknown activation {activation!r}")


def forward_plain(params: MlpParams, x, activation: str = "relu"):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[-1] != params.d:
        raise InputError(f"expected {params.d} inputs, got {X.shape[-1]}")
    out = _act(X @ params.W1.T + params.b1, activation) @ params.W2 + params.b2
    return float(out[0]) if single else out


def loss_and_grads(params: MlpParams, X, y, activation: str = "relu") -> tuple[float, MlpParams]:
    """Mean squared error and its gradient, packed as an ``MlpParams``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    z1 = X @ params.W1.T + params.b1
    a1 = _act(z1, activation)
    resid = a1 @ params.W2 + params.b2 - y
    loss = float(np.mean(resid**2))
    g_out = 2.0 * resid / n
    g_a1 = np.outer(g_out, params.W2)
    g_z1 = g_a1 * (z1 > 0) if activation == "relu" else g_a1
    grads = MlpParams(g_z1.T @ X, g_z1.sum(axis=0), a1.T @ g_out, float(g_out.sum()))
    return loss, grads


def train_plain(X, y, config: TrainConfig = TrainConfig()) -> tuple[MlpParams, list[float]]:
    """Full-batch gradient descent; returns final params and the loss per epoch."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],) or X.shape[0] == 0:
        raise InputError("X must be a non-empty n x d matrix and y length n")
    params = init_params(X.shape[1], config)
    lr = config.learning_rate
    history = []
    for epoch in range(config.epochs):
        loss, g = loss_and_grads(params, X, y, config.train_activation)
        if not np.isfinite(loss):
            raise TrainingDivergedError(epoch)
        history.append(loss)
        try:
            params = MlpParams(
                params.W1 - lr * g.W1, params.b1 - lr * g.b1, params.W2 - lr * g.W2, params.b2 - lr * g.b2
            )
        except InputError:
            raise TrainingDivergedError(epoch) from None
    return params, history


def forward_encrypted(params: MlpParams, x: Ciphertext) -> Ciphertext:
    """Identity-activation forward pass over encrypted inputs with batch shape (..., d)."""
    if not x.shape or x.shape[-1] != params.d:
        raise InputError(f"expected {params.d} encrypted inputs, got batch shape {x.shape}")
    hidden = ops.add_const(ops.weighted_sum(x, params.W1), params.b1)
    return ops.add_const(ops.weighted_sum(hidden, params.W2), params.b2)


def save_params(params: MlpParams, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(params.to_dict(), fh, indent=2)


def load_params(path: str | os.PathLike) -> MlpParams:
    try:
        with open(path, encoding="utf-8") as fh:
            return MlpParams.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise PersistenceError(f"cannot read MLP params {path}: {exc}") from exc
