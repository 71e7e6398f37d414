"""K-nearest-neighbours regression over encrypted squared distances.

Distances are computed homomorphically.  Picking the K smallest needs a
comparison, which the scheme cannot do, so it is delegated to an ordering
oracle held by the key owner that answers with indices only.
"""

from __future__ import annotations

import functools
from typing import Callable, Sequence

import numpy as np

from . import ops
from .ckks import Ciphertext
from .errors import ConfigError, InputError

TIE_TOLERANCE = 1e-9

OrderingOracle = Callable[[Ciphertext, int], Sequence[int]]


def select_k_smallest(values, k: int, tie_tol: float = TIE_TOLERANCE) -> list[int]:
    """Indices of the k smallest values, ascending; near-equal values resolve by index."""
    values = np.asarray(values, dtype=float).ravel()
    n = values.size
    if not 1 <= k <= n:
        raise InputError(f"k must lie in [1, {n}], got {k}")

    def cmp(i, j):
        if abs(values[i] - values[j]) <= tie_tol:
            return i - j
        return -1 if values[i] < values[j] else 1

    order = np.argsort(values, kind="stable").tolist()
    return sorted(order, key=functools.cmp_to_key(cmp))[:k]


def sq_distance_enc(row_a: Ciphertext, row_b: Ciphertext) -> Ciphertext:
    """Encrypted squared Euclidean distance; the last batch axis is the feature axis.

    Batches broadcast, so (n, d) against (d,) gives n distances.
    """
    if not row_a.shape or not row_b.shape:
        raise InputError("rows need a feature axis")
    if row_a.shape[-1] != row_b.shape[-1]:
        raise InputError(f"dimension mismatch: {row_a.shape[-1]} vs {row_b.shape[-1]}")
    diff = ops.sub(row_a, row_b)
    return ops.ct_sum(ops.square(diff), axis=-1)


def sq_distance_plain(rows, x) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    return np.sum((rows - np.asarray(x, dtype=float)) ** 2, axis=-1)


def k_nearest(distances: Ciphertext, k: int, oracle: OrderingOracle) -> list[int]:
    if oracle is None:
        raise InputError("an ordering oracle is required for encrypted neighbour search")
    if not distances.shape or not 1 <= k <= distances.shape[0]:
        raise InputError(f"k={k} invalid for {distances.shape} distances")
    return list(oracle(distances, k))


class KnnRegressor:
    """Mean of the K nearest training targets.

    A model is either plaintext or encrypted throughout: distances between a
    plaintext and an encrypted point cannot be compared.
    """

    def __init__(self, k: int = 3):
        if int(k) < 1:
            raise ConfigError(f"k must be >= 1, got {k}")
        self.k = int(k)
        self.mode: str | None = None
        self.features_ = None
        self.targets_ = None

    @property
    def n_samples(self) -> int:
        return self.features_.shape[0]

    def _check_k(self, n: int) -> None:
        if self.k > n:
            raise ConfigError(f"k={self.k} exceeds the {n} training samples")

    def fit(self, X, y) -> "KnnRegressor":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise InputError("X must be n x d and y length n")
        self._check_k(X.shape[0])
        self.features_, self.targets_, self.mode = X, y, "plain"
        return self

    def fit_encrypted(self, X: Ciphertext, y: Ciphertext) -> "KnnRegressor":
        if len(X.shape) != 2 or y.shape != (X.shape[0],):
            raise InputError("encrypted X must have batch shape (n, d) and y (n,)")
        self._check_k(X.shape[0])
        self.features_, self.targets_, self.mode = X, y, "enc"
        return self

    def neighbors(self, x) -> list[int]:
        self._require("plain")
        return select_k_smallest(sq_distance_plain(self.features_, x), self.k)

    def predict(self, X) -> np.ndarray:
        self._require("plain")
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.features_.shape[1]:
            raise InputError(f"expected {self.features_.shape[1]} features, got {X.shape[1]}")
        return np.array([self.targets_[self.neighbors(x)].mean() for x in X])

    def predict_encrypted(self, X: Ciphertext, oracle: OrderingOracle) -> tuple[Ciphertext, list[list[int]]]:
        """Encrypted predictions for rows (m, d) and the neighbour indices used.

        Each query makes one oracle call; the averaged target never leaves
        the encrypted domain.
        """
        self._require("enc")
        if len(X.shape) == 1:
            X = Ciphertext(X.coeffs[None], X.level)
        if len(X.shape) != 2 or X.shape[1] != self.features_.shape[1]:
            raise InputError(f"expected encrypted rows with {self.features_.shape[1]} features, got {X.shape}")
        preds, chosen = [], []
        for q in range(X.shape[0]):
            dists = sq_distance_enc(self.features_, X[q])
            idx = k_nearest(dists, self.k, oracle)
            chosen.append(idx)
            total = ops.sum_many(self.targets_[np.asarray(idx)])
            preds.append(ops.mul_const(total, 1.0 / self.k).coeffs)
        return Ciphertext(np.stack(preds), self.targets_.level), chosen

    def _require(self, mode: str) -> None:
        if self.mode is None:
            raise InputError("model is not fitted")
        if self.mode != mode:
            raise ConfigError(f"model was fitted in {self.mode} mode; mixing with {mode} data is not supported")
