"""The untrusted training server.

It only ever sees ciphertexts.  Anything that needs the key (encrypting a
public constant, decrypting aggregates, ordering distances) goes through the
narrow ``KeyService`` interface, which both the in-process trusted party and
the HTTP client implement.  This module must not import decryption or key
primitives from ``hepoly.ckks``.
"""

from __future__ import annotations

from typing import Protocol, Sequence

import numpy as np

from ..ckks import Ciphertext
from ..knn import KnnRegressor
from ..mlp import MlpParams, forward_encrypted
from ..regression import PolynomialRegression


class KeyService(Protocol):
    def encrypt_values(self, values) -> Ciphertext: ...

    def decrypt_results(self, cts: Ciphertext) -> np.ndarray: ...

    def order_oracle(self, distances: Ciphertext, k: int) -> Sequence[int]: ...


class TrainingServer:
    def __init__(self, key_service: KeyService):
        self.key_service = key_service
        self.data = None
        self.model = None

    def receive(self, data) -> None:
        self.data = data

    def _features(self, data):
        data = data if data is not None else self.data
        if data is None:
            raise ValueError("no encrypted dataset received")
        return data

    def fit_linreg(self, data=None, degree: int = 1) -> PolynomialRegression:
        data = self._features(data)
        self.model = PolynomialRegression(degree).fit_encrypted(data.features, data.target, self.key_service)
        return self.model

    def fit_knn(self, data=None, k: int = 3) -> KnnRegressor:
        data = self._features(data)
        self.model = KnnRegressor(k).fit_encrypted(data.features, data.target)
        return self.model

    def predict_linreg(self, model: PolynomialRegression, X: Ciphertext) -> Ciphertext:
        return model.predict_encrypted(X)

    def predict_knn(self, model: KnnRegressor, X: Ciphertext) -> Ciphertext:
        preds, _ = model.predict_encrypted(X, self.key_service.order_oracle)
        return preds

    def predict_mlp(self, params: MlpParams, X: Ciphertext) -> Ciphertext:
        return forward_encrypted(params, X)
