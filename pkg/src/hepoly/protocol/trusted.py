"""The key-holding trusted party and the encrypted dataset it produces."""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..ckks import (
    Ciphertext,
    SchemeParams,
    SecretKey,
    build_encoding_map,
    ciphertext_from_record,
    ciphertext_to_record,
    decrypt,
    encrypt,
    load_key,
    stack,
)
from ..data import Dataset
from ..errors import InputError, PersistenceError
from ..knn import select_k_smallest


@dataclass(frozen=True, eq=False)
class EncryptedDataset:
    features: Ciphertext  # batch (n, d)
    target: Ciphertext  # batch (n,)
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.features.shape) != 2 or self.target.shape != self.features.shape[:1]:
            raise InputError(f"inconsistent encrypted shapes {self.features.shape} and {self.target.shape}")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "EncryptedDataset":
        idx = np.asarray(idx)
        return EncryptedDataset(self.features[idx], self.target[idx], self.feature_names)

    def to_dict(self) -> dict:
        return {
            "kind": "encrypted_dataset",
            "feature_names": list(self.feature_names),
            "features": ciphertext_to_record(self.features),
            "target": ciphertext_to_record(self.target),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EncryptedDataset":
        if doc.get("kind") != "encrypted_dataset":
            raise PersistenceError("not an encrypted dataset file", "kind")
        if "features" not in doc or "target" not in doc:
            raise PersistenceError("encrypted dataset needs features and target", "features")
        return cls(
            ciphertext_from_record(doc["features"]),
            ciphertext_from_record(doc["target"]),
            tuple(doc.get("feature_names", ())),
        )

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "EncryptedDataset":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise PersistenceError(f"cannot read encrypted dataset {path}: {exc}") from exc


@dataclass(frozen=True)
class OracleCall:
    """What the oracle log keeps about a query: its size, never the distances."""

    k: int
    length: int


class TrustedParty:
    """Sole holder of the secret key.

    It encrypts owner data, decrypts aggregates and predictions, and answers
    nearest-neighbour ordering queries with indices only.  Counters are
    monotone and safe to update from several threads.
    """

    def __init__(self, sk: SecretKey, params: SchemeParams, seed: int | None = None):
        self._sk = sk
        self._params = params
        self._map = build_encoding_map(params, sk)
        self._rng = np.random.default_rng(seed)
        self._lock = threading.Lock()
        self.encrypt_calls = 0
        self.decrypt_calls = 0
        self.oracle_calls = 0
        self.oracle_log: list[OracleCall] = []

    @classmethod
    def from_key_file(cls, path: str | os.PathLike, seed: int | None = None) -> "TrustedParty":
        sk, params = load_key(path)
        return cls(sk, params, seed)

    @property
    def params(self) -> SchemeParams:
        return self._params

    @property
    def N(self) -> int:
        return self._params.poly_degree_N

    def encrypt_values(self, values) -> Ciphertext:
        values = np.asarray(values, dtype=float)
        with self._lock:
            ct = encrypt(self._map, values, self._params, self._rng)
            self.encrypt_calls += values.size
        return ct

    def encrypt_dataset(self, ds: Dataset) -> EncryptedDataset:
        """Encrypt every feature and target cell, n * (d + 1) encryptions."""
        return EncryptedDataset(self.encrypt_values(ds.features), self.encrypt_values(ds.target), ds.feature_names)

    def decrypt_results(self, cts: Ciphertext | Sequence[Ciphertext]) -> np.ndarray:
        if not isinstance(cts, Ciphertext):
            cts = list(cts)
            if not cts:
                return np.empty(0)
            cts = stack(cts)
        values = np.atleast_1d(decrypt(self._map, cts))
        with self._lock:
            self.decrypt_calls += cts.size if cts.shape else 1
        return values.reshape(cts.shape) if cts.shape else values

    def order_oracle(self, distances: Ciphertext, k: int) -> list[int]:
        """Indices of the k smallest encrypted distances, nearest first."""
        if not distances.shape or len(distances.shape) != 1:
            raise InputError("distances must be a one-dimensional ciphertext batch")
        n = distances.shape[0]
        if not 1 <= k <= n:
            raise InputError(f"k must lie in [1, {n}], got {k}")
        idx = select_k_smallest(decrypt(self._map, distances), k)
        with self._lock:
            self.oracle_calls += 1
            self.oracle_log.append(OracleCall(k=k, length=n))
        return idx

    def stats(self) -> dict:
        with self._lock:
            return {
                "encrypt_calls": self.encrypt_calls,
                "decrypt_calls": self.decrypt_calls,
                "oracle_calls": self.oracle_calls,
            }


def encrypt_dataset(tp: TrustedParty, ds: Dataset) -> EncryptedDataset:
    return tp.encrypt_dataset(ds)


def decrypt_results(tp: TrustedParty, cts) -> np.ndarray:
    return tp.decrypt_results(cts)


def order_oracle(tp: TrustedParty, distances: Ciphertext, k: int) -> list[int]:
    return tp.order_oracle(distances, k)
