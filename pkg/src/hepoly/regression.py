"""Polynomial regression trained through homomorphically accumulated normal equations.

The training server expands every encrypted row into monomials, builds the
Gram matrix A = Phi^T Phi and the moment vector b = Phi^T y with ciphertext
products and sums, and hands only those p^2 + p aggregates to the key
holder for decryption.  The small p x p system is then solved in plaintext.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from . import ops
from .ckks import Ciphertext
from .data import ScalerParams
from .errors import InputError, PersistenceError

MODEL_KIND = "polynomial_regression"


class Decryptor(Protocol):
    def encrypt_values(self, values) -> Ciphertext: ...

    def decrypt_results(self, cts: Ciphertext) -> np.ndarray: ...


class IllConditionedSystemWarning(RuntimeWarning):
    """The normal equations were singular and a ridge term was added."""


@dataclass(frozen=True)
class FeatureMapSpec:
    degree: int = 1
    include_intercept: bool = True

    def __post_init__(self):
        if int(self.degree) < 1:
            raise InputError(f"degree must be >= 1, got {self.degree}")

    def width(self, d: int) -> int:
        return int(self.include_intercept) + self.degree * d


def expand_features_plain(X, spec: FeatureMapSpec) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    cols = [X[:, [f]] ** j for f in range(X.shape[1]) for j in range(1, spec.degree + 1)]
    if spec.include_intercept:
        cols.insert(0, np.ones((X.shape[0], 1)))
    return np.hstack(cols)


def _concat(parts: list[Ciphertext]) -> Ciphertext:
    """Concatenate along the last batch axis."""
    return Ciphertext(np.concatenate([p.coeffs for p in parts], axis=-2), max(p.level for p in parts))


def expand_features_enc(row: Ciphertext, spec: FeatureMapSpec, one: Ciphertext | None = None) -> Ciphertext:
    """Monomials of encrypted features, batch axes (..., d) -> (..., p).

    Column order matches ``expand_features_plain``: intercept, then for each
    feature its powers 1..degree.  ``one`` is an encryption of 1.0 and is
    required when the feature map includes an intercept.
    """
    if not row.shape or row.shape[-1] == 0:
        raise InputError("cannot expand an empty row")
    powers = [row]
    for _ in range(spec.degree - 1):
        powers.append(ops.mul_ct(powers[-1], row))
    # interleave so each feature's powers sit together
    stacked = np.stack([p.coeffs for p in powers], axis=-2)  # (..., d, degree, N)
    flat = stacked.reshape(row.shape[:-1] + (row.shape[-1] * spec.degree, row.N))
    parts = [Ciphertext(flat, max(p.level for p in powers))]
    if spec.include_intercept:
        if one is None:
            raise InputError("an encrypted constant 1 is required for the intercept column")
        ones = np.broadcast_to(one.coeffs, row.shape[:-1] + (1, row.N))
        parts.insert(0, Ciphertext(ones, one.level))
    return _concat(parts)


@dataclass(frozen=True)
class NormalSystem:
    A: Ciphertext  # batch (p, p)
    b: Ciphertext  # batch (p,)

    @property
    def p(self) -> int:
        return self.b.shape[0]


def accumulate_normal_system(phi: Ciphertext, targets: Ciphertext) -> NormalSystem:
    """Gram matrix and moment vector from encrypted expansions (n, p) and targets (n,)."""
    if len(phi.shape) != 2:
        raise InputError(f"expansions must have batch shape (n, p), got {phi.shape}")
    n, p = phi.shape
    if targets.shape != (n,):
        raise InputError(f"{n} expanded rows but targets have batch shape {targets.shape}")
    rows, cols = np.triu_indices(p)
    upper = ops.ct_sum(ops.mul_ct(phi[:, rows], phi[:, cols]), axis=0)
    A = np.empty((p, p, phi.N), dtype=np.complex128)
    A[rows, cols] = upper.coeffs
    A[cols, rows] = upper.coeffs
    y = Ciphertext(targets.coeffs[:, None, :], targets.level)
    b = ops.ct_sum(ops.mul_ct(phi, y), axis=0)
    return NormalSystem(Ciphertext(A, upper.level), b)


def normal_system_plain(phi, y) -> tuple[np.ndarray, np.ndarray]:
    phi = np.asarray(phi, dtype=float)
    return phi.T @ phi, phi.T @ np.asarray(y, dtype=float)


def decrypt_normal_system(system: NormalSystem, trusted: Decryptor) -> tuple[np.ndarray, np.ndarray]:
    """One trusted-party round trip for all p^2 + p aggregates."""
    p = system.p
    batch = Ciphertext(
        np.concatenate([system.A.coeffs.reshape(p * p, -1), system.b.coeffs]),
        max(system.A.level, system.b.level),
    )
    values = np.asarray(trusted.decrypt_results(batch), dtype=float)
    return values[: p * p].reshape(p, p), values[p * p:]


def solve_system(A, b, sym_tol: float = 1e-6, cond_limit: float = 1e12) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
        raise InputError(f"need a square system, got A{A.shape} and b{b.shape}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise InputError("normal system contains non-finite entries")
    scale = max(1.0, float(np.max(np.abs(A), initial=0.0)))
    if np.max(np.abs(A - A.T), initial=0.0) > sym_tol * scale:
        raise InputError("normal matrix is not symmetric")
    A = (A + A.T) / 2
    p = A.shape[0]
    if np.linalg.cond(A) < cond_limit:
        try:
            return np.linalg.solve(A, b)
        except np.linalg.LinAlgError:
            pass
    lam = 1e-8 * np.trace(A) / p
    if lam <= 0:
        lam = 1e-8
    warnings.warn(f"singular normal equations; solving with ridge {lam:.3g}", IllConditionedSystemWarning, stacklevel=2)
    return np.linalg.solve(A + lam * np.eye(p), b)


class PolynomialRegression:
    """Least-squares fit over per-feature monomials, plaintext or encrypted."""

    def __init__(self, degree: int = 1, include_intercept: bool = True):
        self.spec = FeatureMapSpec(degree, include_intercept)
        self.theta_: np.ndarray | None = None
        self.fit_mode: str | None = None
        self.n_features_: int | None = None
        self.scaler: ScalerParams | None = None

    def _check_fitted(self, d: int) -> None:
        if self.theta_ is None:
            raise InputError("model is not fitted")
        if d != self.n_features_:
            raise InputError(f"model expects {self.n_features_} features, got {d}")

    def fit(self, X, y) -> "PolynomialRegression":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise InputError("X must be a non-empty matrix")
        A, b = normal_system_plain(expand_features_plain(X, self.spec), y)
        self.theta_ = solve_system(A, b)
        self.fit_mode = "plain"
        self.n_features_ = X.shape[1]
        return self

    def fit_encrypted(self, X: Ciphertext, y: Ciphertext, trusted: Decryptor) -> "PolynomialRegression":
        """Train on ciphertexts; ``trusted`` decrypts only the aggregated system."""
        if len(X.shape) != 2:
            raise InputError(f"encrypted features must have batch shape (n, d), got {X.shape}")
        one = trusted.encrypt_values(1.0) if self.spec.include_intercept else None
        system = accumulate_normal_system(expand_features_enc(X, self.spec, one), y)
        A, b = decrypt_normal_system(system, trusted)
        self.theta_ = solve_system(A, b)
        self.fit_mode = "enc"
        self.n_features_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        self._check_fitted(X.shape[1])
        return expand_features_plain(X, self.spec) @ self.theta_

    def predict_encrypted(self, X: Ciphertext) -> Ciphertext:
        """Apply plaintext coefficients to encrypted rows (..., d); result stays encrypted."""
        if not X.shape:
            raise InputError("encrypted input needs a feature axis")
        self._check_fitted(X.shape[-1])
        spec = FeatureMapSpec(self.spec.degree, include_intercept=False)
        terms = expand_features_enc(X, spec)
        if self.spec.include_intercept:
            return ops.add_const(ops.weighted_sum(terms, self.theta_[1:]), self.theta_[0])
        return ops.weighted_sum(terms, self.theta_)

    def to_dict(self) -> dict:
        if self.theta_ is None:
            raise InputError("model is not fitted")
        return {
            "kind": MODEL_KIND,
            "theta": self.theta_.tolist(),
            "degree": self.spec.degree,
            "include_intercept": self.spec.include_intercept,
            "n_features": self.n_features_,
            "fit_mode": self.fit_mode,
            "scaler": None if self.scaler is None else self.scaler.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PolynomialRegression":
        if doc.get("kind") != MODEL_KIND:
            raise PersistenceError(f"not a {MODEL_KIND} model file", "kind")
        try:
            model = cls(int(doc["degree"]), bool(doc["include_intercept"]))
            model.theta_ = np.asarray(doc["theta"], dtype=float)
            model.n_features_ = int(doc["n_features"])
            model.fit_mode = doc.get("fit_mode")
        except (KeyError, TypeError, ValueError) as exc:
            raise PersistenceError(f"malformed regression model: {exc}") from exc
        if model.theta_.shape != (model.spec.width(model.n_features_),):
            raise PersistenceError("theta length does not match degree and feature count", "theta")
        if doc.get("scaler") is not None:
            model.scaler = ScalerParams.from_dict(doc["scaler"])
        return model

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "PolynomialRegression":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise PersistenceError(f"cannot read model file {path}: {exc}") from exc
