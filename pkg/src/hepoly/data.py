"""Datasets, reversible min-max scaling, holdout splits and metrics."""

from __future__ import annotations

import csv
import math
import os
import warnings
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from .errors import InputError, PersistenceError

HOUSING_TARGET = "MEDV"
HOUSING_UNITS = "10^3 USD"


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    target: np.ndarray
    feature_names: tuple[str, ...] = ()
    target_units: str = ""
    name: str = ""

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.target, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
            raise InputError(f"features must be a non-empty n x d matrix, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise InputError(f"target length {y.shape} does not match {X.shape[0]} rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InputError("dataset contains non-finite values")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise InputError("feature_names length does not match feature count")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return replace(self, features=self.features[idx], target=self.target[idx])


def generate_synthetic(n: int = 500, kind: str = "linear", noise_sd: float = 0.01, seed: int = 0) -> Dataset:
    """One feature uniform in [-1, 1] with a seeded random linear or cubic response."""
    if n < 2:
        raise InputError(f"need at least 2 samples, got {n}")
    if noise_sd < 0:
        raise InputError("noise_sd must be non-negative")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, n)
    if kind == "linear":
        a = rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0])
        b = rng.uniform(-1.0, 1.0)
        y = a * x + b
    elif kind == "nonlinear":
        a, b, c = rng.uniform(-2.0, 2.0, 3)
        y = a * x**3 + b * x + c
    else:
        raise InputError(f"unknown synthetic kind {kind!r}")
    y = y + rng.normal(0.0, noise_sd, n)
    return Dataset(x[:, None], y, ("x",), "", f"synthetic-{kind}")


def load_csv(path: str | os.PathLike, target_column: str = HOUSING_TARGET, target_units: str = "") -> Dataset:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise PersistenceError(f"cannot read CSV {path}: {exc}") from exc
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise InputError(f"CSV {path} is empty")
    header = [h.strip() for h in rows[0]]
    if target_column not in header:
        raise InputError(f"target column {target_column!r} not found in {path}")
    if len(rows) < 2:
        raise InputError(f"CSV {path} has a header but no data rows")
    values = np.empty((len(rows) - 1, len(header)))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise InputError(f"row {i} has {len(row)} cells, header has {len(header)}")
        for j, cell in enumerate(row):
            try:
                values[i - 2, j] = float(cell)
            except ValueError:
                raise InputError(f"row {i}, column {header[j]!r}: cannot parse {cell!r} as a number") from None
    t = header.index(target_column)
    feat_cols = [j for j in range(len(header)) if j != t]
    if not feat_cols:
        raise InputError("CSV has no feature columns")
    if not target_units and target_column == HOUSING_TARGET:
        target_units = HOUSING_UNITS
    return Dataset(
        values[:, feat_cols], values[:, t], tuple(header[j] for j in feat_cols),
        target_units, os.path.basename(str(path)),
    )


def housing_csv_path() -> str:
    return str(resources.files("hepoly") / "data" / "housing.csv")


def load_housing() -> Dataset:
    """The bundled 506 x 13 Boston housing table, target MEDV."""
    return load_csv(housing_csv_path(), HOUSING_TARGET, HOUSING_UNITS)


@dataclass(frozen=True, eq=False)
class ScalerParams:
    feature_min: np.ndarray
    feature_max: np.ndarray
    target_min: float
    target_max: float

    @property
    def constant_features(self) -> np.ndarray:
        return self.feature_max == self.feature_min

    def to_dict(self) -> dict:
        return {
            "feature_min": self.feature_min.tolist(),
            "feature_max": self.feature_max.tolist(),
            "target_min": self.target_min,
            "target_max": self.target_max,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ScalerParams":
        try:
            return cls(
                np.asarray(doc["feature_min"], dtype=float),
                np.asarray(doc["feature_max"], dtype=float),
                float(doc["target_min"]),
                float(doc["target_max"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise PersistenceError(f"malformed scaler parameters: {exc}", "scaler") from exc


def fit_scaler(ds: Dataset) -> ScalerParams:
    return ScalerParams(
        ds.features.min(axis=0), ds.features.max(axis=0),
        float(ds.target.min()), float(ds.target.max()),
    )


def _scale(v, lo, hi):
    v, lo, hi = np.asarray(v, dtype=float), np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    span = hi - lo
    safe = np.where(span == 0, 1.0, span)
    return np.where(span == 0, 0.0, 2.0 * (v - lo) / safe - 1.0)


def _unscale(v, lo, hi):
    v = np.asarray(v, dtype=float)
    return (v + 1.0) * (hi - lo) / 2.0 + lo


def transform_features(X, sp: ScalerParams) -> np.ndarray:
    return _scale(X, sp.feature_min, sp.feature_max)


def transform_target(y, sp: ScalerParams) -> np.ndarray:
    return _scale(y, sp.target_min, sp.target_max)


def transform(ds: Dataset, sp: ScalerParams) -> Dataset:
    """Map each column affinely onto [-1, 1] using training min/max."""
    if len(sp.feature_min) != ds.d:
        raise InputError(f"scaler has {len(sp.feature_min)} feature columns, dataset has {ds.d}")
    return replace(ds, features=transform_features(ds.features, sp), target=transform_target(ds.target, sp))


def inverse_transform_target(values, sp: ScalerParams) -> np.ndarray:
    return _unscale(values, sp.target_min, sp.target_max)


def inverse_transform_features(X, sp: ScalerParams) -> np.ndarray:
    return _unscale(X, sp.feature_min, sp.feature_max)


@dataclass(frozen=True, eq=False)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray
    seed: int


def train_test_split(n: int, test_fraction: float = 0.2, seed: int = 0) -> SplitIndices:
    if not 0 < test_fraction < 1:
        raise InputError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if n < 2:
        raise InputError(f"need at least 2 samples to split, got {n}")
    n_test = min(max(1, math.floor(n * test_fraction + 0.5)), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return SplitIndices(np.sort(perm[n_test:]), np.sort(perm[:n_test]), seed)


@dataclass(frozen=True)
class MetricsReport:
    mae: float
    rmse: float
    r2: float
    units: str = ""

    @property
    def r2_defined(self) -> bool:
        return not math.isnan(self.r2)


def compute_metrics(y_true, y_pred, units: str = "") -> MetricsReport:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.ndim != 1 or y_true.size == 0:
        raise InputError(f"need equal non-empty vectors, got {y_true.shape} and {y_pred.shape}")
    err = y_true - y_pred
    ss_res = float(np.sum(err**2))
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0:
        warnings.warn("R^2 is undefined for a constant target; reported as NaN", RuntimeWarning, stacklevel=2)
        r2 = math.nan
    else:
        r2 = 1.0 - ss_res / ss_tot
    return MetricsReport(float(np.mean(np.abs(err))), math.sqrt(ss_res / err.size), r2, units)
