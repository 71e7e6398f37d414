"""Repeated-holdout benchmark of the three models across data settings.

Each repeat splits with seed ``base_seed + r``, fits the scaler on the
training part, runs the model in the configured setting, maps predictions
back to original units and scores them.  Fit time covers encryption of the
training data where the setting encrypts it; predict time covers
encryption of test rows, encrypted inference and decryption of outputs.
"""

from __future__ import annotations

import csv
import io
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .ckks import SchemeParams, keygen, load_key
from .data import (
    Dataset,
    MetricsReport,
    compute_metrics,
    fit_scaler,
    generate_synthetic,
    inverse_transform_target,
    load_csv,
    load_housing,
    train_test_split,
    transform,
)
from .errors import ConfigError
from .knn import KnnRegressor
from .mlp import TrainConfig, forward_plain, train_plain
from .protocol import TrainingServer, TrustedParty
from .regression import PolynomialRegression

MODELS = ("linreg", "knn", "mlp")
SETTINGS = ("enc-enc", "plain-plain", "plain-enc", "enc-plain")
ALLOWED_SETTINGS = {
    "linreg": frozenset(SETTINGS),
    "knn": frozenset({"enc-enc", "plain-plain"}),
    "mlp": frozenset({"plain-plain", "plain-enc"}),
}
CSV_COLUMNS = (
    "model", "setting", "dataset", "repeats",
    "mae_mean", "mae_std", "rmse_mean", "rmse_std", "r2_mean", "r2_std",
    "fit_s", "predict_s", "decrypt_calls", "oracle_calls",
)


def default_seed() -> int:
    return int(os.environ.get("HEPOLY_SEED", "0"))


@dataclass(frozen=True)
class BenchConfig:
    model: str
    setting: str
    dataset: str = "synthetic"
    repeats: int = 10
    test_fraction: float = 0.2
    base_seed: int = 0
    key_path: str | None = None
    poly_degree: int = 8
    k: int = 3
    degree: int = 1
    hidden_units: int = 16
    epochs: int = 500
    learning_rate: float = 0.01
    mlp_enc_train_activation: str = "identity"
    synthetic_n: int = 500
    synthetic_noise_sd: float = 0.01
    target_column: str = "MEDV"

    def __post_init__(self):
        validate_setting(self.model, self.setting)
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if self.k < 1:
            raise ConfigError("k must be >= 1")


def validate_setting(model: str, setting: str) -> None:
    if model not in MODELS:
        raise ConfigError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")
    if setting not in SETTINGS:
        raise ConfigError(f"unknown setting {setting!r}; choose from {', '.join(SETTINGS)}")
    if setting not in ALLOWED_SETTINGS[model]:
        allowed = ", ".join(sorted(ALLOWED_SETTINGS[model]))
        raise ConfigError(f"setting {setting} is not supported for {model} (allowed: {allowed})")


def load_dataset(cfg: BenchConfig) -> Dataset:
    if cfg.dataset in ("synthetic", "synthetic-linear"):
        return generate_synthetic(cfg.synthetic_n, "linear", cfg.synthetic_noise_sd, cfg.base_seed)
    if cfg.dataset == "synthetic-nonlinear":
        return generate_synthetic(cfg.synthetic_n, "nonlinear", cfg.synthetic_noise_sd, cfg.base_seed)
    if cfg.dataset == "housing":
        return load_housing()
    return load_csv(cfg.dataset, cfg.target_column)


def make_trusted_party(cfg: BenchConfig) -> TrustedParty:
    if cfg.key_path:
        sk, params = load_key(cfg.key_path)
    else:
        params = SchemeParams.from_degree(cfg.poly_degree)
        sk = keygen(params, cfg.base_seed)
    return TrustedParty(sk, params, seed=cfg.base_seed)


def _mean_std(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1))


@dataclass
class BenchReport:
    config: BenchConfig
    metrics: list[MetricsReport] = field(default_factory=list)
    fit_seconds: list[float] = field(default_factory=list)
    predict_seconds: list[float] = field(default_factory=list)
    decrypt_calls: int = 0
    oracle_calls: int = 0
    dataset_name: str = ""

    @property
    def repeats(self) -> int:
        return len(self.metrics)

    def summary(self) -> dict:
        mae = _mean_std([m.mae for m in self.metrics])
        rmse = _mean_std([m.rmse for m in self.metrics])
        r2 = _mean_std([m.r2 for m in self.metrics])
        return {
            "model": self.config.model,
            "setting": self.config.setting,
            "dataset": self.dataset_name or self.config.dataset,
            "repeats": self.repeats,
            "mae_mean": mae[0], "mae_std": mae[1],
            "rmse_mean": rmse[0], "rmse_std": rmse[1],
            "r2_mean": r2[0], "r2_std": r2[1],
            "fit_s": float(np.mean(self.fit_seconds)),
            "predict_s": float(np.mean(self.predict_seconds)),
            "decrypt_calls": self.decrypt_calls,
            "oracle_calls": self.oracle_calls,
        }


def _run_repeat(cfg: BenchConfig, ds: Dataset, r: int, tp: TrustedParty, report: BenchReport) -> None:
    split = train_test_split(ds.n, cfg.test_fraction, cfg.base_seed + r)
    train_raw, test_raw = ds.subset(split.train), ds.subset(split.test)
    scaler = fit_scaler(train_raw)
    train, test = transform(train_raw, scaler), transform(test_raw, scaler)
    train_enc, test_enc = (s == "enc" for s in cfg.setting.split("-"))
    server = TrainingServer(tp)

    t0 = time.perf_counter()
    if cfg.model == "linreg":
        if train_enc:
            model = server.fit_linreg(tp.encrypt_dataset(train), cfg.degree)
        else:
            model = PolynomialRegression(cfg.degree).fit(train.features, train.target)
    elif cfg.model == "knn":
        if train_enc:
            model = server.fit_knn(tp.encrypt_dataset(train), cfg.k)
        else:
            model = KnnRegressor(cfg.k).fit(train.features, train.target)
    else:
        activation = cfg.mlp_enc_train_activation if test_enc else "relu"
        tcfg = TrainConfig(cfg.hidden_units, cfg.learning_rate, cfg.epochs, cfg.base_seed + r, activation)
        model, _ = train_plain(train.features, train.target, tcfg)
    t1 = time.perf_counter()

    if test_enc:
        X = tp.encrypt_values(test.features)
        if cfg.model == "linreg":
            out = server.predict_linreg(model, X)
        elif cfg.model == "knn":
            out = server.predict_knn(model, X)
        else:
            out = server.predict_mlp(model, X)
        pred = tp.decrypt_results(out)
    elif cfg.model == "mlp":
        pred = forward_plain(model, test.features, "relu")
    else:
        pred = model.predict(test.features)
    t2 = time.perf_counter()

    y_hat = inverse_transform_target(pred, scaler)
    report.metrics.append(compute_metrics(test_raw.target, y_hat, ds.target_units))
    report.fit_seconds.append(t1 - t0)
    report.predict_seconds.append(t2 - t1)


def run_experiment(cfg: BenchConfig, trusted: TrustedParty | None = None) -> BenchReport:
    validate_setting(cfg.model, cfg.setting)
    ds = load_dataset(cfg)
    tp = trusted if trusted is not None else make_trusted_party(cfg)
    before = tp.stats()
    report = BenchReport(cfg, dataset_name=ds.name)
    for r in range(cfg.repeats):
        _run_repeat(cfg, ds, r, tp, report)
    after = tp.stats()
    report.decrypt_calls = after["decrypt_calls"] - before["decrypt_calls"]
    report.oracle_calls = after["oracle_calls"] - before["oracle_calls"]
    return report


def format_table(rows: list[dict]) -> str:
    """Plain-text table: metrics as mean +- std, runtimes, call counts."""
    headers = ["Model", "Setting", "Dataset", "MAE", "RMSE", "R2", "Fit (s)", "Predict (s)", "Decrypts", "Oracle"]
    body = []
    for s in rows:
        body.append([
            s["model"], s["setting"], s["dataset"],
            f"{s['mae_mean']:.4f} ± {s['mae_std']:.4f}",
            f"{s['rmse_mean']:.4f} ± {s['rmse_std']:.4f}",
            f"{s['r2_mean']:.4f} ± {s['r2_std']:.4f}",
            f"{s['fit_s']:.4f}", f"{s['predict_s']:.4f}",
            str(s["decrypt_calls"]), str(s["oracle_calls"]),
        ])
    widths = [max(len(h), *(len(r[i]) for r in body)) for i, h in enumerate(headers)]
    line = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths))
    out = [line(headers), line(["-" * w for w in widths])]
    out.extend(line(r) for r in body)
    return "\n".join(out)


def to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for s in rows:
        writer.writerow({k: s[k] for k in CSV_COLUMNS})
    return buf.getvalue()


def config_to_dict(cfg: BenchConfig) -> dict:
    return asdict(cfg)
