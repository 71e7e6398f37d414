"""Command line interface.

    hepoly keygen  --n 8 --seed 42 --out key.txt
    hepoly encrypt --key key.txt --value 0.5
    hepoly encrypt --key key.txt --dataset housing.csv --out enc.json
    hepoly train   --model linreg --setting enc --dataset housing.csv --key key.txt --out model.json
    hepoly predict --model-file model.json --dataset housing.csv --key key.txt --encrypted
    hepoly bench   --model linreg --setting enc-enc --dataset housing.csv --key key.txt --repeats 10
    hepoly serve   --key key.txt --port 8000

``bench --server URL`` sends the experiment to a running ``serve`` instance
instead of running it in-process.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import Sequence

from . import bench as bench_mod
from .ckks import SchemeParams, ct_to_bytes, keygen, save_key, serialize_ct
from .data import (
    ScalerParams,
    compute_metrics,
    fit_scaler,
    housing_csv_path,
    inverse_transform_target,
    load_csv,
    transform,
    transform_features,
)
from .errors import HEError
from .mlp import MlpParams, TrainConfig, forward_plain, train_plain
from .protocol import TrainingServer, TrustedParty
from .regression import PolynomialRegression


def _dataset_path(name: str) -> str:
    return housing_csv_path() if name == "housing" else name


def _cmd_keygen(args) -> int:
    params = SchemeParams.from_degree(args.n, noise_epsilon=args.noise_epsilon, deterministic_mode=args.deterministic)
    sk = keygen(params, args.seed)
    save_key(sk, params, args.out)
    print(f"wrote key (N={params.poly_degree_N}, M={params.ring_dim_M}, seed={sk.seed}) to {args.out}")
    if params.poly_degree_N < 2**14:
        print("warning: toy parameters; this key offers no real security (production CKKS uses N >= 2^14)",
              file=sys.stderr)
    return 0


def _cmd_encrypt(args) -> int:
    tp = TrustedParty.from_key_file(args.key, seed=args.seed)
    if args.value is not None:
        ct = tp.encrypt_values(args.value)
        if args.out:
            with open(args.out, "wb" if args.binary else "w") as fh:
                fh.write(ct_to_bytes(ct) if args.binary else serialize_ct(ct))
        else:
            print(serialize_ct(ct))
        return 0
    if not args.dataset or not args.out:
        print("error: encrypt needs --value, or --dataset with --out", file=sys.stderr)
        return 2
    ds = load_csv(_dataset_path(args.dataset), args.target)
    scaler = fit_scaler(ds)
    enc = tp.encrypt_dataset(transform(ds, scaler))
    enc.save(args.out)
    if args.scaler_out:
        with open(args.scaler_out, "w", encoding="utf-8") as fh:
            json.dump(scaler.to_dict(), fh, indent=2)
    print(f"encrypted {ds.n} x {ds.d + 1} cells to {args.out}")
    return 0


def _cmd_train(args) -> int:
    ds = load_csv(_dataset_path(args.dataset), args.target)
    scaler = fit_scaler(ds)
    scaled = transform(ds, scaler)
    if args.model == "linreg":
        if args.setting == "enc":
            if not args.key:
                print("error: --setting enc requires --key", file=sys.stderr)
                return 2
            tp = TrustedParty.from_key_file(args.key, seed=args.seed)
            model = TrainingServer(tp).fit_linreg(tp.encrypt_dataset(scaled), args.degree)
        else:
            model = PolynomialRegression(args.degree).fit(scaled.features, scaled.target)
        model.scaler = scaler
        doc = model.to_dict()
    else:
        if args.setting == "enc":
            print("error: the MLP cannot be trained on encrypted data", file=sys.stderr)
            return 2
        cfg = TrainConfig(args.hidden, args.lr, args.epochs, args.seed, args.activation)
        params, history = train_plain(scaled.features, scaled.target, cfg)
        doc = params.to_dict()
        doc["scaler"] = scaler.to_dict()
        print(f"final training loss {history[-1]:.6f}")
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
    print(f"wrote {args.model} model to {args.out}")
    return 0


def _cmd_predict(args) -> int:
    with open(args.model_file, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("scaler") is None:
        print("error: model file carries no scaler parameters", file=sys.stderr)
        return 2
    scaler = ScalerParams.from_dict(doc["scaler"])
    ds = load_csv(_dataset_path(args.dataset), args.target)
    X = transform_features(ds.features, scaler)
    is_mlp = doc.get("kind") == "mlp_params"
    model = MlpParams.from_dict(doc) if is_mlp else PolynomialRegression.from_dict(doc)
    if args.encrypted:
        if not args.key:
            print("error: --encrypted requires --key", file=sys.stderr)
            return 2
        tp = TrustedParty.from_key_file(args.key, seed=args.seed)
        server = TrainingServer(tp)
        X_ct = tp.encrypt_values(X)
        out = server.predict_mlp(model, X_ct) if is_mlp else server.predict_linreg(model, X_ct)
        pred = tp.decrypt_results(out)
    else:
        pred = forward_plain(model, X, args.activation) if is_mlp else model.predict(X)
    y_hat = inverse_transform_target(pred, scaler)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["prediction"])
            w.writerows([[float(v)] for v in y_hat])
    else:
        for v in y_hat:
            print(f"{v:.6f}")
    m = compute_metrics(ds.target, y_hat, ds.target_units)
    print(f"MAE={m.mae:.4f} RMSE={m.rmse:.4f} R2={m.r2:.4f} {m.units}".rstrip(), file=sys.stderr)
    return 0


def _cmd_bench(args) -> int:
    fields = dict(
        model=args.model, setting=args.setting, dataset=_dataset_path(args.dataset),
        repeats=args.repeats, test_fraction=args.test_fraction, base_seed=args.seed,
        k=args.k, degree=args.degree, hidden_units=args.hidden, epochs=args.epochs,
        learning_rate=args.lr, mlp_enc_train_activation=args.mlp_enc_activation,
        synthetic_noise_sd=args.noise_sd,
    )
    if args.server:
        from .service.client import RemoteKeyService

        bench_mod.validate_setting(args.model, args.setting)
        summary = RemoteKeyService.connect(args.server).bench(**fields)["summary"]
    else:
        cfg = bench_mod.BenchConfig(key_path=args.key, poly_degree=args.n, **fields)
        summary = bench_mod.run_experiment(cfg).summary()
    print(bench_mod.format_table([summary]))
    text = bench_mod.to_csv([summary])
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print()
        print(text, end="")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    tp = TrustedParty.from_key_file(args.key, seed=args.seed)
    uvicorn.run(create_app(tp), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    seed = bench_mod.default_seed()
    p = argparse.ArgumentParser(prog="hepoly", description="Machine learning on a toy CKKS-style scheme.")
    sub = p.add_subparsers(dest="command", required=True)

    k = sub.add_parser("keygen", help="generate and save a secret key")
    k.add_argument("--n", type=int, default=8, help="polynomial degree N (M = 2N)")
    k.add_argument("--seed", type=int, default=seed)
    k.add_argument("--noise-epsilon", type=float, default=1e-6)
    k.add_argument("--deterministic", action="store_true", help="disable slot noise")
    k.add_argument("--out", required=True)
    k.set_defaults(func=_cmd_keygen)

    e = sub.add_parser("encrypt", help="encrypt a value or a CSV dataset")
    e.add_argument("--key", required=True)
    e.add_argument("--value", type=float)
    e.add_argument("--dataset")
    e.add_argument("--target", default="MEDV")
    e.add_argument("--out")
    e.add_argument("--scaler-out")
    e.add_argument("--binary", action="store_true", help="write --value as a binary record")
    e.add_argument("--seed", type=int, default=seed)
    e.set_defaults(func=_cmd_encrypt)

    t = sub.add_parser("train", help="fit a model on a full CSV dataset and save it")
    t.add_argument("--model", choices=("linreg", "mlp"), required=True)
    t.add_argument("--setting", choices=("enc", "plain"), default="plain")
    t.add_argument("--dataset", required=True)
    t.add_argument("--target", default="MEDV")
    t.add_argument("--key")
    t.add_argument("--out", required=True)
    t.add_argument("--degree", type=int, default=1)
    t.add_argument("--hidden", type=int, default=16)
    t.add_argument("--epochs", type=int, default=500)
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--activation", choices=("relu", "identity"), default="relu")
    t.add_argument("--seed", type=int, default=seed)
    t.set_defaults(func=_cmd_train)

    pr = sub.add_parser("predict", help="predict with a saved model")
    pr.add_argument("--model-file", required=True)
    pr.add_argument("--dataset", required=True)
    pr.add_argument("--target", default="MEDV")
    pr.add_argument("--encrypted", action="store_true", help="encrypt inputs and infer on ciphertexts")
    pr.add_argument("--key")
    pr.add_argument("--activation", choices=("relu", "identity"), default="relu")
    pr.add_argument("--out")
    pr.add_argument("--seed", type=int, default=seed)
    pr.set_defaults(func=_cmd_predict)

    b = sub.add_parser("bench", help="run a repeated-holdout benchmark")
    b.add_argument("--model", choices=bench_mod.MODELS, required=True)
    b.add_argument("--setting", choices=bench_mod.SETTINGS, required=True)
    b.add_argument("--dataset", required=True, help="'synthetic', 'housing' or a CSV path")
    b.add_argument("--key")
    b.add_argument("--n", type=int, default=8, help="N for a fresh key when --key is absent")
    b.add_argument("--repeats", type=int, default=10)
    b.add_argument("--test-fraction", type=float, default=0.2)
    b.add_argument("--seed", type=int, default=seed)
    b.add_argument("--k", type=int, default=3)
    b.add_argument("--degree", type=int, default=1)
    b.add_argument("--hidden", type=int, default=16)
    b.add_argument("--epochs", type=int, default=500)
    b.add_argument("--lr", type=float, default=0.01)
    b.add_argument("--mlp-enc-activation", choices=("relu", "identity"), default="identity",
                   help="hidden activation used to train the MLP for plain-enc")
    b.add_argument("--noise-sd", type=float, default=0.01, help="synthetic target noise")
    b.add_argument("--csv", help="write the CSV row here instead of stdout")
    b.add_argument("--server", help="URL of a running trusted-party service")
    b.set_defaults(func=_cmd_bench)

    s = sub.add_parser("serve", help="run the trusted-party HTTP service")
    s.add_argument("--key", required=True)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.add_argument("--seed", type=int, default=seed)
    s.set_defaults(func=_cmd_serve)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (HEError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
