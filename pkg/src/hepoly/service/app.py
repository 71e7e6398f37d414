"""HTTP front end for the trusted party.

The key never leaves this process.  Training servers talk to it through
``RemoteKeyService`` to obtain encryptions of public constants, decryptions
of aggregates and nearest-neighbour orderings.
"""

from __future__ import annotations

import math

from fastapi import FastAPI, HTTPException

from ..bench import BenchConfig, run_experiment
from ..errors import HEError
from ..protocol import TrustedParty
from .schemas import (
    BenchRequest,
    BenchResponse,
    CiphertextRecord,
    DecryptRequest,
    DecryptResponse,
    EncryptRequest,
    EncryptResponse,
    MetricsRow,
    OrderRequest,
    OrderResponse,
    PublicParams,
    Stats,
)


def create_app(tp: TrustedParty) -> FastAPI:
    app = FastAPI(title="hepoly trusted party")

    def fail(exc: Exception):
        raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/params", response_model=PublicParams)
    def params():
        return PublicParams(M=tp.params.ring_dim_M, N=tp.params.poly_degree_N)

    @app.post("/encrypt", response_model=EncryptResponse)
    def encrypt(req: EncryptRequest):
        try:
            ct = tp.encrypt_values(req.values)
        except (HEError, ValueError) as exc:
            fail(exc)
        return EncryptResponse(ciphertext=CiphertextRecord.from_ciphertext(ct))

    @app.post("/decrypt", response_model=DecryptResponse)
    def decrypt(req: DecryptRequest):
        try:
            ct = req.ciphertext.to_ciphertext(tp.N)
            values = tp.decrypt_results(ct)
        except HEError as exc:
            fail(exc)
        return DecryptResponse(values=values.ravel().tolist(), shape=list(ct.shape))

    @app.post("/order", response_model=OrderResponse)
    def order(req: OrderRequest):
        try:
            indices = tp.order_oracle(req.distances.to_ciphertext(tp.N), req.k)
        except HEError as exc:
            fail(exc)
        return OrderResponse(indices=indices)

    @app.get("/stats", response_model=Stats)
    def stats():
        return Stats(**tp.stats())

    @app.post("/bench", response_model=BenchResponse)
    def bench(req: BenchRequest):
        try:
            cfg = BenchConfig(**req.model_dump())
            report = run_experiment(cfg, trusted=tp)
        except HEError as exc:
            fail(exc)
        rows = [MetricsRow(mae=m.mae, rmse=m.rmse, r2=None if math.isnan(m.r2) else m.r2) for m in report.metrics]
        return BenchResponse(summary=report.summary(), per_repeat=rows)

    return app
