"""HTTP client implementing the training server's ``KeyService`` interface."""

from __future__ import annotations

import httpx
import numpy as np

from ..ckks import Ciphertext
from ..errors import HEError
from .schemas import CiphertextRecord


class ServiceError(HEError):
    pass


class RemoteKeyService:
    """Talks to a running trusted-party service; holds no key material."""

    def __init__(self, client: httpx.Client):
        self.client = client

    @classmethod
    def connect(cls, base_url: str, timeout: float = 600.0) -> "RemoteKeyService":
        return cls(httpx.Client(base_url=base_url, timeout=timeout))

    def _post(self, path: str, body: dict) -> dict:
        try:
            resp = self.client.post(path, json=body)
        except httpx.HTTPError as exc:
            raise ServiceError(f"trusted party unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise ServiceError(f"{path} failed ({resp.status_code}): {resp.text}")
        return resp.json()

    def encrypt_values(self, values) -> Ciphertext:
        data = self._post("/encrypt", {"values": np.asarray(values, dtype=float).tolist()})
        return CiphertextRecord(**data["ciphertext"]).to_ciphertext()

    def decrypt_results(self, cts: Ciphertext) -> np.ndarray:
        body = {"ciphertext": CiphertextRecord.from_ciphertext(cts).model_dump()}
        data = self._post("/decrypt", body)
        values = np.asarray(data["values"], dtype=float)
        return values.reshape(data["shape"]) if data["shape"] else values

    def order_oracle(self, distances: Ciphertext, k: int) -> list[int]:
        body = {"distances": CiphertextRecord.from_ciphertext(distances).model_dump(), "k": k}
        return self._post("/order", body)["indices"]

    def bench(self, **config) -> dict:
        return self._post("/bench", config)

    def stats(self) -> dict:
        resp = self.client.get("/stats")
        resp.raise_for_status()
        return resp.json()
