"""Request and response bodies for the trusted-party service."""

from __future__ import annotations

from typing import Optional, Union

from pydantic import BaseModel, Field

from ..ckks import Ciphertext, ciphertext_from_record, ciphertext_to_record


class CiphertextRecord(BaseModel):
    N: int = Field(ge=2)
    level: int = Field(default=0, ge=0)
    coeffs: list[tuple[float, float]]
    shape: list[int] = Field(default_factory=list)

    @classmethod
    def from_ciphertext(cls, ct: Ciphertext) -> "CiphertextRecord":
        return cls(**ciphertext_to_record(ct))

    def to_ciphertext(self, N: int | None = None) -> Ciphertext:
        return ciphertext_from_record(
            {"N": self.N, "level": self.level, "coeffs": [list(c) for c in self.coeffs], "shape": self.shape}, N
        )


class PublicParams(BaseModel):
    M: int
    N: int


class EncryptRequest(BaseModel):
    values: Union[float, list[float], list[list[float]]]


class EncryptResponse(BaseModel):
    ciphertext: CiphertextRecord


class DecryptRequest(BaseModel):
    ciphertext: CiphertextRecord


class DecryptResponse(BaseModel):
    values: list[float]
    shape: list[int]


class OrderRequest(BaseModel):
    distances: CiphertextRecord
    k: int = Field(ge=1)


class OrderResponse(BaseModel):
    indices: list[int]


class Stats(BaseModel):
    encrypt_calls: int
    decrypt_calls: int
    oracle_calls: int


class BenchRequest(BaseModel):
    model: str
    setting: str
    dataset: str = "housing"
    repeats: int = Field(default=10, ge=1)
    test_fraction: float = Field(default=0.2, gt=0, lt=1)
    base_seed: int = 0
    k: int = 3
    degree: int = 1
    hidden_units: int = 16
    epochs: int = 500
    learning_rate: float = 0.01
    mlp_enc_train_activation: str = "identity"
    synthetic_noise_sd: float = 0.01


class MetricsRow(BaseModel):
    mae: float
    rmse: float
    r2: Optional[float]


class BenchResponse(BaseModel):
    summary: dict[str, Union[str, int, float, None]]
    per_repeat: list[MetricsRow]
