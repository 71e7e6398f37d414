"""Data owner / trusted party / training server roles."""

from .server import KeyService, TrainingServer
from .trusted import (
    EncryptedDataset,
    OracleCall,
    TrustedParty,
    decrypt_results,
    encrypt_dataset,
    order_oracle,
)

__all__ = [
    "EncryptedDataset",
    "KeyService",
    "OracleCall",
    "TrainingServer",
    "TrustedParty",
    "decrypt_results",
    "encrypt_dataset",
    "order_oracle",
]
