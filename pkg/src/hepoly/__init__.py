"""Regression, KNN and MLP inference on a toy CKKS-style homomorphic scheme."""

from .ckks import (
    Ciphertext,
    EncodingMap,
    SchemeParams,
    SecretKey,
    build_encoding_map,
    decrypt,
    encrypt,
    keygen,
    load_key,
    save_key,
)
from .errors import ConfigError, HEError, InputError, ParameterError, PersistenceError

__version__ = "0.1.0"

__all__ = [
    "Ciphertext",
    "ConfigError",
    "EncodingMap",
    "HEError",
    "InputError",
    "ParameterError",
    "PersistenceError",
    "SchemeParams",
    "SecretKey",
    "build_encoding_map",
    "decrypt",
    "encrypt",
    "keygen",
    "load_key",
    "save_key",
]
