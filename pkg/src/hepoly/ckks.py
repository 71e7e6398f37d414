"""Simplified CKKS-style scheme over the ring C[X]/(X^N + 1).

A message is a real scalar placed in slot 0 of a length-N complex vector;
the remaining slots carry small masking noise.  The ciphertext is the
polynomial whose evaluations at secret-permuted roots of X^N + 1 reproduce
that slot vector.  Coefficients are double-precision complex numbers: there
is no integer scale, no modulus chain and no RLWE hardness.  The scheme is
pedagogical and must not be used to protect real data; production CKKS
deployments use N >= 2**14 with RLWE keys.

Ciphertexts are batched: ``Ciphertext.coeffs`` has shape ``(..., N)`` and
each leading index addresses one independently encrypted scalar.
"""

from __future__ import annotations

import json
import logging
import math
import os
import struct
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import InputError, ParameterError, PersistenceError

logger = logging.getLogger(__name__)

KEY_FILE_VERSION = 1
CT_MAGIC = b"HEPC"
_CT_HEADER = struct.Struct("<4sIII")  # magic, N, level, reserved -> 16 bytes
IMAG_RESIDUAL_WARN = 1e-4


@dataclass(frozen=True)
class SchemeParams:
    ring_dim_M: int = 16
    poly_degree_N: int = 8
    noise_epsilon: float = 1e-6
    deterministic_mode: bool = False

    def __post_init__(self):
        M, N = self.ring_dim_M, self.poly_degree_N
        if not isinstance(M, (int, np.integer)) or M <= 0 or M % 2:
            raise ParameterError(f"ring dimension M must be a positive even integer, got {M!r}")
        if not isinstance(N, (int, np.integer)) or N != M // 2:
            raise ParameterError(f"poly degree N must equal M/2 = {M // 2}, got {N!r}")
        if N < 2 or N & (N - 1):
            raise ParameterError(f"N must be a power of two >= 2, got {N}")
        if not math.isfinite(self.noise_epsilon) or self.noise_epsilon < 0:
            raise ParameterError(f"noise_epsilon must be finite and >= 0, got {self.noise_epsilon}")

    @classmethod
    def from_degree(cls, N: int, **kwargs) -> "SchemeParams":
        return cls(ring_dim_M=2 * N, poly_degree_N=N, **kwargs)

    @property
    def effective_noise(self) -> float:
        return 0.0 if self.deterministic_mode else float(self.noise_epsilon)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


def derive_slot_permutation(key_vector: np.ndarray) -> np.ndarray:
    """Order key entries by complex argument; equal arguments keep index order."""
    return np.argsort(np.angle(np.asarray(key_vector)), kind="stable")


@dataclass(frozen=True)
class SecretKey:
    seed: int
    key_vector: np.ndarray
    slot_permutation: np.ndarray = field(init=False)

    def __post_init__(self):
        kv = np.asarray(self.key_vector, dtype=np.complex128)
        if kv.ndim != 1:
            raise ParameterError("key_vector must be one-dimensional")
        if np.any(kv == 0):
            raise ParameterError("key_vector must not contain zero entries")
        if not np.all(np.isfinite(kv)):
            raise ParameterError("key_vector must be finite")
        object.__setattr__(self, "key_vector", _frozen(kv))
        object.__setattr__(self, "slot_permutation", _frozen(derive_slot_permutation(kv)))

    @property
    def N(self) -> int:
        return len(self.key_vector)

    def __eq__(self, other):
        if not isinstance(other, SecretKey):
            return NotImplemented
        return self.seed == other.seed and np.array_equal(self.key_vector, other.key_vector)

    def __hash__(self):
        return hash((self.seed, self.key_vector.tobytes()))


def keygen(params: SchemeParams, seed: int) -> SecretKey:
    """Draw a key vector with real and imaginary parts uniform in [-1, 1]."""
    if not isinstance(params, SchemeParams):
        raise ParameterError("params must be a SchemeParams instance")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    rng = np.random.default_rng(seed)
    N = params.poly_degree_N
    kv = rng.uniform(-1.0, 1.0, N) + 1j * rng.uniform(-1.0, 1.0, N)
    while np.any(kv == 0):  # probability ~0, but the invariant is absolute
        zero = kv == 0
        kv[zero] = rng.uniform(-1.0, 1.0, zero.sum()) + 1j * rng.uniform(-1.0, 1.0, zero.sum())
    return SecretKey(seed=seed, key_vector=kv)


@dataclass(frozen=True, eq=False)
class EncodingMap:
    """Row i of ``matrix`` holds the powers of the root assigned to slot i."""

    matrix: np.ndarray
    inverse: np.ndarray

    @property
    def N(self) -> int:
        return self.matrix.shape[0]

    def forward(self, coeffs: np.ndarray) -> np.ndarray:
        """Coefficients (..., N) -> slots (..., N)."""
        return np.asarray(coeffs) @ self.matrix.T

    def backward(self, slots: np.ndarray) -> np.ndarray:
        """Slots (..., N) -> coefficients (..., N)."""
        return np.asarray(slots) @ self.inverse.T


def slot_roots(params: SchemeParams, permutation: Sequence[int] | None = None) -> np.ndarray:
    """Roots of X^N + 1, xi**(2k+1) with xi = exp(2*pi*i/M), in slot order."""
    N, M = params.poly_degree_N, params.ring_dim_M
    order = np.arange(N) if permutation is None else np.asarray(permutation)
    return np.exp(2j * np.pi * (2 * order + 1) / M)


def build_encoding_map(params: SchemeParams, sk: SecretKey) -> EncodingMap:
    N = params.poly_degree_N
    if sk.N != N:
        raise ParameterError(f"key has {sk.N} entries but params require N={N}")
    roots = slot_roots(params, sk.slot_permutation)
    matrix = roots[:, None] ** np.arange(N)[None, :]
    # rows are distinct roots of X^N + 1, so the Vandermonde is N times a unitary
    inverse = matrix.conj().T / N
    return EncodingMap(matrix=_frozen(matrix), inverse=_frozen(inverse))


@dataclass(frozen=True, eq=False)
class Ciphertext:
    """One or more encrypted scalars; ``coeffs`` has shape ``(..., N)``."""

    coeffs: np.ndarray
    level: int = 0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim < 1 or c.shape[-1] < 2:
            raise InputError(f"ciphertext coefficients must have shape (..., N), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise InputError("ciphertext coefficients must be finite")
        if int(self.level) < 0:
            raise InputError("level must be non-negative")
        object.__setattr__(self, "coeffs", _frozen(c))
        object.__setattr__(self, "level", int(self.level))

    @property
    def N(self) -> int:
        return self.coeffs.shape[-1]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[:-1]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    def __len__(self) -> int:
        if not self.shape:
            raise TypeError("scalar ciphertext has no length")
        return self.shape[0]

    def __getitem__(self, idx) -> "Ciphertext":
        if not isinstance(idx, tuple):
            idx = (idx,)
        if len(idx) > len(self.shape) or any(i is Ellipsis for i in idx):
            raise IndexError("ciphertext indexing addresses batch axes only")
        return Ciphertext(self.coeffs[idx], self.level)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __repr__(self):
        return f"Ciphertext(shape={self.shape}, N={self.N}, level={self.level})"

    @classmethod
    def zeros(cls, N: int, shape: tuple[int, ...] = ()) -> "Ciphertext":
        return cls(np.zeros(tuple(shape) + (N,), dtype=np.complex128))


def stack(cts: Iterable[Ciphertext], axis: int = 0) -> Ciphertext:
    cts = list(cts)
    if not cts:
        raise InputError("cannot stack an empty list of ciphertexts")
    if len({c.N for c in cts}) != 1:
        raise InputError("ciphertexts have different N")
    if axis < 0:
        axis += len(cts[0].shape) + 1
    return Ciphertext(np.stack([c.coeffs for c in cts], axis=axis), max(c.level for c in cts))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def encrypt(enc_map: EncodingMap, m, params: SchemeParams, rng=None) -> Ciphertext:
    """Encrypt a real scalar, or every cell of an array of reals.

    ``rng`` is a numpy Generator or a seed; it only feeds the masking noise
    and is ignored when the effective noise is zero.
    """
    if enc_map.N != params.poly_degree_N:
        raise ParameterError(f"encoding map is {enc_map.N}x{enc_map.N} but N={params.poly_degree_N}")
    values = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise InputError("message must be finite")
    N = params.poly_degree_N
    slots = np.zeros(values.shape + (N,), dtype=np.complex128)
    eps = params.effective_noise
    if eps > 0:
        gen = _as_generator(rng)
        shape = values.shape + (N - 1,)
        slots[..., 1:] = gen.uniform(-eps, eps, shape) + 1j * gen.uniform(-eps, eps, shape)
    slots[..., 0] = values
    return Ciphertext(enc_map.backward(slots), level=0)


def decrypt(enc_map: EncodingMap, ct: Ciphertext):
    """Real part of slot 0.  Returns a float for a scalar ciphertext."""
    if ct.N != enc_map.N:
        raise InputError(f"ciphertext has N={ct.N} but the key has N={enc_map.N}")
    slot0 = ct.coeffs @ enc_map.matrix[0]
    imag = np.max(np.abs(np.imag(slot0)), initial=0.0)
    if imag > IMAG_RESIDUAL_WARN:
        logger.warning("decryption left an imaginary residual of %.3g", imag)
    out = np.real(slot0)
    return float(out) if out.ndim == 0 else out


def save_key(sk: SecretKey, params: SchemeParams, path: str | os.PathLike) -> None:
    if sk.N != params.poly_degree_N:
        raise PersistenceError(f"key length {sk.N} does not match N={params.poly_degree_N}", "key_vector")
    doc = {
        "version": KEY_FILE_VERSION,
        "M": params.ring_dim_M,
        "N": params.poly_degree_N,
        "noise_epsilon": params.noise_epsilon,
        "deterministic_mode": params.deterministic_mode,
        "seed": sk.seed,
        "key_vector": [[float(z.real), float(z.imag)] for z in sk.key_vector],
    }
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise PersistenceError(f"cannot write key file {path}: {exc}") from exc


def _require(doc: dict, name: str, kind):
    if name not in doc:
        raise PersistenceError(f"missing field {name!r}", name)
    value = doc[name]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise PersistenceError(f"field {name!r} must be an integer", name)
    if kind is float and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise PersistenceError(f"field {name!r} must be a number", name)
    if kind is list and not isinstance(value, list):
        raise PersistenceError(f"field {name!r} must be an array", name)
    return value


def _complex_pairs(pairs: Any, name: str, expected: int | None) -> np.ndarray:
    if not isinstance(pairs, list):
        raise PersistenceError(f"field {name!r} must be an array of [re, im] pairs", name)
    if expected is not None and len(pairs) != expected:
        raise PersistenceError(f"field {name!r} has {len(pairs)} entries, expected {expected}", name)
    try:
        arr = np.array(pairs, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise PersistenceError(f"field {name!r} is malformed: {exc}", name) from exc
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise PersistenceError(f"field {name!r} must hold [re, im] pairs", name)
    return arr[:, 0] + 1j * arr[:, 1]


def load_key(path: str | os.PathLike) -> tuple[SecretKey, SchemeParams]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise PersistenceError(f"key file not found: {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise PersistenceError(f"cannot read key file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise PersistenceError("key file must hold a JSON object")
    version = _require(doc, "version", int)
    if version != KEY_FILE_VERSION:
        raise PersistenceError(f"unsupported key file version {version}", "version")
    try:
        params = SchemeParams(
            ring_dim_M=_require(doc, "M", int),
            poly_degree_N=_require(doc, "N", int),
            noise_epsilon=float(_require(doc, "noise_epsilon", float)),
            deterministic_mode=bool(doc.get("deterministic_mode", False)),
        )
    except ParameterError as exc:
        raise PersistenceError(str(exc), "N") from exc
    seed = _require(doc, "seed", int)
    kv = _complex_pairs(_require(doc, "key_vector", list), "key_vector", params.poly_degree_N)
    try:
        sk = SecretKey(seed=seed, key_vector=kv)
    except ParameterError as exc:
        raise PersistenceError(str(exc), "key_vector") from exc
    return sk, params


def ciphertext_to_record(ct: Ciphertext) -> dict:
    """JSON-ready record; batched ciphertexts carry an extra ``shape`` field."""
    flat = ct.coeffs.reshape(-1)
    record = {
        "N": ct.N,
        "level": ct.level,
        "coeffs": [[float(z.real), float(z.imag)] for z in flat],
    }
    if ct.shape:
        record["shape"] = list(ct.shape)
    return record


def ciphertext_from_record(record: dict, N: int | None = None) -> Ciphertext:
    if not isinstance(record, dict):
        raise PersistenceError("ciphertext record must be an object")
    rec_N = _require(record, "N", int)
    if N is not None and rec_N != N:
        raise PersistenceError(f"record has N={rec_N}, expected {N}", "N")
    level = _require(record, "level", int)
    if level < 0:
        raise PersistenceError("level must be non-negative", "level")
    shape = tuple(record.get("shape", ()))
    count = int(np.prod(shape, dtype=np.int64)) * rec_N
    coeffs = _complex_pairs(_require(record, "coeffs", list), "coeffs", count)
    try:
        return Ciphertext(coeffs.reshape(shape + (rec_N,)), level)
    except InputError as exc:
        raise PersistenceError(str(exc), "coeffs") from exc


def serialize_ct(ct: Ciphertext) -> str:
    return json.dumps(ciphertext_to_record(ct))


def deserialize_ct(text: str | bytes, N: int | None = None) -> Ciphertext:
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PersistenceError(f"truncated or malformed ciphertext record: {exc}") from exc
    return ciphertext_from_record(record, N)


def ct_to_bytes(ct: Ciphertext) -> bytes:
    """Binary form of a single ciphertext: 16-byte header, then re/im float64 pairs."""
    if ct.shape:
        raise InputError("binary records hold a single ciphertext")
    body = np.empty(2 * ct.N, dtype="<f8")
    body[0::2] = ct.coeffs.real
    body[1::2] = ct.coeffs.imag
    return _CT_HEADER.pack(CT_MAGIC, ct.N, ct.level, 0) + body.tobytes()


def ct_from_bytes(data: bytes, N: int | None = None) -> Ciphertext:
    if len(data) < _CT_HEADER.size:
        raise PersistenceError("truncated ciphertext header", "header")
    magic, rec_N, level, _ = _CT_HEADER.unpack_from(data)
    if magic != CT_MAGIC:
        raise PersistenceError(f"bad magic {magic!r}", "magic")
    if N is not None and rec_N != N:
        raise PersistenceError(f"record has N={rec_N}, expected {N}", "N")
    expected = _CT_HEADER.size + 16 * rec_N
    if len(data) != expected:
        raise PersistenceError(f"ciphertext record is {len(data)} bytes, expected {expected}", "coeffs")
    body = np.frombuffer(data, dtype="<f8", offset=_CT_HEADER.size)
    return Ciphertext(body[0::2] + 1j * body[1::2], level)
