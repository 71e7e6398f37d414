"""Homomorphic arithmetic on (batched) ciphertexts.

All operations act cell-wise on the batch axes and follow numpy
broadcasting there; the last axis is always the N coefficients.

Ciphertext products use schoolbook convolution followed by exact
reduction modulo X^N + 1.  That is O(N^2) per product and the right choice
at N <= 64; beyond roughly N = 256 an FFT convolution becomes cheaper.
"""

from __future__ import annotations

import contextlib
import contextvars
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .ckks import Ciphertext, stack
from .errors import InputError


@dataclass
class OpCounts:
    """Cell-level operation tallies collected inside ``count_ops``."""

    ct_mul: int = 0
    const_mul: int = 0
    add: int = 0


_counters: contextvars.ContextVar[tuple[OpCounts, ...]] = contextvars.ContextVar("_counters", default=())


@contextlib.contextmanager
def count_ops() -> Iterator[OpCounts]:
    counts = OpCounts()
    token = _counters.set(_counters.get() + (counts,))
    try:
        yield counts
    finally:
        _counters.reset(token)


def _tally(kind: str, cells: int) -> None:
    for c in _counters.get():
        setattr(c, kind, getattr(c, kind) + cells)


def _cells(coeffs: np.ndarray) -> int:
    return int(np.prod(coeffs.shape[:-1], dtype=np.int64))


def _check_pair(ca: Ciphertext, cb: Ciphertext) -> None:
    if not isinstance(ca, Ciphertext) or not isinstance(cb, Ciphertext):
        raise InputError("operands must be Ciphertext instances")
    if ca.N != cb.N:
        raise InputError(f"dimension mismatch: N={ca.N} vs N={cb.N}")


def _finite_const(alpha) -> np.ndarray:
    arr = np.asarray(alpha, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InputError("constant must be finite")
    return arr


def add(ca: Ciphertext, cb: Ciphertext) -> Ciphertext:
    _check_pair(ca, cb)
    out = ca.coeffs + cb.coeffs
    _tally("add", _cells(out))
    return Ciphertext(out, max(ca.level, cb.level))


def sub(ca: Ciphertext, cb: Ciphertext) -> Ciphertext:
    _check_pair(ca, cb)
    out = ca.coeffs - cb.coeffs
    _tally("add", _cells(out))
    return Ciphertext(out, max(ca.level, cb.level))


def add_const(ct: Ciphertext, alpha) -> Ciphertext:
    """Add the constant polynomial ``alpha``; it evaluates to alpha in every slot."""
    alpha = _finite_const(alpha)
    out = np.array(np.broadcast_to(ct.coeffs, np.broadcast_shapes(ct.coeffs.shape, alpha.shape + (1,))))
    out[..., 0] += alpha
    return Ciphertext(out, ct.level)


def mul_const(ct: Ciphertext, alpha) -> Ciphertext:
    alpha = _finite_const(alpha)
    out = ct.coeffs * alpha[..., None]
    _tally("const_mul", _cells(out))
    return Ciphertext(out, ct.level)


def convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Schoolbook product of coefficient arrays (..., N) -> (..., 2N - 1)."""
    a, b = np.broadcast_arrays(np.asarray(a), np.asarray(b))
    N = a.shape[-1]
    out = np.zeros(a.shape[:-1] + (2 * N - 1,), dtype=np.result_type(a, b))
    for k in range(N):
        out[..., k:k + N] += a[..., k:k + 1] * b
    return out


def reduce_negacyclic(p: np.ndarray, N: int) -> np.ndarray:
    """Fold coefficient j + N onto j with a sign flip, since X^N = -1."""
    p = np.asarray(p)
    L = p.shape[-1]
    if L > 2 * N - 1:
        raise InputError(f"product polynomial has {L} coefficients, at most {2 * N - 1} allowed")
    out = np.zeros(p.shape[:-1] + (N,), dtype=np.result_type(p, np.complex128))
    head = min(L, N)
    out[..., :head] = p[..., :head]
    if L > N:
        out[..., :L - N] -= p[..., N:]
    return out


def mul_ct(ca: Ciphertext, cb: Ciphertext) -> Ciphertext:
    _check_pair(ca, cb)
    out = reduce_negacyclic(convolve(ca.coeffs, cb.coeffs), ca.N)
    _tally("ct_mul", _cells(out))
    return Ciphertext(out, ca.level + cb.level + 1)


def square(ct: Ciphertext) -> Ciphertext:
    return mul_ct(ct, ct)


def _as_list(cts) -> list[Ciphertext]:
    if isinstance(cts, Ciphertext):
        if not cts.shape:
            return [cts]
        return list(cts)
    return list(cts)


def sum_many(cts: Sequence[Ciphertext] | Ciphertext) -> Ciphertext:
    """Fold ``add`` over a list, or over axis 0 of a batched ciphertext."""
    if isinstance(cts, Ciphertext) and cts.shape:
        return ct_sum(cts, axis=0)
    items = _as_list(cts)
    if not items:
        raise InputError("sum_many needs at least one ciphertext")
    total = items[0]
    for ct in items[1:]:
        total = add(total, ct)
    return total


def ct_sum(ct: Ciphertext, axis: int | tuple[int, ...] = 0) -> Ciphertext:
    """Sum cells of a batch along batch axes; equal to folding ``add``."""
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    nb = len(ct.shape)
    axes = tuple(a + nb if a < 0 else a for a in axes)
    if any(a < 0 or a >= nb for a in axes):
        raise InputError(f"axis {axis} out of range for batch shape {ct.shape}")
    if any(ct.shape[a] == 0 for a in axes):
        raise InputError("cannot sum an empty batch")
    out = ct.coeffs.sum(axis=axes)
    summed = math.prod(ct.shape[a] for a in axes)
    _tally("add", (summed - 1) * _cells(out))
    return Ciphertext(out, ct.level)


def dot_enc(xs: Sequence[Ciphertext] | Ciphertext, ys: Sequence[Ciphertext] | Ciphertext) -> Ciphertext:
    """Encrypted inner product: sum of pairwise ciphertext products."""
    xs_b = xs if isinstance(xs, Ciphertext) and xs.shape else _stack_nonempty(xs)
    ys_b = ys if isinstance(ys, Ciphertext) and ys.shape else _stack_nonempty(ys)
    if xs_b.shape[0] != ys_b.shape[0]:
        raise InputError(f"length mismatch: {xs_b.shape[0]} vs {ys_b.shape[0]}")
    return ct_sum(mul_ct(xs_b, ys_b), axis=0)


def _stack_nonempty(cts) -> Ciphertext:
    items = _as_list(cts)
    if not items:
        raise InputError("empty ciphertext list")
    return stack(items)


def weighted_sum(ct: Ciphertext, weights: np.ndarray) -> Ciphertext:
    """Plaintext matrix times encrypted vector along the last batch axis.

    ``ct`` has batch shape (..., d) and ``weights`` shape (h, d) or (d,);
    the result has batch shape (..., h) or (...).  Each output cell is the
    ``sum_many`` of ``mul_const`` terms, so no ciphertext product occurs.
    """
    W = _finite_const(weights)
    if not ct.shape or ct.shape[-1] != W.shape[-1]:
        raise InputError(f"weights expect {W.shape[-1]} inputs, ciphertext batch is {ct.shape}")
    if W.ndim == 1:
        out = np.einsum("...dn,d->...n", ct.coeffs, W)
    elif W.ndim == 2:
        out = np.einsum("...dn,hd->...hn", ct.coeffs, W)
    else:
        raise InputError("weights must be a vector or a matrix")
    terms = _cells(out) * W.shape[-1]
    _tally("const_mul", terms)
    _tally("add", terms - _cells(out))
    return Ciphertext(out, ct.level)
