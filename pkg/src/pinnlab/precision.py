"""Floating-point formats and software emulation of low-precision arithmetic.

All values live in ordinary 64-bit (or 32-bit) storage; a format narrower
than the storage is emulated by rounding the result of every elementary
operation back onto the format's significand grid (round-after-op, ties to
even).  This makes the arithmetic format a runtime parameter: the same code
path can execute under fp64, fp32, tf32 or bf16 semantics.

Double rounding through the wider storage is exact here: rounding an exact
result first to p' bits and then to p bits equals rounding once to p bits
whenever p' >= 2p + 2, which holds for every pair used below (53 -> 24,
24 -> 11, 24 -> 8).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PrecisionSpec:
    """One binary floating-point format.

    significand_bits counts the implicit leading bit, so fp32 has p=24 and
    epsilon = 2**(1-p) = 2**-23 (the gap between 1 and the next value up).
    """

    name: str
    significand_bits: int
    exponent_bits: int
    radix: int = 2

    @property
    def epsilon(self) -> float:
        return float(self.radix) ** (1 - self.significand_bits)

    @property
    def dtype(self):
        """Native numpy dtype used as storage for batched arithmetic."""
        return np.float64 if self.name == "fp64" else np.float32

    @property
    def is_emulated(self) -> bool:
        """True when the format is narrower than its storage dtype."""
        return self.name in ("tf32", "bf16")

    def round_array(self, arr):
        """Round an array (already in self.dtype) onto this format's grid.

        Identity for fp64/fp32, where the storage dtype is the format and
        every numpy op is already correctly rounded.
        """
        if not self.is_emulated:
            return arr
        return _mask_round_f32(np.asarray(arr, dtype=np.float32),
                               24 - self.significand_bits)

    def round_scalar(self, v: float) -> float:
        return round_to(self, v)

    def __str__(self) -> str:
        return self.name


FP64 = PrecisionSpec("fp64", significand_bits=53, exponent_bits=11)
FP32 = PrecisionSpec("fp32", significand_bits=24, exponent_bits=8)
TF32 = PrecisionSpec("tf32", significand_bits=11, exponent_bits=8)
BF16 = PrecisionSpec("bf16", significand_bits=8, exponent_bits=8)

PRECISIONS = {p.name: p for p in (FP64, FP32, TF32, BF16)}


def from_name(name: str) -> PrecisionSpec:
    try:
        return PRECISIONS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown precision {name!r}; expected one of "
                         f"{sorted(PRECISIONS)}") from None


def machine_epsilon(spec: PrecisionSpec) -> float:
    """Gap between 1 and the next representable value in the format."""
    return spec.epsilon


def _mask_round_f32(arr: np.ndarray, drop_bits: int) -> np.ndarray:
    """Round float32 values to nearest-even on a (24 - drop_bits)-bit grid.

    Rounding is done on the bit pattern: add half an ulp minus one, plus the
    kept lsb for the ties-to-even case, then clear the dropped bits.  A carry
    out of the significand correctly bumps the exponent, and overflow past
    the largest finite value lands on infinity.  NaN/inf pass through.
    """
    a = np.ascontiguousarray(arr, dtype=np.float32)
    u = a.view(np.uint32)
    lsb = (u >> np.uint32(drop_bits)) & np.uint32(1)
    half = np.uint32((1 << (drop_bits - 1)) - 1)
    rounded = (u + half + lsb) & np.uint32(~((1 << drop_bits) - 1) & 0xFFFFFFFF)
    out = rounded.view(np.float32).copy()
    keep = ~np.isfinite(a)
    if keep.any():
        out[keep] = a[keep]
    return out if arr.ndim else out.reshape(())


def round_to(spec: PrecisionSpec, v: float) -> float:
    """Round one value to nearest-even onto spec's grid (NaN -> NaN,
    overflow -> signed infinity of the format)."""
    if spec.name == "fp64":
        return float(v)
    with np.errstate(over="ignore"):
        f32 = np.float32(v)
    if spec.name == "fp32":
        return float(f32)
    return float(_mask_round_f32(np.asarray(f32), 24 - spec.significand_bits))


_OPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
}


def emulated_op(spec: PrecisionSpec, op: str, a: float, b: float) -> float:
    """Correctly rounded a <op> b in the emulated format.

    Operands are assumed representable in spec; the operation is carried out
    in float64 and rounded once onto the target grid, which is exact (see
    module docstring).  Division by zero follows IEEE semantics.
    """
    if op not in _OPS:
        raise ValueError(f"unsupported op {op!r}")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        wide = _OPS[op](np.float64(a), np.float64(b))
    return round_to(spec, float(wide))


def pairwise_sum(spec: PrecisionSpec, x: np.ndarray, axis: int) -> np.ndarray:
    """Sum along one axis via a fixed pairwise tree, rounding after every
    add.  Zero padding at odd levels is rounding-neutral (v + 0 == v)."""
    r = spec.round_array
    v = np.moveaxis(x, axis, 0)
    while v.shape[0] > 1:
        if v.shape[0] % 2:
            pad = np.zeros((1,) + v.shape[1:], dtype=v.dtype)
            v = np.concatenate([v, pad])
        v = r(v[0::2] + v[1::2])
    return v[0]


def matmul(spec: PrecisionSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a @ b under the spec's arithmetic.

    fp64/fp32 use the native BLAS product (every partial op rounded to the
    storage format).  Emulated formats round every product and reduce along
    the contraction axis with the fixed pairwise tree.
    """
    if not spec.is_emulated:
        return a @ b
    prods = spec.round_array(a[:, :, None] * b[None, :, :])
    return pairwise_sum(spec, prods, axis=1)


def reduce_sum(spec: PrecisionSpec, x: np.ndarray) -> float:
    """Sum of a 1-D array under the spec's arithmetic (fixed pairwise tree
    for emulated formats, numpy's own pairwise sum otherwise)."""
    if not spec.is_emulated:
        return float(np.sum(x))
    return float(pairwise_sum(spec, np.asarray(x, dtype=np.float32).ravel(),
                              axis=0))


def dot(spec: PrecisionSpec, a: np.ndarray, b: np.ndarray) -> float:
    """Inner product under the spec's arithmetic."""
    if not spec.is_emulated:
        return float(np.dot(a, b))
    return reduce_sum(spec, spec.round_array(a * b))
