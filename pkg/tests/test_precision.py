"""Format definitions, rounding and emulation against independent oracles."""

import math
from fractions import Fraction

import numpy as np
import pytest

from pinnlab.precision import (BF16, FP32, FP64, TF32, emulated_op,
                               from_name, machine_epsilon, round_to)

ALL_SPECS = [FP64, FP32, TF32, BF16]


def oracle_round(v: float, p: int, emax: int = 127, emin: int = -126):
    """Exact-arithmetic round-to-nearest-even onto a p-bit significand grid
    with an 8-bit exponent range.  Independent of the implementation under
    test: works on Fractions of the exact input."""
    if not math.isfinite(v) or v == 0.0:
        return v
    f = Fraction(abs(v))
    _, ex = math.frexp(abs(v))
    e = ex - 1                      # 2**e <= |v| < 2**(e+1)
    q = Fraction(2) ** (max(e, emin) - (p - 1))
    n = f / q
    n_floor = n.numerator // n.denominator
    rem = n - n_floor
    if rem > Fraction(1, 2):
        n_r = n_floor + 1
    elif rem < Fraction(1, 2):
        n_r = n_floor
    else:
        n_r = n_floor + (n_floor % 2)
    r = n_r * q
    if r >= Fraction(2) ** (emax + 1):
        return math.inf if v > 0 else -math.inf
    return float(r) if v > 0 else -float(r)


class TestFormats:
    def test_epsilon_values(self):
        assert machine_epsilon(FP32) == 1.1920928955078125e-7
        assert machine_epsilon(FP64) == 2.220446049250313e-16
        assert machine_epsilon(TF32) == 2.0 ** -10
        assert machine_epsilon(BF16) == 2.0 ** -7

    def test_epsilon_formula(self):
        for spec in ALL_SPECS:
            assert spec.epsilon == spec.radix ** (1 - spec.significand_bits)

    def test_significand_ordering(self):
        ps = [s.significand_bits for s in [FP64, FP32, TF32, BF16]]
        assert ps == sorted(ps, reverse=True)
        assert ps == [53, 24, 11, 8]

    def test_exponent_bits(self):
        assert [s.exponent_bits for s in ALL_SPECS] == [11, 8, 8, 8]

    def test_tiny_format(self):
        # by definition 2**(1-p) with p=2
        from pinnlab.precision import PrecisionSpec
        assert PrecisionSpec("toy", 2, 8).epsilon == 0.5

    def test_from_name(self):
        assert from_name("fp32") is FP32
        assert from_name("BF16") is BF16
        with pytest.raises(ValueError):
            from_name("fp16")


class TestRoundTo:
    def test_fp64_identity(self):
        rng = np.random.default_rng(7)
        for v in rng.standard_normal(100) * 10.0 ** rng.integers(-30, 30, 100):
            assert round_to(FP64, float(v)) == float(v)

    def test_bf16_examples(self):
        assert round_to(BF16, 1.0 + 2.0 ** -9) == 1.0
        assert round_to(TF32, 1.0 + 2.0 ** -10) == 1.0 + 2.0 ** -10

    def test_special_values(self):
        for spec in ALL_SPECS:
            assert math.isnan(round_to(spec, math.nan))
            assert round_to(spec, math.inf) == math.inf
            assert round_to(spec, -math.inf) == -math.inf
            assert round_to(spec, 0.0) == 0.0

    def test_overflow_to_inf(self):
        # beyond the largest finite float32-family value
        assert round_to(FP32, 1e39) == math.inf
        assert round_to(BF16, -1e39) == -math.inf

    def test_idempotent(self):
        rng = np.random.default_rng(11)
        vals = rng.standard_normal(500) * 10.0 ** rng.integers(-20, 20, 500)
        for spec in ALL_SPECS:
            for v in vals:
                once = round_to(spec, float(v))
                assert round_to(spec, once) == once

    def test_bf16_exhaustive_fixed_points(self):
        # every representable bf16 value (float32 with a 16-bit-clean
        # pattern) must round to itself; top 16 bits enumerate them all
        patterns = np.arange(2 ** 16, dtype=np.uint32) << 16
        values = patterns.view(np.float32)
        finite = np.isfinite(values)
        rounded = BF16.round_array(values[finite])
        assert rounded.view(np.uint32).tolist() == \
            values[finite].view(np.uint32).tolist()

    def test_bf16_against_fraction_oracle(self):
        rng = np.random.default_rng(3)
        vals = np.concatenate([
            rng.standard_normal(400) * 10.0 ** rng.integers(-10, 10, 400),
            1.0 + rng.random(100),            # near the round-even boundary
            [1 + 2.0 ** -8, 1 + 2.0 ** -9, 1 + 3 * 2.0 ** -9, 2.0 ** -130],
        ])
        for v in vals:
            assert round_to(BF16, float(v)) == pytest.approx(
                oracle_round(float(v), 8), abs=0.0), v

    def test_tf32_against_fraction_oracle(self):
        rng = np.random.default_rng(4)
        vals = np.concatenate([
            rng.standard_normal(400) * 10.0 ** rng.integers(-10, 10, 400),
            1.0 + rng.random(100),
            [1 + 2.0 ** -11, 1 + 2.0 ** -10, 1 + 3 * 2.0 ** -12],
        ])
        for v in vals:
            assert round_to(TF32, float(v)) == pytest.approx(
                oracle_round(float(v), 11), abs=0.0), v


class TestEmulatedOp:
    def test_half_ulp_absorbed(self):
        assert emulated_op(FP32, "+", 1.0, 2.0 ** -24) == 1.0
        assert emulated_op(FP32, "+", 1.0, 2.0 ** -23) == 1.0 + 2.0 ** -23

    def test_one_plus_eps(self):
        for spec in ALL_SPECS:
            eps = machine_epsilon(spec)
            assert emulated_op(spec, "+", 1.0, eps) != 1.0
            assert emulated_op(spec, "+", 1.0, eps / 2.0) == 1.0

    def test_bf16_product(self):
        assert emulated_op(BF16, "*", 1.5, 1.5) == 2.25

    def test_division_by_zero(self):
        assert emulated_op(FP32, "/", 1.0, 0.0) == math.inf
        assert emulated_op(FP32, "/", -1.0, 0.0) == -math.inf
        assert math.isnan(emulated_op(FP32, "/", 0.0, 0.0))

    def test_unknown_op(self):
        with pytest.raises(ValueError):
            emulated_op(FP32, "%", 1.0, 2.0)

    def test_fp32_matches_native_bulk(self):
        # 1e5 random operand pairs per op: float64-compute-then-round must
        # agree bit-exactly with native float32 arithmetic
        rng = np.random.default_rng(12)
        n = 100_000
        a32 = (rng.standard_normal(n)
               * 10.0 ** rng.integers(-18, 18, n)).astype(np.float32)
        b32 = (rng.standard_normal(n)
               * 10.0 ** rng.integers(-18, 18, n)).astype(np.float32)
        a64, b64 = a32.astype(np.float64), b32.astype(np.float64)
        for native, wide in [
            (a32 + b32, a64 + b64), (a32 - b32, a64 - b64),
            (a32 * b32, a64 * b64), (a32 / b32, a64 / b64),
        ]:
            emulated = wide.astype(np.float32)
            assert np.array_equal(native.view(np.uint32),
                                  emulated.view(np.uint32))

    def test_fp32_matches_native_scalar_api(self):
        rng = np.random.default_rng(13)
        for _ in range(400):
            a = np.float32(rng.standard_normal() * 10.0 ** rng.integers(-9, 9))
            b = np.float32(rng.standard_normal() * 10.0 ** rng.integers(-9, 9))
            for op, fn in [("+", np.add), ("-", np.subtract),
                           ("*", np.multiply), ("/", np.divide)]:
                got = emulated_op(FP32, op, float(a), float(b))
                want = float(fn(a, b, dtype=np.float32))
                assert got == want or (math.isnan(got) and math.isnan(want))
