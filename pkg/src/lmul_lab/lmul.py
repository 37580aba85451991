"""Bit-exact behavioral model of the L-Mul approximate FP8 multiplier.

The datapath has two adders and a post-processing stage:

* mantissa adder: ``p_m = mx + my + 2**(m - l(m))``, an (m+2)-bit sum whose
  top two bits are the *carry* selecting the normalization case;
* exponent adder: ``p_e = ex + ey + bias_star(carry)`` where ``bias_star``
  folds the re-bias and the normalization increment into one constant;
* post-processing: mantissa field per carry case, zero/underflow flush.

Two readouts of a product are offered. ``Readout.SUM`` is the value the
adders compute, ``(1 + p_m / 2**m) * 2**(Ex + Ey)`` held exactly. This is
the L-Mul formula itself. ``Readout.FIELDS`` decodes the m-bit output
mantissa and (e+1)-bit output exponent that the hardware emits. The two
agree when carry == 0b00. Otherwise they can differ: the carry 0b01 case
keeps the unshifted fraction, and an m-bit field cannot hold the extra bit.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .formats import (
    FpClass,
    FpFormat,
    Fp8Value,
    ValuePolicy,
    classify_raw,
    decode_raw,
)

OFFSET_EXPONENT = {1: 1, 2: 2, 3: 3, 4: 3, 5: 4, 6: 4}

# published per-format constants, keyed by carry case 0b00 / 0b11 / others
BIAS_STAR_TABLE = {
    "E6M1": (-31, -29, -30),
    "E5M2": (-15, -13, -14),
    "E4M3": (-7, -5, -6),
    "E3M4": (-3, -1, -2),
    "E2M5": (-1, 1, 0),
    "E1M6": (0, 2, 1),
}

# mantissa representation selected by the carry bits p_m[m+1:m]
CARRY_CASES = {0b00: "1.x", 0b01: "10.x", 0b10: "11.x", 0b11: "100.x"}


class Subnormals(enum.Enum):
    """How the multiplier treats an operand with a zero exponent field."""

    FLUSH_TO_ZERO = "ftz"  # whole exponent field zero -> operand is zero
    RAW_BITS = "raw"  # only the all-zero pattern is zero; others get the implicit 1


class Readout(enum.Enum):
    SUM = "sum"
    FIELDS = "fields"


def offset_exponent(m: int) -> int:
    return OFFSET_EXPONENT[m]


def mantissa_offset(m: int) -> int:
    """The correction term ``2**-l(m)`` in units of one mantissa LSB."""
    return 1 << (m - offset_exponent(m))


def carry_adjust(carry: int) -> int:
    return 0 if carry == 0b00 else 2 if carry == 0b11 else 1


def bias_star(fmt: FpFormat, carry: int) -> int:
    return -fmt.bias + carry_adjust(carry)


def _is_zero_operand(exp: int, man: int, subnormals: Subnormals) -> bool:
    if subnormals is Subnormals.FLUSH_TO_ZERO:
        return exp == 0
    return exp == 0 and man == 0


@dataclass(frozen=True)
class LmulProduct:
    format: FpFormat
    sign: int
    p_m_full: int  # (m+2)-bit mantissa sum
    p_e_raw: int  # ex + ey + bias_star(carry), unclamped
    out_exp: int  # (e+1)-bit output exponent field
    out_man: int  # m-bit output mantissa field
    zero: bool  # an operand is zero under the subnormal policy
    underflow: bool  # p_e_raw <= 0, output flushed
    special_input: bool = False  # an operand was Inf/NaN, processed as raw bits

    @property
    def carry(self) -> int:
        return self.p_m_full >> self.format.m

    @property
    def exp_sum(self) -> int:
        """ex + ey - bias: the biased exponent before normalization."""
        return self.p_e_raw - carry_adjust(self.carry)

    def value(self, readout: Readout = Readout.SUM) -> float:
        fmt = self.format
        if self.zero:
            mag = 0.0
        elif readout is Readout.SUM:
            mag = math.ldexp((1 << fmt.m) + self.p_m_full, self.exp_sum - fmt.bias - fmt.m)
        elif self.underflow:
            mag = 0.0
        else:
            mag = math.ldexp((1 << fmt.m) + self.out_man, self.out_exp - fmt.bias - fmt.m)
        return -mag if self.sign else mag

    def fields(self) -> tuple[int, int, int]:
        return self.sign, self.out_exp, self.out_man


def _check_pair(x: Fp8Value, y: Fp8Value) -> FpFormat:
    if x.format != y.format:
        raise ValueError(f"format mismatch: {x.format} vs {y.format}")
    return x.format


def l_mul(
    x: Fp8Value,
    y: Fp8Value,
    subnormals: Subnormals = Subnormals.FLUSH_TO_ZERO,
    value_policy: ValuePolicy = ValuePolicy.STRICT,
) -> LmulProduct:
    fmt = _check_pair(x, y)
    m = fmt.m
    sx, ex, mx = fmt.fields(x.raw)
    sy, ey, my = fmt.fields(y.raw)

    zero = _is_zero_operand(ex, mx, subnormals) or _is_zero_operand(ey, my, subnormals)
    special = any(
        classify_raw(v.raw, fmt, value_policy) in (FpClass.INFINITY, FpClass.NAN) for v in (x, y)
    )

    p_m = mx + my + mantissa_offset(m)
    carry = p_m >> m
    frac = p_m & fmt.man_mask
    p_e = ex + ey + bias_star(fmt, carry)

    underflow = p_e <= 0
    if zero or underflow:
        out_exp = out_man = 0
    else:
        out_exp = p_e
        out_man = (1 << (m - 1)) | (frac >> 1) if carry == 0b10 else frac

    return LmulProduct(fmt, sx ^ sy, p_m, p_e, out_exp, out_man, zero, underflow and not zero, special)


def l_mul_decoded(
    x: Fp8Value,
    y: Fp8Value,
    readout: Readout = Readout.SUM,
    subnormals: Subnormals = Subnormals.FLUSH_TO_ZERO,
) -> float:
    return l_mul(x, y, subnormals).value(readout)


def exact_mul(x: Fp8Value, y: Fp8Value, value_policy: ValuePolicy = ValuePolicy.STRICT) -> float:
    """Exact product of the decoded operands (NaN/Inf propagate per IEEE)."""
    fmt = _check_pair(x, y)
    return decode_raw(x.raw, fmt, value_policy) * decode_raw(y.raw, fmt, value_policy)


def l_mul_arrays(x, y, fmt: FpFormat, subnormals: Subnormals = Subnormals.FLUSH_TO_ZERO) -> dict:
    """Vectorized ``l_mul`` over raw byte arrays; returns a dict of field arrays."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    m = fmt.m
    ex, mx = (x >> m) & fmt.exp_mask, x & fmt.man_mask
    ey, my = (y >> m) & fmt.exp_mask, y & fmt.man_mask
    if subnormals is Subnormals.FLUSH_TO_ZERO:
        zero = (ex == 0) | (ey == 0)
    else:
        zero = ((ex == 0) & (mx == 0)) | ((ey == 0) & (my == 0))

    p_m = mx + my + mantissa_offset(m)
    carry = p_m >> m
    frac = p_m & fmt.man_mask
    adj = np.where(carry == 0, 0, np.where(carry == 3, 2, 1))
    p_e = ex + ey - fmt.bias + adj
    underflow = (p_e <= 0) & ~zero
    kill = zero | underflow
    man = np.where(carry == 2, (1 << (m - 1)) | (frac >> 1), frac)
    return {
        "sign": ((x ^ y) >> 7) & 1,
        "p_m_full": p_m,
        "p_e_raw": p_e,
        "out_exp": np.where(kill, 0, p_e),
        "out_man": np.where(kill, 0, man),
        "zero": zero,
        "underflow": underflow,
        "carry": carry,
    }


def l_mul_values(
    x,
    y,
    fmt: FpFormat,
    readout: Readout = Readout.SUM,
    subnormals: Subnormals = Subnormals.FLUSH_TO_ZERO,
) -> np.ndarray:
    f = l_mul_arrays(x, y, fmt, subnormals)
    if readout is Readout.SUM:
        exp = f["p_e_raw"] - np.where(f["carry"] == 0, 0, np.where(f["carry"] == 3, 2, 1))
        mag = np.ldexp(((1 << fmt.m) + f["p_m_full"]).astype(np.float64), exp - fmt.bias - fmt.m)
        mag = np.where(f["zero"], 0.0, mag)
    else:
        mag = np.ldexp(((1 << fmt.m) + f["out_man"]).astype(np.float64), f["out_exp"] - fmt.bias - fmt.m)
        mag = np.where(f["zero"] | f["underflow"], 0.0, mag)
    return np.where(f["sign"] == 1, -mag, mag)


@lru_cache(maxsize=None)
def product_table(
    fmt: FpFormat,
    readout: Readout = Readout.SUM,
    subnormals: Subnormals = Subnormals.FLUSH_TO_ZERO,
) -> np.ndarray:
    """256x256 table of decoded L-Mul results indexed [x_raw, y_raw]."""
    r = np.arange(256)
    xs, ys = np.meshgrid(r, r, indexing="ij")
    table = l_mul_values(xs, ys, fmt, readout, subnormals)
    table.setflags(write=False)
    return table
