"""8-bit floating-point formats: layout, exact decode, RNE encode, classification.

An ExMy byte is ``sign | exponent[e] | mantissa[m]`` with ``e + m == 7`` and
``bias = 2**(e-1) - 1``. Two conventions for the all-ones exponent are
supported:

* ``ValuePolicy.STRICT``: IEEE-style; all-ones exponent is Inf (mantissa 0)
  or NaN (mantissa != 0).
* ``ValuePolicy.EXTENDED``: E4M3FN-style; only the all-ones exponent *and*
  all-ones mantissa pattern is NaN, everything else is finite (E4M3 max 448).

Every finite FP8 value, and every product of two of them, is exactly
representable as a Python float, so decode returns floats with no rounding.
"""
from __future__ import annotations

import enum
import math
from bisect import bisect_left
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class ValuePolicy(enum.Enum):
    STRICT = "strict"
    EXTENDED = "extended"


class FpClass(enum.Enum):
    ZERO = "zero"
    SUBNORMAL = "subnormal"
    NORMAL = "normal"
    INFINITY = "infinity"
    NAN = "nan"


@dataclass(frozen=True)
class FpFormat:
    e: int
    m: int

    def __post_init__(self):
        if not (1 <= self.e <= 6 and 1 <= self.m <= 6 and self.e + self.m == 7):
            raise ValueError(f"unsupported FP8 layout E{self.e}M{self.m}")

    @property
    def bias(self) -> int:
        return 2 ** (self.e - 1) - 1

    @property
    def name(self) -> str:
        return f"E{self.e}M{self.m}"

    @property
    def exp_mask(self) -> int:
        return (1 << self.e) - 1

    @property
    def man_mask(self) -> int:
        return (1 << self.m) - 1

    def fields(self, raw: int) -> tuple[int, int, int]:
        """Split a byte into (sign, exponent field, mantissa field)."""
        return (raw >> 7) & 1, (raw >> self.m) & self.exp_mask, raw & self.man_mask

    def pack(self, sign: int, exp: int, man: int) -> int:
        return (sign << 7) | (exp << self.m) | man

    def max_finite(self, policy: ValuePolicy = ValuePolicy.STRICT) -> float:
        return float(finite_values(self, policy)[-1])

    def __str__(self):
        return self.name

    @classmethod
    def from_name(cls, name: str) -> "FpFormat":
        s = name.strip().upper()
        if len(s) == 4 and s[0] == "E" and s[2] == "M" and s[1].isdigit() and s[3].isdigit():
            return cls(int(s[1]), int(s[3]))
        raise ValueError(f"unknown FP8 format {name!r}")


E6M1 = FpFormat(6, 1)
E5M2 = FpFormat(5, 2)
E4M3 = FpFormat(4, 3)
E3M4 = FpFormat(3, 4)
E2M5 = FpFormat(2, 5)
E1M6 = FpFormat(1, 6)
FORMATS = (E6M1, E5M2, E4M3, E3M4, E2M5, E1M6)


def ocp_policy(fmt: FpFormat) -> ValuePolicy:
    """IEEE-style specials for wide exponents (E5M2 and up), finite-extended
    encoding for E4M3 and narrower, following the OCP FP8 convention."""
    return ValuePolicy.STRICT if fmt.e >= 5 else ValuePolicy.EXTENDED


def classify_raw(raw: int, fmt: FpFormat, policy: ValuePolicy = ValuePolicy.STRICT) -> FpClass:
    _, exp, man = fmt.fields(raw)
    if exp == 0:
        return FpClass.ZERO if man == 0 else FpClass.SUBNORMAL
    if exp == fmt.exp_mask:
        if policy is ValuePolicy.STRICT:
            return FpClass.INFINITY if man == 0 else FpClass.NAN
        if man == fmt.man_mask:
            return FpClass.NAN
    return FpClass.NORMAL


def decode_numeric(raw: int, fmt: FpFormat) -> float:
    """Value of the bit pattern by the normal/subnormal formula alone,
    ignoring any special-value reservation."""
    sign, exp, man = fmt.fields(raw)
    if exp == 0:
        mag = math.ldexp(man, 1 - fmt.bias - fmt.m)
    else:
        mag = math.ldexp((1 << fmt.m) + man, exp - fmt.bias - fmt.m)
    return -mag if sign else mag


def decode_raw(raw: int, fmt: FpFormat, policy: ValuePolicy = ValuePolicy.STRICT) -> float:
    cls = classify_raw(raw, fmt, policy)
    if cls is FpClass.NAN:
        return math.nan
    if cls is FpClass.INFINITY:
        return -math.inf if raw >> 7 else math.inf
    if cls is FpClass.ZERO:
        return 0.0
    return decode_numeric(raw, fmt)


@lru_cache(maxsize=None)
def decode_table(fmt: FpFormat, policy: ValuePolicy = ValuePolicy.STRICT) -> np.ndarray:
    """All 256 decoded values (NaN/Inf markers for specials); read-only."""
    table = np.array([decode_raw(r, fmt, policy) for r in range(256)])
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def numeric_table(fmt: FpFormat) -> np.ndarray:
    table = np.array([decode_numeric(r, fmt) for r in range(256)])
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def class_table(fmt: FpFormat, policy: ValuePolicy = ValuePolicy.STRICT) -> tuple[FpClass, ...]:
    return tuple(classify_raw(r, fmt, policy) for r in range(256))


@lru_cache(maxsize=None)
def finite_values(fmt: FpFormat, policy: ValuePolicy = ValuePolicy.STRICT) -> np.ndarray:
    """Non-negative finite magnitudes in raw order 0x00, 0x01, ...; raw code
    of ``finite_values[i]`` is ``i``."""
    classes = class_table(fmt, policy)
    n = 0
    while n < 128 and classes[n] not in (FpClass.INFINITY, FpClass.NAN):
        n += 1
    vals = np.array([decode_numeric(r, fmt) for r in range(n)])
    vals.setflags(write=False)
    return vals


def encode_nearest(x: float, fmt: FpFormat, policy: ValuePolicy = ValuePolicy.STRICT) -> int:
    """Round-to-nearest-even into ``fmt``; saturates to max finite, never
    produces Inf/NaN. Returns the raw byte."""
    if math.isnan(x):
        raise ValueError("cannot encode NaN")
    sign = 1 if math.copysign(1.0, x) < 0 and x != 0 else 0
    mag = abs(x)
    vals = finite_values(fmt, policy)
    i = bisect_left(vals, mag)
    if i == len(vals):
        code = i - 1
    elif vals[i] == mag or i == 0:
        code = i
    else:
        lo, hi = vals[i - 1], vals[i]
        if mag - lo < hi - mag:
            code = i - 1
        elif mag - lo > hi - mag:
            code = i
        else:
            code = i - 1 if (i - 1) % 2 == 0 else i
    return (sign << 7) | code if code else 0


def encode_array(x, fmt: FpFormat, policy: ValuePolicy = ValuePolicy.STRICT) -> np.ndarray:
    """Vectorized ``encode_nearest``; returns uint8 codes."""
    x = np.asarray(x, dtype=np.float64)
    if np.isnan(x).any():
        raise ValueError("cannot encode NaN")
    vals = finite_values(fmt, policy)
    mag = np.abs(x)
    i = np.searchsorted(vals, mag, side="left")
    hi = np.minimum(i, len(vals) - 1)
    lo = np.maximum(i - 1, 0)
    d_lo = mag - vals[lo]
    d_hi = vals[hi] - mag
    pick_lo = (d_lo < d_hi) | ((d_lo == d_hi) & (lo % 2 == 0))
    code = np.where(i >= len(vals), len(vals) - 1, np.where(i == 0, 0, np.where(pick_lo, lo, hi)))
    sign = (x < 0) & (code != 0)
    return (code | (sign.astype(np.int64) << 7)).astype(np.uint8)


@dataclass(frozen=True)
class Fp8Value:
    raw: int
    format: FpFormat = E4M3

    def __post_init__(self):
        if not 0 <= self.raw <= 0xFF:
            raise ValueError(f"raw byte out of range: {self.raw}")

    @property
    def sign(self) -> int:
        return self.raw >> 7

    @property
    def exponent(self) -> int:
        return (self.raw >> self.format.m) & self.format.exp_mask

    @property
    def mantissa(self) -> int:
        return self.raw & self.format.man_mask

    def decode(self, policy: ValuePolicy = ValuePolicy.STRICT) -> float:
        return decode_raw(self.raw, self.format, policy)

    def classify(self, policy: ValuePolicy = ValuePolicy.STRICT) -> FpClass:
        return classify_raw(self.raw, self.format, policy)

    @classmethod
    def encode(cls, x: float, fmt: FpFormat, policy: ValuePolicy = ValuePolicy.STRICT) -> "Fp8Value":
        return cls(encode_nearest(x, fmt, policy), fmt)

    def __repr__(self):
        return f"Fp8Value(0x{self.raw:02X}, {self.format.name})"


def decode(v: Fp8Value, policy: ValuePolicy = ValuePolicy.STRICT) -> float:
    return v.decode(policy)


def classify(v: Fp8Value, policy: ValuePolicy = ValuePolicy.STRICT) -> FpClass:
    return v.classify(policy)
