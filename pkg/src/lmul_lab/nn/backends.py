"""Scalar-multiplier backends for dense-layer inference.

Only the products are routed through the backend. Accumulation, bias and
activations stay in float64. FP8 backends work on encoded operand codes and
look every product up in a 256x256 table, so a quantized matmul is a
gather followed by a sum.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..formats import FpFormat, ValuePolicy, encode_array, numeric_table, ocp_policy
from ..lmul import Readout, Subnormals, product_table

# rows of the left operand processed per gather, bounds the (rows, k, n) temporary
_ROW_BLOCK = 32


@lru_cache(maxsize=None)
def _exact_table(fmt: FpFormat) -> np.ndarray:
    v = numeric_table(fmt)
    table = np.multiply.outer(v, v)
    table.setflags(write=False)
    return table


class MultiplierBackend:
    name = "backend"
    format: FpFormat | None = None
    value_policy: ValuePolicy | None = None

    @property
    def quantized(self) -> bool:
        return self.format is not None

    def multiply(self, a: float, b: float) -> float:
        return float(self.multiply_array(np.float64(a), np.float64(b)))

    def multiply_array(self, a, b) -> np.ndarray:
        """Elementwise product of real arrays (FP8 backends encode first)."""
        raise NotImplementedError

    def matmul(self, a, w) -> np.ndarray:
        """``a @ w`` with every scalar product taken from this backend."""
        raise NotImplementedError

    def __repr__(self):
        return self.name

    def __eq__(self, other):
        return type(self) is type(other) and self.__dict__ == other.__dict__

    def __hash__(self):
        return hash((type(self), self.name))


class Fp32Exact(MultiplierBackend):
    """Float32 operands, products and sums in float64 (the accuracy reference)."""

    name = "fp32"

    def multiply_array(self, a, b):
        a = np.asarray(a, dtype=np.float32).astype(np.float64)
        b = np.asarray(b, dtype=np.float32).astype(np.float64)
        return a * b

    def matmul(self, a, w):
        a = np.asarray(a, dtype=np.float32).astype(np.float64)
        w = np.asarray(w, dtype=np.float32).astype(np.float64)
        return a @ w


class _TableBackend(MultiplierBackend):
    def __init__(self, fmt: FpFormat, value_policy: ValuePolicy | None = None):
        if not isinstance(fmt, FpFormat):
            fmt = FpFormat.from_name(str(fmt))
        self.format = fmt
        self.value_policy = value_policy or ocp_policy(fmt)

    def encode(self, x) -> np.ndarray:
        return encode_array(x, self.format, self.value_policy)

    def decode(self, codes) -> np.ndarray:
        return numeric_table(self.format)[np.asarray(codes)]

    def table(self) -> np.ndarray:
        raise NotImplementedError

    def multiply_array(self, a, b):
        return self.multiply_codes(self.encode(a), self.encode(b))

    def multiply_codes(self, ca, cb) -> np.ndarray:
        return self.table()[np.asarray(ca, dtype=np.intp), np.asarray(cb, dtype=np.intp)]

    def matmul(self, a, w):
        return self.matmul_codes(self.encode(a), self.encode(w))

    def matmul_codes(self, ca, cw) -> np.ndarray:
        t = self.table()
        ca = np.asarray(ca, dtype=np.intp)
        cw = np.asarray(cw, dtype=np.intp)
        out = np.empty((ca.shape[0], cw.shape[1]))
        for i in range(0, ca.shape[0], _ROW_BLOCK):
            blk = ca[i:i + _ROW_BLOCK]
            out[i:i + _ROW_BLOCK] = t[blk[:, :, None], cw[None, :, :]].sum(axis=1)
        return out


class Fp8Exact(_TableBackend):
    """Exact product of the two FP8-encoded operands."""

    def __init__(self, fmt, value_policy=None):
        super().__init__(fmt, value_policy)
        self.name = f"fp8-{self.format.name}"

    def table(self):
        return _exact_table(self.format)


class Lmul(_TableBackend):
    """L-Mul approximate product of the two FP8-encoded operands."""

    def __init__(self, fmt, value_policy=None, readout: Readout = Readout.SUM,
                 subnormals: Subnormals = Subnormals.FLUSH_TO_ZERO):
        super().__init__(fmt, value_policy)
        self.readout = readout
        self.subnormals = subnormals
        self.name = f"lmul-{self.format.name}"

    def table(self):
        return product_table(self.format, self.readout, self.subnormals)


def make_backend(name: str, fmt=None) -> MultiplierBackend:
    """Backend from a short name: ``fp32``, ``fp8`` or ``lmul``."""
    key = name.lower()
    if key == "fp32":
        return Fp32Exact()
    if fmt is None:
        raise ValueError(f"backend {name!r} needs an FP8 format")
    if key == "fp8":
        return Fp8Exact(fmt)
    if key == "lmul":
        return Lmul(fmt)
    raise ValueError(f"unknown backend {name!r}; expected fp32, fp8 or lmul")
