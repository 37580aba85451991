"""Bit-exact models of the L-Mul approximate FP8 multiplier: behavioral
reference, LUT/carry-chain netlist, exhaustive error analysis and a small
neural-network inference harness."""

__version__ = "0.1.0"

from .formats import (  # noqa: E402
    E1M6, E2M5, E3M4, E4M3, E5M2, E6M1, FORMATS, Fp8Value, FpClass, FpFormat, ValuePolicy,
    classify, decode, encode_nearest,
)
from .lmul import Readout, Subnormals, exact_mul, l_mul, l_mul_decoded  # noqa: E402

__all__ = [
    "E1M6", "E2M5", "E3M4", "E4M3", "E5M2", "E6M1", "FORMATS", "Fp8Value", "FpClass", "FpFormat",
    "ValuePolicy", "classify", "decode", "encode_nearest", "Readout", "Subnormals", "exact_mul",
    "l_mul", "l_mul_decoded",
]
