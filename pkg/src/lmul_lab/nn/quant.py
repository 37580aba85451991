"""Per-tensor power-of-two scaling into an FP8 format.

Each weight matrix and each layer input gets one scale ``2**k``: the largest
power of two for which ``absmax * scale`` still fits under the format's max
finite value. Multiplying by a power of two is exact in binary floating
point, so scaling only moves the tensor inside the FP8 dynamic range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from ..formats import FpFormat, ValuePolicy, ocp_policy


def power_of_two_scale(absmax: float, max_finite: float) -> float:
    if not absmax > 0 or not math.isfinite(absmax):
        return 1.0
    k = math.floor(math.log2(max_finite / absmax))
    # log2 may land one off at exact powers of two
    while math.ldexp(absmax, k) > max_finite:
        k -= 1
    while math.ldexp(absmax, k + 1) <= max_finite:
        k += 1
    return math.ldexp(1.0, k)


@dataclass(frozen=True)
class QuantScheme:
    format: FpFormat
    value_policy: ValuePolicy
    weight_scales: tuple[float, ...]
    act_scales: tuple[float, ...]

    @classmethod
    def for_model(cls, model, fmt: FpFormat, value_policy: ValuePolicy | None = None) -> "QuantScheme":
        """Scales from the model's weights and the activation ranges it
        recorded on its training data."""
        policy = value_policy or ocp_policy(fmt)
        top = fmt.max_finite(policy)
        w = tuple(power_of_two_scale(float(abs(layer.weight).max()), top) for layer in model.layers_)
        a = tuple(power_of_two_scale(float(m), top) for m in model.act_absmax_)
        return cls(fmt, policy, w, a)

    def describe(self) -> dict:
        return {
            "scheme": "per-tensor power-of-two",
            "format": self.format.name,
            "value_policy": self.value_policy.value,
            "weight_scales": [math.log2(s) for s in self.weight_scales],
            "act_scales": [math.log2(s) for s in self.act_scales],
        }
