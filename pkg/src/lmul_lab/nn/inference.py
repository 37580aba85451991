"""Accuracy and dot-product error measurements per multiplier backend."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..formats import FpFormat
from .backends import Fp32Exact, MultiplierBackend, make_backend
from .quant import QuantScheme

# samples per work unit; fixed so the thread count never changes a result
SAMPLE_BLOCK = 256


@dataclass
class InferenceReport:
    backend: str
    n_samples: int
    accuracy: float
    per_class_accuracy: dict
    layer_delta: list  # mean |output - fp32 output| per layer
    scheme: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "backend": self.backend,
            "n_samples": self.n_samples,
            "accuracy": self.accuracy,
            "per_class_accuracy": {str(k): v for k, v in self.per_class_accuracy.items()},
            "layer_delta": self.layer_delta,
            "scheme": self.scheme,
        }


def _blocked_forward(model, X, backend, scheme, n_jobs):
    blocks = [X[i:i + SAMPLE_BLOCK] for i in range(0, len(X), SAMPLE_BLOCK)]

    def run(b):
        return model.forward(b, backend, scheme)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    return [np.concatenate([p[i] for p in parts]) for i in range(len(model.layers_))]


def infer(model, dataset, backend: MultiplierBackend | None = None, scheme: QuantScheme | None = None,
          n_jobs: int = 1) -> InferenceReport:
    """Top-1 accuracy of ``model`` on ``dataset`` with every dense-layer
    product routed through ``backend``."""
    backend = backend or Fp32Exact()
    if backend.quantized and scheme is None:
        scheme = QuantScheme.for_model(model, backend.format, backend.value_policy)
    X, y = dataset.images, dataset.labels
    outs = _blocked_forward(model, X, backend, scheme, n_jobs)
    ref = outs if not backend.quantized and isinstance(backend, Fp32Exact) else \
        _blocked_forward(model, X, Fp32Exact(), None, n_jobs)

    pred = model.classes_[np.argmax(outs[-1], axis=1)]
    hit = pred == y
    per_class = {int(c): float(hit[y == c].mean()) for c in np.unique(y)}
    return InferenceReport(
        backend=backend.name,
        n_samples=len(y),
        accuracy=float(hit.mean()) if len(y) else 0.0,
        per_class_accuracy=per_class,
        layer_delta=[float(np.abs(o - r).mean()) for o, r in zip(outs, ref)],
        scheme=scheme.describe() if scheme else {"scheme": "none"},
    )


@dataclass
class DotErrorStats:
    backend: str
    length: int
    trials: int
    n_excluded: int  # trials with an all-zero exact product vector
    mean_rel_error: float
    max_rel_error: float


def dot_error_stats(backend, fmt: FpFormat | None = None, trials: int = 1000, length: int = 64,
                    seed: int = 0, distribution: str = "normal") -> DotErrorStats:
    """Relative error of backend dot products of random vectors.

    The reference is the exact dot product of the same (quantized) operands,
    and the error is normalized by ``sum |a_i * b_i|`` so cancellation in the
    sum cannot inflate it. For ``length == 1`` this is the scalar relative
    error of each sampled product.
    """
    if isinstance(backend, str):
        backend = make_backend(backend, fmt)
    rng = np.random.default_rng(seed)
    if distribution == "normal":
        a, b = rng.standard_normal((2, trials, length))
    elif distribution == "uniform":
        a, b = rng.uniform(-1.0, 1.0, (2, trials, length))
    else:
        raise ValueError(f"unknown distribution {distribution!r}")

    if backend.quantized:
        ca, cb = backend.encode(a), backend.encode(b)
        exact = backend.decode(ca) * backend.decode(cb)
        approx = backend.multiply_codes(ca, cb)
    else:
        exact = a.astype(np.float32).astype(np.float64) * b.astype(np.float32).astype(np.float64)
        approx = backend.multiply_array(a, b)

    denom = np.abs(exact).sum(axis=1)
    err = np.abs(approx.sum(axis=1) - exact.sum(axis=1))
    ok = denom > 0
    rel = err[ok] / denom[ok]
    return DotErrorStats(
        backend=backend.name,
        length=length,
        trials=trials,
        n_excluded=int((~ok).sum()),
        mean_rel_error=float(rel.mean()) if rel.size else 0.0,
        max_rel_error=float(rel.max()) if rel.size else 0.0,
    )
