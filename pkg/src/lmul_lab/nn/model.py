"""Dense MLP classifier trained in float32, evaluated through a pluggable
scalar-multiplier backend.

Checkpoints are ``.npz`` archives (see ``save_model``) with every array
stored at an explicit little-endian dtype.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .backends import Fp32Exact, MultiplierBackend
from .quant import QuantScheme

CHECKPOINT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged in epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss


@dataclass
class DenseLayer:
    weight: np.ndarray  # (fan_in, fan_out) float32
    bias: np.ndarray  # (fan_out,) float32
    activation: str = "relu"  # "relu" or "none"

    def __post_init__(self):
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ValueError(f"bad layer shapes {self.weight.shape} / {self.bias.shape}")
        if self.activation not in ("relu", "none"):
            raise ValueError(f"unknown activation {self.activation!r}")


def _activate(z, kind):
    return np.maximum(z, 0) if kind == "relu" else z


class DenseMLP(ClassifierMixin, BaseEstimator):
    """Fully connected ReLU network with a softmax output, trained by
    minibatch SGD with momentum.

    ``multiplier`` selects the backend used by ``predict``/``score``; FP8
    backends get a per-tensor power-of-two ``QuantScheme`` derived from the
    fitted weights and the activation ranges seen during training.
    """

    def __init__(self, hidden_layer_sizes=(32,), epochs=3, batch_size=32, learning_rate=0.05,
                 momentum=0.9, random_state=7, multiplier=None):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.random_state = random_state
        self.multiplier = multiplier

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float32)
        if not np.isfinite(X).all():
            raise ValueError("non-finite input")
        self.classes_ = unique_labels(y)
        t = np.searchsorted(self.classes_, y)
        sizes = [X.shape[1], *self.hidden_layer_sizes, len(self.classes_)]
        rng = np.random.default_rng(self.random_state)

        self.layers_ = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            w = (rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)).astype(np.float32)
            act = "relu" if i < len(sizes) - 2 else "none"
            self.layers_.append(DenseLayer(w, np.zeros(fan_out, np.float32), act))

        vel = [(np.zeros_like(L.weight), np.zeros_like(L.bias)) for L in self.layers_]
        lr, mu = np.float32(self.learning_rate), np.float32(self.momentum)
        self.loss_curve_ = []
        with np.errstate(over="ignore", invalid="ignore"):
            self._train(X, t, rng, vel, lr, mu)
        self.act_absmax_ = self._activation_ranges(X)
        self.n_features_in_ = X.shape[1]
        return self

    def _train(self, X, t, rng, vel, lr, mu):
        for epoch in range(1, self.epochs + 1):
            order = rng.permutation(len(X))
            total = 0.0
            for start in range(0, len(X), self.batch_size):
                idx = order[start:start + self.batch_size]
                loss, grads = self._backprop(X[idx], t[idx])
                total += loss * len(idx)
                for L, (vw, vb), (gw, gb) in zip(self.layers_, vel, grads):
                    vw *= mu
                    vw -= lr * gw
                    vb *= mu
                    vb -= lr * gb
                    L.weight += vw
                    L.bias += vb
            mean = total / len(X)
            if not np.isfinite(mean) or not all(np.isfinite(L.weight).all() for L in self.layers_):
                raise TrainingDivergedError(epoch, mean)
            self.loss_curve_.append(mean)

    def _backprop(self, x, t):
        acts = [x]
        for L in self.layers_:
            acts.append(_activate(acts[-1] @ L.weight + L.bias, L.activation))
        logits = acts[-1]
        z = logits - logits.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        n = len(t)
        loss = float(-np.log(np.maximum(p[np.arange(n), t], 1e-30)).mean())
        delta = p
        delta[np.arange(n), t] -= 1
        delta /= n
        grads = []
        for i in range(len(self.layers_) - 1, -1, -1):
            L = self.layers_[i]
            grads.append((acts[i].T @ delta, delta.sum(axis=0)))
            if i:
                delta = (delta @ L.weight.T) * (acts[i] > 0)
        return loss, grads[::-1]

    def _activation_ranges(self, X) -> np.ndarray:
        """Max |input| of every layer over ``X``, used for activation scales."""
        out = []
        a = X
        for L in self.layers_:
            out.append(float(np.abs(a).max()) if a.size else 0.0)
            a = _activate(a @ L.weight + L.bias, L.activation)
        return np.array(out)

    @property
    def layer_sizes_(self):
        return [self.layers_[0].weight.shape[0]] + [L.weight.shape[1] for L in self.layers_]

    def backend(self) -> MultiplierBackend:
        return self.multiplier if self.multiplier is not None else Fp32Exact()

    def forward(self, X, backend: MultiplierBackend | None = None, scheme: QuantScheme | None = None):
        """Output of every layer (post-activation) as float64 arrays."""
        check_is_fitted(self, "layers_")
        X = check_array(X, dtype=np.float32)
        backend = backend or self.backend()
        if backend.quantized and scheme is None:
            scheme = QuantScheme.for_model(self, backend.format, backend.value_policy)
        outs = []
        a = X.astype(np.float64)
        for i, L in enumerate(self.layers_):
            if backend.quantized:
                sa, sw = scheme.act_scales[i], scheme.weight_scales[i]
                z = backend.matmul(a * sa, L.weight.astype(np.float64) * sw) / (sa * sw)
            else:
                z = backend.matmul(a, L.weight)
            a = _activate(z + L.bias, L.activation)
            outs.append(a)
        return outs

    def decision_function(self, X):
        return self.forward(X)[-1]

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]


def train_reference(model_spec, dataset, epochs: int = 3, seed: int = 7, **hyper) -> DenseMLP:
    """Train an MLP whose layer widths are ``model_spec`` (input first,
    classes last) on ``dataset`` in float32."""
    sizes = tuple(int(s) for s in model_spec)
    if len(sizes) < 2:
        raise ValueError("model_spec needs at least input and output sizes")
    if len(dataset) == 0:
        raise ValueError("empty training set")
    if sizes[0] != dataset.n_features:
        raise ValueError(f"model input {sizes[0]} != data dimension {dataset.n_features}")
    n_classes = len(np.unique(dataset.labels))
    if sizes[-1] != n_classes:
        raise ValueError(f"model output {sizes[-1]} != {n_classes} classes in data")
    model = DenseMLP(hidden_layer_sizes=sizes[1:-1], epochs=epochs, random_state=seed, **hyper)
    return model.fit(dataset.images, dataset.labels)


def save_model(model: DenseMLP, path) -> None:
    """Write a checkpoint.

    Archive members: ``format_version`` (<i4), ``meta`` (UTF-8 JSON bytes with
    hyperparameters and layer sizes), ``classes`` (<i8), ``act_absmax`` (<f8),
    and per layer ``W{i}`` (<f4, fan_in x fan_out) and ``b{i}`` (<f4).
    """
    check_is_fitted(model, "layers_")
    params = model.get_params()
    params.pop("multiplier")
    params["hidden_layer_sizes"] = list(params["hidden_layer_sizes"])
    meta = {
        "params": params,
        "layer_sizes": model.layer_sizes_,
        "activations": [L.activation for L in model.layers_],
        "loss_curve": model.loss_curve_,
    }
    arrays = {
        "format_version": np.array(CHECKPOINT_VERSION, dtype="<i4"),
        "meta": np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
        "classes": np.asarray(model.classes_, dtype="<i8"),
        "act_absmax": np.asarray(model.act_absmax_, dtype="<f8"),
    }
    for i, L in enumerate(model.layers_):
        arrays[f"W{i}"] = L.weight.astype("<f4")
        arrays[f"b{i}"] = L.bias.astype("<f4")
    with open(Path(path), "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path) -> DenseMLP:
    with np.load(Path(path), allow_pickle=False) as z:
        version = int(z["format_version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        meta = json.loads(z["meta"].tobytes().decode())
        params = meta["params"]
        params["hidden_layer_sizes"] = tuple(params["hidden_layer_sizes"])
        model = DenseMLP(**params)
        n = len(meta["layer_sizes"]) - 1
        model.layers_ = [
            DenseLayer(z[f"W{i}"].astype(np.float32), z[f"b{i}"].astype(np.float32), meta["activations"][i])
            for i in range(n)
        ]
        model.classes_ = z["classes"].astype(np.int64)
        model.act_absmax_ = z["act_absmax"].astype(np.float64)
    model.loss_curve_ = meta["loss_curve"]
    model.n_features_in_ = meta["layer_sizes"][0]
    return model
