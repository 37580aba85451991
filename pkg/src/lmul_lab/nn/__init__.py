"""MLP inference with pluggable scalar-multiplier backends."""
from .backends import Fp8Exact, Fp32Exact, Lmul, MultiplierBackend, make_backend
from .idx import Dataset, IdxFormatError, load_idx, read_idx, write_idx
from .inference import DotErrorStats, InferenceReport, dot_error_stats, infer
from .model import DenseLayer, DenseMLP, TrainingDivergedError, load_model, save_model, train_reference
from .quant import QuantScheme, power_of_two_scale

__all__ = [
    "Fp8Exact", "Fp32Exact", "Lmul", "MultiplierBackend", "make_backend",
    "Dataset", "IdxFormatError", "load_idx", "read_idx", "write_idx",
    "DotErrorStats", "InferenceReport", "dot_error_stats", "infer",
    "DenseLayer", "DenseMLP", "TrainingDivergedError", "load_model", "save_model", "train_reference",
    "QuantScheme", "power_of_two_scale",
]
