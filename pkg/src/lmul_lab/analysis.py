"""Exhaustive error characterization of an FP8 multiplier against the exact product.

For every operand pair in an enumeration domain the error distance
``ED = |exact - approx|`` is computed, then:

    EP  = fraction of pairs with ED != 0
    MAE = mean(ED)
    MRE = mean(ED / |exact|) over pairs with exact != 0
    MSE = mean(ED**2)
    NED = mean(ED) / max(ED)

Sums are accumulated exactly (see ``ExactSum``), so a sweep split over any
number of worker threads produces bit-identical aggregates.
"""
from __future__ import annotations

import csv
import enum
import io
import itertools
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .formats import FpClass, FpFormat, ValuePolicy, class_table, numeric_table, ocp_policy
from .lmul import Readout, Subnormals, l_mul_values


class Domain(enum.Enum):
    UNSIGNED = "unsigned"
    SIGNED = "signed"


class Specials(enum.Enum):
    # drop every pair with an operand that is not a normal number
    # (zero, subnormal, Inf or NaN under the value policy)
    EXCLUDE = "exclude"
    # keep all patterns; Inf/NaN patterns enter both sides with their raw-bit value
    INCLUDE_RAW = "include-raw"


@dataclass(frozen=True)
class EnumPolicy:
    domain: Domain = Domain.UNSIGNED
    specials: Specials = Specials.EXCLUDE
    subnormals: Subnormals = Subnormals.FLUSH_TO_ZERO
    value_policy: ValuePolicy = ValuePolicy.STRICT

    @classmethod
    def reference(cls, fmt: FpFormat) -> "EnumPolicy":
        """Defaults used to tabulate the published error metrics: unsigned
        normal operands, OCP special-value convention for the format."""
        return cls(value_policy=ocp_policy(fmt))

    def describe(self) -> dict:
        return {
            "domain": self.domain.value,
            "specials": self.specials.value,
            "subnormals": self.subnormals.value,
            "value_policy": self.value_policy.value,
        }


def all_policies() -> list[EnumPolicy]:
    return [EnumPolicy(*combo) for combo in itertools.product(Domain, Specials, Subnormals, ValuePolicy)]


class ExactSum:
    """Order-independent exact sum of float64 values (each is a dyadic
    rational, so the running total is an integer times a power of two)."""

    __slots__ = ("mant", "exp")

    def __init__(self, mant: int = 0, exp: int = 0):
        self.mant, self.exp = mant, exp

    def add_array(self, values) -> "ExactSum":
        v = np.asarray(values, dtype=np.float64).ravel()
        v = v[v != 0]
        if v.size == 0:
            return self
        if not np.isfinite(v).all():
            raise ValueError("non-finite value in exact sum")
        frac, ex = np.frexp(v)
        mant = (frac * 2.0**53).astype(np.int64)
        ex = ex.astype(np.int64) - 53
        # split mantissas so per-exponent float64 bincounts stay exact
        hi, lo = mant >> 26, mant & ((1 << 26) - 1)
        uniq, inv = np.unique(ex, return_inverse=True)
        s_hi = np.bincount(inv, weights=hi.astype(np.float64))
        s_lo = np.bincount(inv, weights=lo.astype(np.float64))
        base = int(uniq[0])
        total = 0
        for u, h, l in zip(uniq.tolist(), s_hi.tolist(), s_lo.tolist()):
            total += ((int(h) << 26) + int(l)) << (u - base)
        return self.merge(ExactSum(total, base))

    def merge(self, other: "ExactSum") -> "ExactSum":
        if other.mant == 0:
            return ExactSum(self.mant, self.exp)
        if self.mant == 0:
            return ExactSum(other.mant, other.exp)
        base = min(self.exp, other.exp)
        return ExactSum((self.mant << (self.exp - base)) + (other.mant << (other.exp - base)), base)

    def fraction(self) -> Fraction:
        return Fraction(self.mant) * Fraction(2) ** self.exp

    def __eq__(self, other):
        return isinstance(other, ExactSum) and self.fraction() == other.fraction()

    def __repr__(self):
        return f"ExactSum({float(self.fraction())!r})"


@dataclass
class _Partial:
    n: int = 0
    n_err: int = 0
    n_exact_zero: int = 0
    s_ed: ExactSum = field(default_factory=ExactSum)
    s_re: ExactSum = field(default_factory=ExactSum)
    s_ed2: ExactSum = field(default_factory=ExactSum)
    max_ed: float = 0.0
    hist: Counter = field(default_factory=Counter)

    def merge(self, o: "_Partial") -> "_Partial":
        return _Partial(
            self.n + o.n,
            self.n_err + o.n_err,
            self.n_exact_zero + o.n_exact_zero,
            self.s_ed.merge(o.s_ed),
            self.s_re.merge(o.s_re),
            self.s_ed2.merge(o.s_ed2),
            max(self.max_ed, o.max_ed),
            self.hist + o.hist,
        )


@dataclass
class ErrorReport:
    format: FpFormat
    policy: EnumPolicy
    backend: str
    n_cases: int
    n_mre_excluded: int
    ep: float
    mae: float
    mre: float
    mse: float
    ned: float
    max_ed: float
    histogram: list[tuple[float, int]]

    def metrics(self) -> dict:
        return {"ep": self.ep, "mae": self.mae, "mre": self.mre, "mse": self.mse, "ned": self.ned}


BACKENDS = ("lmul", "lmul-fields", "exact")


def operand_codes(fmt: FpFormat, policy: EnumPolicy) -> np.ndarray:
    codes = np.arange(256 if policy.domain is Domain.SIGNED else 128)
    if policy.specials is Specials.EXCLUDE:
        classes = class_table(fmt, policy.value_policy)
        codes = codes[[classes[c] is FpClass.NORMAL for c in codes]]
    return codes


def _approx(backend, x, y, fmt: FpFormat, policy: EnumPolicy) -> np.ndarray:
    if callable(backend):
        return np.asarray(backend(x, y, fmt), dtype=np.float64)
    if backend == "lmul":
        return l_mul_values(x, y, fmt, Readout.SUM, policy.subnormals)
    if backend == "lmul-fields":
        return l_mul_values(x, y, fmt, Readout.FIELDS, policy.subnormals)
    if backend == "exact":
        vals = numeric_table(fmt)
        return vals[x] * vals[y]
    raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")


def _chunk(fmt, policy, backend, xs, ys) -> _Partial:
    x, y = np.meshgrid(xs, ys, indexing="ij")
    x, y = x.ravel(), y.ravel()
    vals = numeric_table(fmt)
    exact = vals[x] * vals[y]
    ed = np.abs(exact - _approx(backend, x, y, fmt, policy))
    nz = exact != 0
    uniq, counts = np.unique(ed, return_counts=True)
    return _Partial(
        n=ed.size,
        n_err=int(np.count_nonzero(ed)),
        n_exact_zero=int(ed.size - np.count_nonzero(nz)),
        s_ed=ExactSum().add_array(ed),
        s_re=ExactSum().add_array(ed[nz] / np.abs(exact[nz])),
        s_ed2=ExactSum().add_array(ed * ed),
        max_ed=float(ed.max()) if ed.size else 0.0,
        hist=Counter(dict(zip(uniq.tolist(), counts.tolist()))),
    )


def sweep(
    fmt: FpFormat,
    policy: EnumPolicy | None = None,
    backend="lmul",
    n_jobs: int = 1,
    n_chunks: int | None = None,
) -> ErrorReport:
    """Enumerate every operand pair of the policy's domain and aggregate the
    error metrics. ``n_jobs`` and ``n_chunks`` change wall time only."""
    policy = policy or EnumPolicy.reference(fmt)
    codes = operand_codes(fmt, policy)
    n_chunks = n_chunks or max(1, n_jobs)
    pieces = [p for p in np.array_split(codes, n_chunks) if p.size]
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            parts = list(pool.map(lambda xs: _chunk(fmt, policy, backend, xs, codes), pieces))
    else:
        parts = [_chunk(fmt, policy, backend, xs, codes) for xs in pieces]
    total = _Partial()
    for p in parts:
        total = total.merge(p)

    n = total.n
    n_mre = n - total.n_exact_zero
    mae = total.s_ed.fraction() / n if n else Fraction(0)
    return ErrorReport(
        format=fmt,
        policy=policy,
        backend=backend if isinstance(backend, str) else getattr(backend, "__name__", "custom"),
        n_cases=n,
        n_mre_excluded=total.n_exact_zero,
        ep=total.n_err / n if n else 0.0,
        mae=float(mae),
        mre=float(total.s_re.fraction() / n_mre) if n_mre else 0.0,
        mse=float(total.s_ed2.fraction() / n) if n else 0.0,
        ned=float(mae / Fraction(total.max_ed)) if total.max_ed else 0.0,
        max_ed=total.max_ed,
        histogram=sorted(total.hist.items()),
    )


def policy_matrix(fmt: FpFormat, backend="lmul", n_jobs: int = 1) -> list[ErrorReport]:
    return [sweep(fmt, p, backend, n_jobs) for p in all_policies()]


def histogram_csv(report: ErrorReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["error_magnitude", "count", "normalized_count"])
    for mag, count in report.histogram:
        w.writerow([f"{mag:.17g}", count, f"{count / report.n_cases:.17g}"])
    return buf.getvalue()


METRIC_COLUMNS = [
    "format", "backend", "domain", "specials", "subnormals", "value_policy",
    "n_cases", "n_mre_excluded", "ep", "mae", "mre", "mse", "ned", "max_ed",
]


def metrics_csv(reports: list[ErrorReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for r in reports:
        p = r.policy.describe()
        w.writerow([
            r.format.name, r.backend, p["domain"], p["specials"], p["subnormals"], p["value_policy"],
            r.n_cases, r.n_mre_excluded,
            *(f"{v:.17g}" for v in (r.ep, r.mae, r.mre, r.mse, r.ned, r.max_ed)),
        ])
    return buf.getvalue()
