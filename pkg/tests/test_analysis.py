import csv
import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lmul_lab.analysis import (
    METRIC_COLUMNS, Domain, EnumPolicy, ExactSum, Specials, _approx, all_policies, histogram_csv, metrics_csv,
    operand_codes, policy_matrix, sweep,
)
from lmul_lab.formats import E1M6, E4M3, E6M1, FORMATS, ValuePolicy, numeric_table
from lmul_lab.lmul import Subnormals
from oracles import decode_fraction, lmul_fraction


def _oracle_metrics(fmt, extended):
    """EP/MAE/MRE/MSE/NED in exact rationals over unsigned normal pairs."""
    codes = []
    for r in range(128):
        v = decode_fraction(r, fmt.e, fmt.m, extended)
        if isinstance(v, Fraction) and (r >> fmt.m) != 0:
            codes.append(r)
    eds, res = [], []
    for x in codes:
        for y in codes:
            exact = decode_fraction(x, fmt.e, fmt.m, extended) * decode_fraction(y, fmt.e, fmt.m, extended)
            ed = abs(exact - lmul_fraction(x, y, fmt.e, fmt.m))
            eds.append(ed)
            res.append(ed / exact)
    n = len(eds)
    mae = sum(eds) / n
    return {
        "ep": Fraction(sum(1 for d in eds if d), n),
        "mae": mae,
        "mre": sum(res) / n,
        "mse": sum(d * d for d in eds) / n,
        "ned": mae / max(eds),
    }


@pytest.mark.parametrize("fmt", [E4M3, E1M6, E6M1], ids=str)
def test_metrics_match_rational_oracle(fmt):
    ext = fmt.e < 5
    want = _oracle_metrics(fmt, ext)
    got = sweep(fmt).metrics()
    for k, v in want.items():
        assert got[k] == pytest.approx(float(v), rel=1e-15, abs=0), k


def test_reference_policy():
    assert EnumPolicy.reference(E4M3).value_policy is ValuePolicy.EXTENDED
    assert EnumPolicy.reference(E6M1).value_policy is ValuePolicy.STRICT
    p = EnumPolicy.reference(E4M3)
    assert (p.domain, p.specials, p.subnormals) == (Domain.UNSIGNED, Specials.EXCLUDE, Subnormals.FLUSH_TO_ZERO)


def test_domain_sizes():
    pol = EnumPolicy(Domain.UNSIGNED, Specials.INCLUDE_RAW)
    assert sweep(E4M3, pol).n_cases == 16384
    assert sweep(E4M3, EnumPolicy(Domain.SIGNED, Specials.INCLUDE_RAW)).n_cases == 65536


@pytest.mark.parametrize("fmt", FORMATS, ids=str)
def test_identity_backend(fmt):
    for pol in all_policies():
        r = sweep(fmt, pol, backend="exact")
        assert (r.ep, r.mae, r.mre, r.mse, r.ned, r.max_ed) == (0, 0, 0, 0, 0, 0)
        if r.n_cases:
            assert histogram_csv(r).splitlines()[1:] == [f"0,{r.n_cases},1"]


def test_e6m1_every_pair_is_wrong():
    assert sweep(E6M1).ep == 1.0


def test_policy_matrix_size():
    reports = policy_matrix(E4M3)
    assert len(reports) == 16
    assert len({r.policy for r in reports}) == 16
    for r in reports:
        assert 0 <= r.ep <= 1 and 0 <= r.ned <= 1
        assert r.mse >= 0 and r.max_ed**2 >= r.mse


@pytest.mark.parametrize("fmt", FORMATS, ids=str)
def test_policies_agree_on_plain_pairs(fmt):
    """Pairs of normal operands (under every value policy) have the same
    error distance whichever policy enumerates them."""
    strict_normal = operand_codes(fmt, EnumPolicy(Domain.SIGNED, Specials.EXCLUDE))
    x, y = (a.ravel() for a in np.meshgrid(strict_normal, strict_normal, indexing="ij"))
    vals = numeric_table(fmt)
    eds = []
    for pol in all_policies():
        eds.append(np.abs(vals[x] * vals[y] - _approx("lmul", x, y, fmt, pol)))
    for e in eds[1:]:
        assert np.array_equal(e, eds[0])


@pytest.mark.parametrize("fmt", FORMATS, ids=str)
def test_chunked_threaded_sweep_is_bit_identical(fmt):
    for pol in (EnumPolicy.reference(fmt), EnumPolicy(Domain.SIGNED, Specials.INCLUDE_RAW, Subnormals.RAW_BITS)):
        a = sweep(fmt, pol)
        for n_jobs, n_chunks in ((4, 4), (3, 17), (1, 128)):
            b = sweep(fmt, pol, n_jobs=n_jobs, n_chunks=n_chunks)
            assert a.metrics() == b.metrics()
            assert a.histogram == b.histogram
            assert (a.max_ed, a.n_cases, a.n_mre_excluded) == (b.max_ed, b.n_cases, b.n_mre_excluded)


def test_swapping_operands_keeps_metrics():
    swapped = lambda x, y, fmt: _approx("lmul", y, x, fmt, EnumPolicy())  # noqa: E731
    for fmt in FORMATS:
        assert sweep(fmt, EnumPolicy(), swapped).metrics() == sweep(fmt, EnumPolicy()).metrics()


def test_mre_exclusion_counted():
    pol = EnumPolicy(Domain.UNSIGNED, Specials.INCLUDE_RAW)
    r = sweep(E4M3, pol)
    # exact product is zero when either operand is +0: 128 + 128 - 1 pairs
    assert r.n_mre_excluded == 255


def test_histogram_csv():
    r = sweep(E4M3)
    text = histogram_csv(r)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["error_magnitude", "count", "normalized_count"]
    body = rows[1:]
    assert len(body) == len(r.histogram) == len({m for m, _ in r.histogram})
    mags = [float(m) for m, _, _ in body]
    assert mags == sorted(mags)
    assert sum(int(c) for _, c, _ in body) == r.n_cases
    assert abs(sum(float(f) for _, _, f in body) - 1.0) <= 1e-12
    # second independent pass: distinct error magnitudes counted directly
    codes = operand_codes(E4M3, r.policy)
    x, y = (a.ravel() for a in np.meshgrid(codes, codes, indexing="ij"))
    vals = numeric_table(E4M3)
    ed = np.abs(vals[x] * vals[y] - _approx("lmul", x, y, E4M3, r.policy))
    assert len(body) == len(np.unique(ed))


def test_metrics_csv_full_precision():
    reports = [sweep(E4M3), sweep(E1M6)]
    rows = list(csv.DictReader(io.StringIO(metrics_csv(reports))))
    assert list(rows[0]) == METRIC_COLUMNS
    assert rows[0]["format"] == "E4M3" and rows[0]["value_policy"] == "extended"
    assert float(rows[0]["mre"]) == reports[0].mre


def test_unknown_backend():
    with pytest.raises(ValueError):
        sweep(E4M3, backend="nope")


@settings(max_examples=10_000, deadline=None)
@given(st.lists(st.floats(min_value=-1e30, max_value=1e30, allow_nan=False), max_size=40), st.randoms())
def test_exact_sum_order_independent(values, rnd):
    a = ExactSum().add_array(values)
    shuffled = list(values)
    rnd.shuffle(shuffled)
    half = len(shuffled) // 2
    b = ExactSum().add_array(shuffled[:half]).merge(ExactSum().add_array(shuffled[half:]))
    assert a == b
    assert a.fraction() == sum((Fraction(v) for v in values), Fraction(0))


def test_exact_sum_rejects_non_finite():
    with pytest.raises(ValueError):
        ExactSum().add_array([1.0, float("inf")])
