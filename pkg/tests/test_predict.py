import logging
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morsegrid.errors import DegreeTooHigh, InsufficientData, ParseError, ShapeError
from morsegrid.predict import (
    FitModel,
    LifespanSeries,
    assemble,
    fit,
    format_report,
    percent_error,
    predict_next,
    run_prediction,
    sample_lifespans,
)


def csv_bytes(records) -> bytes:
    lines = ["index,birth,death"] + [f"{i},{b},{d}" for i, (b, d) in enumerate(records, 1)]
    return ("\n".join(lines) + "\n").encode()


def n_records(n, life=5, birth0=0):
    return csv_bytes([(birth0 + i % 200, birth0 + i % 200 + life) for i in range(n)])


def series(ys, xs=None) -> LifespanSeries:
    ys = np.atleast_2d(np.asarray(ys, dtype=np.float64))
    xs = np.arange(1, ys.shape[1] + 1) if xs is None else xs
    return LifespanSeries(np.asarray(xs, dtype=np.float64), ys, 0)


# -- assemble ---------------------------------------------------------------------


def test_assemble_drops_outlier():
    S = assemble([(d, n_records(c)) for d, c in zip((1, 2, 3, 4), (100, 98, 102, 10))])
    assert S.dates == [1, 2, 3]
    assert S.key_length == 98
    assert [d for d, _ in S.dropped] == [4]
    assert "49.5" in S.dropped[0][1]


def test_assemble_equal_counts():
    S = assemble([(d, n_records(50)) for d in (1, 2, 3)])
    assert S.key_length == 50 and S.dropped == ()


def test_assemble_too_few_after_drop():
    # median 50.5, threshold 25.25: both small files go, two dates remain
    with pytest.raises(InsufficientData):
        assemble([(1, n_records(100)), (2, n_records(98)), (3, n_records(3)), (4, n_records(2))])


def test_assemble_small_majority_sets_the_median():
    # median 3, threshold 1.5: the rule keeps all three files
    S = assemble([(1, n_records(100)), (2, n_records(3)), (3, n_records(2))])
    assert S.dropped == () and S.key_length == 2


def test_assemble_too_few_files():
    with pytest.raises(InsufficientData):
        assemble([(1, n_records(5)), (2, n_records(5))])


def test_assemble_threshold_is_exact():
    # median 10, ratio 1/2: a count of exactly 5 stays
    S = assemble([(1, n_records(10)), (2, n_records(5)), (3, n_records(10)), (4, n_records(12))])
    assert S.dropped == () and S.key_length == 5


def test_assemble_ignores_essential_rows_and_sorts_dates():
    data = b"index,birth,death\n1,0,inf\n2,3,9\n"
    S = assemble([(3, data), (1, data), (2, data)])
    assert S.dates == [1, 2, 3]
    assert S.entries[0][1] == ((3, 9),)


def test_assemble_parse_error_names_file():
    with pytest.raises(ParseError) as info:
        assemble([(1, n_records(4)), (2, b"index,birth,death\n1,a,b\n", "bad.csv"), (3, n_records(4))])
    assert "bad.csv" in info.value.reason


# -- sampling -----------------------------------------------------------------------


def varied(n, x):
    return csv_bytes([(i, i + 3 * i + x) for i in range(n)])


def test_sampling_is_deterministic_and_distinct():
    S = assemble([(x, varied(20 + x, x)) for x in range(1, 6)])
    a, b = sample_lifespans(S, seed=9), sample_lifespans(S, seed=9)
    assert np.array_equal(a.values, b.values)
    for idx in a.drawn:
        assert len(set(idx.tolist())) == idx.size == S.key_length
    assert not np.array_equal(a.values, sample_lifespans(S, seed=10).values)


def test_sampling_full_count_is_permutation():
    S = assemble([(x, varied(12, x)) for x in range(1, 5)])
    T = sample_lifespans(S, seed=3)
    for col, (_, records) in enumerate(S.entries):
        assert sorted(T.values[:, col]) == sorted(d - b for b, d in records)


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_constant_lifespans_any_seed(seed):
    S = assemble([(x, n_records(10 + x, life=7)) for x in range(1, 5)])
    assert (sample_lifespans(S, seed).values == 7).all()


def test_sampling_uses_named_generator():
    S = assemble([(x, varied(10, x)) for x in (1, 2, 3)])
    T = sample_lifespans(S, seed=123)
    rng = np.random.Generator(np.random.PCG64(123))
    for drawn in T.drawn:
        assert np.array_equal(drawn, rng.permutation(10)[:10])


# -- fit / predict --------------------------------------------------------------------


def test_fit_examples():
    m = fit(series([2, 4, 6, 8, 10, 12]))
    assert np.allclose(m.coefficients, [[0, 2]], atol=1e-12) and m.residuals[0] < 1e-20
    m = fit(series([7] * 6))
    assert np.allclose(m.coefficients, [[7, 0]], atol=1e-12)
    m = fit(series([1, 4, 9, 16, 25, 36]), degree=2)
    assert np.allclose(m.coefficients, [[0, 0, 1]], atol=1e-9) and m.residuals[0] < 1e-18
    assert m.degree == 2


def test_fit_interpolates_when_square():
    m = fit(series([3, 1, 4]), degree=2)
    assert np.allclose(m.coefficients @ np.vander([1.0, 2.0, 3.0], 3, increasing=True).T, [3, 1, 4])


def test_fit_underdetermined():
    with pytest.raises(DegreeTooHigh):
        fit(series([1, 2]), degree=2)


def test_predict_examples(caplog):
    assert predict_next(FitModel(np.array([[0.0, 2.0]]), np.zeros(1)), 7).values[0] == 14
    assert predict_next(FitModel(np.array([[7.0, 0.0]]), np.zeros(1)), 7).values[0] == 7
    with caplog.at_level(logging.WARNING):
        p = predict_next(FitModel(np.array([[10.0, -2.0], [1.0, 1.0]]), np.zeros(2)), 7)
    assert p.raw[0] == -4 and p.values[0] == 0 and p.clamped == 1 and p.values[1] == 8
    assert "clamped 1" in caplog.text


@settings(max_examples=50)
@given(
    st.lists(st.tuples(st.integers(-50, 50), st.integers(0, 40), st.integers(-3, 3)), min_size=1, max_size=8),
    st.integers(1, 2),
)
def test_fitting_exactness(coefs, degree):
    xs = np.arange(1, 7, dtype=np.float64)
    c = np.array([cs[: degree + 1] for cs in coefs], dtype=np.float64)
    ys = c @ np.vander(xs, degree + 1, increasing=True).T
    truth = c @ (7.0 ** np.arange(degree + 1))
    raw = predict_next(fit(series(ys, xs), degree), 7).raw
    assert np.allclose(raw, truth, rtol=1e-9, atol=1e-9)


@settings(max_examples=50)
@given(st.lists(st.lists(st.integers(0, 200), min_size=5, max_size=5), min_size=1, max_size=6), st.integers(-30, 30))
def test_shift_equivariance(ys, c):
    ys = np.asarray(ys, dtype=np.float64)
    a = predict_next(fit(series(ys)), 6).raw
    b = predict_next(fit(series(ys + c)), 6).raw
    assert np.allclose(b, a + c, rtol=1e-9, atol=1e-9)


# -- percent error -----------------------------------------------------------------------


def test_percent_error_examples():
    r = percent_error([10], [8])
    assert r.percent == (25.0,) and r.aggregate == 25.0 and r.under_threshold == 0.0
    r = percent_error([1, 2, 0], [1, 2, 0])
    assert r.aggregate == 0 and r.under_threshold == 1.0 and r.flags == ("ok",) * 3
    r = percent_error([3, 10], [0, 10])
    assert r.flags == ("undefined", "ok") and r.percent[0] is None and r.aggregate == 0
    assert r.under_threshold == 0.5


def test_percent_error_shape():
    with pytest.raises(ShapeError):
        percent_error([1, 2], [1])


def test_percent_error_all_undefined():
    r = percent_error([1], [0])
    assert math.isnan(r.aggregate) and r.under_threshold == 0


# -- end to end ------------------------------------------------------------------------------


def linear_files(n_dates=7, n=30, slope=2, intercept=3):
    return [(x, csv_bytes([(i, i + intercept + slope * x) for i in range(n + x)])) for x in range(1, n_dates + 1)]


def test_run_prediction_linear():
    S, pred, actual, report = run_prediction(linear_files())
    assert S.key_length == 31
    assert np.allclose(pred.values, 17, rtol=1e-9) and (actual == 17).all()
    assert report.aggregate < 1e-9 and report.under_threshold == 1


def test_report_is_byte_identical():
    a = format_report(*run_prediction(linear_files(), seed=5)[1:], ())
    b = format_report(*run_prediction(linear_files(), seed=5)[1:], ())
    assert a == b
    lines = a.splitlines()
    assert lines[0] == "index,predicted,actual,percent_error,flag"
    assert lines[1] == "1,17,17,0,ok"
    assert lines[-1] == "# aggregate=0 under5pct=1 clamped=0 dropped_dates=[]"


def test_report_lists_dropped_dates():
    files = linear_files(6) + [(7, csv_bytes([(0, 1)]))]
    S, pred, actual, report = run_prediction(files, outlier_ratio=Fraction(1, 2))
    assert [d for d, _ in S.dropped] == [7]
    assert format_report(pred, actual, report, S.dropped).endswith("dropped_dates=[7]\n")
