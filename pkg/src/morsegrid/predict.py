"""Lifespan extrapolation across dated persistence diagrams.

Diagrams of the same scene taken at successive dates (one date index per
fixed interval) are aligned by position only: after sampling ``key_length``
records from each date, the i-th draw of every date forms series i. Each
series is fitted by a least-squares polynomial in the date index and
evaluated one interval ahead.

Sampling uses numpy's PCG64 bit generator seeded with the user seed; the
indices for a date are the first ``key_length`` entries of
``Generator(PCG64(seed)).permutation(count)``, drawing dates in ascending
order from a single stream.
"""

from __future__ import annotations

import logging
import math
import statistics
from dataclasses import dataclass
from fractions import Fraction
from math import lcm

import numpy as np

from morsegrid.errors import DegreeTooHigh, InsufficientData, ParseError, ShapeError
from morsegrid.export import parse_csv

log = logging.getLogger(__name__)

SUCCESS_THRESHOLD = 5.0  # percent


@dataclass(frozen=True)
class DatedDiagramSet:
    entries: tuple[tuple[int, tuple[tuple[int, int], ...]], ...]  # (date_index, finite records)
    key_length: int
    dropped: tuple[tuple[int, str], ...] = ()

    @property
    def dates(self) -> list[int]:
        return [d for d, _ in self.entries]


@dataclass(frozen=True, eq=False)
class LifespanSeries:
    dates: np.ndarray  # (n_dates,)
    values: np.ndarray  # (key_length, n_dates) lifespans
    seed: int
    drawn: tuple[np.ndarray, ...] = ()  # record indices drawn per date

    def select(self, columns) -> "LifespanSeries":
        columns = list(columns)
        return LifespanSeries(self.dates[columns], self.values[:, columns], self.seed, tuple(self.drawn[c] for c in columns) if self.drawn else ())


@dataclass(frozen=True, eq=False)
class FitModel:
    coefficients: np.ndarray  # (key_length, degree + 1), constant term first
    residuals: np.ndarray  # (key_length,) sum of squared residuals
    exact: np.ndarray | None = None  # rational coefficients times ``denominator``
    denominator: int = 1

    @property
    def degree(self) -> int:
        return self.coefficients.shape[1] - 1


@dataclass(frozen=True, eq=False)
class Prediction:
    values: np.ndarray
    raw: np.ndarray
    clamped: int


@dataclass(frozen=True)
class ErrorReport:
    percent: tuple  # per index: float or None when undefined
    flags: tuple[str, ...]
    aggregate: float
    under_threshold: float


def assemble(csv_files, outlier_ratio=Fraction(1, 2)) -> DatedDiagramSet:
    """Parse dated CSV exports, drop undersized outliers, fix the key length.

    ``csv_files`` holds ``(date_index, data)`` or ``(date_index, data, name)``.
    A file is dropped when its finite record count is below
    ``outlier_ratio`` times the median count.
    """
    csv_files = list(csv_files)
    if len(csv_files) < 3:
        raise InsufficientData(f"need at least 3 dated diagrams, got {len(csv_files)}")
    parsed = []
    for item in csv_files:
        date, data = item[0], item[1]
        name = item[2] if len(item) > 2 else f"date {date}"
        try:
            records = parse_csv(data)
        except ParseError as exc:
            raise ParseError(exc.offset, f"{name}: {exc.reason}") from None
        finite = tuple((b, int(d)) for b, d in records if not math.isinf(d))
        parsed.append((int(date), finite))
    parsed.sort()
    dates = [d for d, _ in parsed]
    if len(set(dates)) != len(dates):
        raise ValueError(f"duplicate date indices in {dates}")
    median = Fraction(statistics.median(len(r) for _, r in parsed))
    threshold = Fraction(outlier_ratio) * median
    kept, dropped = [], []
    for date, records in parsed:
        if len(records) < threshold:
            dropped.append((date, f"{len(records)} records < {float(threshold):g} ({outlier_ratio} of median {float(median):g})"))
        else:
            kept.append((date, records))
    if len(kept) < 3:
        raise InsufficientData(f"only {len(kept)} dates left after dropping outliers {[d for d, _ in dropped]}")
    key_length = min(len(r) for _, r in kept)
    if key_length == 0:
        raise InsufficientData("retained diagrams have no finite records")
    return DatedDiagramSet(tuple(kept), key_length, tuple(dropped))


def sample_lifespans(S: DatedDiagramSet, seed: int = 0) -> LifespanSeries:
    rng = np.random.Generator(np.random.PCG64(seed))
    cols, drawn = [], []
    for _, records in S.entries:
        idx = rng.permutation(len(records))[: S.key_length]
        arr = np.asarray(records, dtype=np.int64)
        cols.append(arr[idx, 1] - arr[idx, 0])
        drawn.append(idx)
    values = np.stack(cols, axis=1).astype(np.float64)
    return LifespanSeries(np.asarray(S.dates, dtype=np.float64), values, seed, tuple(drawn))


def _projector(xs, degree: int):
    """Exact least-squares map from y values to coefficients.

    Returns ``(num, den)`` with integer ``num`` of shape (degree + 1, n) such
    that the coefficients are ``num @ y / den``. Every index shares the same
    date grid, so this is computed once in rationals.
    """
    xs = [Fraction(x) for x in xs]
    k = degree + 1
    V = [[x ** j for j in range(k)] for x in xs]
    # augmented [V^T V | V^T], Gauss-Jordan to [I | (V^T V)^-1 V^T]
    rows = [[sum(V[i][a] * V[i][b] for i in range(len(xs))) for b in range(k)] + [V[i][a] for i in range(len(xs))]
            for a in range(k)]
    for c in range(k):
        piv = next(r for r in range(c, k) if rows[r][c] != 0)
        rows[c], rows[piv] = rows[piv], rows[c]
        inv = 1 / rows[c][c]
        rows[c] = [v * inv for v in rows[c]]
        for r in range(k):
            if r != c and rows[r][c] != 0:
                f = rows[r][c]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[c])]
    P = [row[k:] for row in rows]
    den = lcm(*(v.denominator for row in P for v in row))
    num = np.array([[int(v * den) for v in row] for row in P], dtype=object)
    return num, den


def _exact(values: np.ndarray) -> np.ndarray:
    if np.all(np.isfinite(values)) and np.array_equal(values, np.round(values)):
        return values.astype(np.int64).astype(object)
    return np.vectorize(Fraction, otypes=[object])(values)


def fit(series: LifespanSeries, degree: int = 1) -> FitModel:
    """Least-squares polynomial per index, solved exactly in rationals."""
    n = series.dates.size
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    if n < degree + 1:
        raise DegreeTooHigh(f"degree {degree} needs at least {degree + 1} dates, got {n}")
    if np.unique(series.dates).size < degree + 1:
        raise DegreeTooHigh(f"degree {degree} needs {degree + 1} distinct dates")
    num, den = _projector(series.dates.tolist(), degree)
    exact = _exact(series.values) @ num.T  # (key_length, degree + 1), scaled by den
    coef = np.array([[float(Fraction(v) / den) for v in row] for row in exact]).reshape(exact.shape)
    vander = np.vander(series.dates, degree + 1, increasing=True)
    resid = ((coef @ vander.T - series.values) ** 2).sum(axis=1)
    return FitModel(coef, resid, exact, den)


def predict_next(model: FitModel, x_next) -> Prediction:
    powers = [Fraction(x_next) ** j for j in range(model.degree + 1)]
    if model.exact is not None:
        raw = np.array([float(sum(c * p for c, p in zip(row, powers)) / model.denominator) for row in model.exact])
    else:
        raw = model.coefficients @ np.array([float(p) for p in powers])
    raw = raw.reshape(model.coefficients.shape[0])
    neg = raw < 0
    if neg.any():
        log.warning("clamped %d negative lifespan predictions to 0", int(neg.sum()))
    return Prediction(np.where(neg, 0.0, raw), raw, int(neg.sum()))


def percent_error(predicted, actual, threshold: float = SUCCESS_THRESHOLD) -> ErrorReport:
    """``|p - a| / a * 100`` per index.

    An actual value of 0 gives 0 % when the prediction is 0 as well and is
    flagged ``undefined`` (excluded from the mean) otherwise. The success
    fraction counts indices under ``threshold`` out of all indices.
    """
    p = np.asarray(predicted, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape:
        raise ShapeError(f"predicted has shape {p.shape}, actual {a.shape}")
    per, flags = [], []
    for pi, ai in zip(p.tolist(), a.tolist()):
        if ai != 0:
            per.append(abs(pi - ai) / abs(ai) * 100.0)
            flags.append("ok")
        elif pi == 0:
            per.append(0.0)
            flags.append("ok")
        else:
            per.append(None)
            flags.append("undefined")
    defined = [v for v in per if v is not None]
    aggregate = float(np.mean(defined)) if defined else math.nan
    under = sum(1 for v in defined if v < threshold) / len(per) if per else math.nan
    return ErrorReport(tuple(per), tuple(flags), aggregate, under)


def _num(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if math.isfinite(v) and v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return format(v, ".10g")


def format_report(pred: Prediction, actual, report: ErrorReport, dropped=()) -> str:
    """Report CSV plus a trailing ``# aggregate=...`` summary line."""
    lines = ["index,predicted,actual,percent_error,flag"]
    for i, (p, a, e, f) in enumerate(zip(pred.values, actual, report.percent, report.flags), 1):
        lines.append(f"{i},{_num(p)},{_num(a)},{_num(e)},{f}")
    lines.append("# " + summary_line(pred, report, dropped))
    return "\n".join(lines) + "\n"


def summary_line(pred: Prediction, report: ErrorReport, dropped=()) -> str:
    dropped_dates = "[" + ",".join(str(d) for d, *_ in dropped) + "]"
    return (
        f"aggregate={_num(report.aggregate)} under5pct={_num(report.under_threshold)} "
        f"clamped={pred.clamped} dropped_dates={dropped_dates}"
    )


def run_prediction(csv_files, seed: int = 0, degree: int = 1, outlier_ratio=Fraction(1, 2)):
    """Fit on every retained date but the last, predict the last, score it.

    Returns ``(dataset, prediction, actual, report)``.
    """
    S = assemble(csv_files, outlier_ratio)
    series = sample_lifespans(S, seed)
    n = series.dates.size
    train = series.select(range(n - 1))
    model = fit(train, degree)
    x_next = series.dates[-1]
    pred = predict_next(model, x_next)
    actual = series.values[:, -1]
    return S, pred, actual, percent_error(pred.values, actual)
