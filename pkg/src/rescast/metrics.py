"""Forecast error metrics, descriptive statistics and Welch's t-test."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .errors import DataError, DegenerateTestError, EmptySeriesError, InsufficientDataError

REPORT_FIELDS = ("mae", "mse", "rmse", "mape_percent", "nrmse_mean", "n",
                 "runtime_seconds", "model_name", "scale")


@dataclass
class EvaluationReport:
    mae: float
    mse: float
    rmse: float
    mape_percent: float | None
    nrmse_mean: float | None
    n: int
    runtime_seconds: float | None = None
    model_name: str = ""
    scale: str = "raw"
    mape_skipped: int = 0

    def to_dict(self):
        return {name: getattr(self, name) for name in REPORT_FIELDS}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=False)

    def to_csv_row(self, header=True):
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        if header:
            writer.writerow(REPORT_FIELDS)
        writer.writerow(["" if v is None else v for v in self.to_dict().values()])
        return out.getvalue()


def evaluate(actuals, predictions, mape_epsilon=1e-8, model_name="", scale="raw",
             runtime_seconds=None) -> EvaluationReport:
    """MAE, MSE, RMSE, MAPE (percent) and mean-normalised RMSE.

    MAPE skips terms whose actual is within ``mape_epsilon`` of zero and
    records how many were skipped; it is ``None`` if every term is skipped.
    NRMSE is ``None`` when the mean actual is within ``mape_epsilon`` of zero.
    """
    y = np.asarray(actuals, dtype=np.float64)
    yhat = np.asarray(predictions, dtype=np.float64)
    if y.shape != yhat.shape or y.ndim != 1:
        raise DataError(f"shape mismatch: {y.shape} vs {yhat.shape}")
    if y.size == 0:
        raise EmptySeriesError("nothing to evaluate")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(yhat))):
        raise DataError("actuals and predictions must be finite")

    err = y - yhat
    mae = float(np.mean(np.abs(err)))
    mse = float(np.mean(err ** 2))
    rmse = math.sqrt(mse)
    usable = np.abs(y) >= mape_epsilon
    mape = float(np.mean(np.abs(err[usable] / y[usable])) * 100) if usable.any() else None
    mean = float(np.mean(y))
    nrmse = rmse / mean if abs(mean) >= mape_epsilon else None
    return EvaluationReport(mae, mse, rmse, mape, nrmse, int(y.size), runtime_seconds,
                            model_name, scale, int((~usable).sum()))


@dataclass
class DescriptiveStats:
    count: int
    mean: float
    std: float
    min: float
    max: float
    median: float
    skewness: float | None
    kurtosis: float | None
    jarque_bera_statistic: float | None
    jarque_bera_p: float | None

    def to_dict(self):
        return asdict(self)


def describe(values) -> DescriptiveStats:
    """Sample summary with skewness, excess kurtosis and Jarque-Bera.

    ``std`` uses the n-1 denominator. Skewness and kurtosis are the
    standardised third and fourth central moments (population moments, the
    form Jarque-Bera is defined on); they and the test are ``None`` for a
    constant sample.
    """
    x = np.asarray(getattr(values, "values", values), dtype=np.float64)
    n = x.size
    if n < 2:
        raise InsufficientDataError("need at least two values")
    mean = float(x.mean())
    dev = x - mean
    m2 = float(np.mean(dev ** 2))
    skew = kurt = jb = jb_p = None
    if m2 > 0:
        skew = float(np.mean(dev ** 3) / m2 ** 1.5)
        kurt = float(np.mean(dev ** 4) / m2 ** 2 - 3.0)
        jb = n * (skew ** 2 / 6.0 + kurt ** 2 / 24.0)
        jb_p = math.exp(-jb / 2.0)  # chi-square(2) survival function
    return DescriptiveStats(n, mean, float(x.std(ddof=1)), float(x.min()), float(x.max()),
                            float(np.median(x)), skew, kurt, jb, jb_p)


@dataclass(frozen=True)
class WelchResult:
    t: float
    p: float
    df: float

    def to_dict(self):
        return asdict(self)


def welch_t_test(a, b) -> WelchResult:
    """Two-sided Welch (unequal-variance) t-test of mean(a) == mean(b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise InsufficientDataError("each sample needs at least two values")
    va = a.var(ddof=1) / a.size
    vb = b.var(ddof=1) / b.size
    if va == 0 and vb == 0:
        raise DegenerateTestError("both samples have zero variance")
    se2 = va + vb
    t = float((a.mean() - b.mean()) / math.sqrt(se2))
    df = float(se2 ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1)))
    p = float(2.0 * stats.t.sf(abs(t), df))
    return WelchResult(t, min(p, 1.0), df)
