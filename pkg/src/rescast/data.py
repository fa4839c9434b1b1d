"""Price ingestion, cleaning, scaling and splitting.

Missing observations are carried as NaN until :func:`clean_series` fills
them; everything downstream of cleaning assumes finite values.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
import math
import os
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DegenerateRangeError,
    EmptySeriesError,
    FetchError,
    HTTPStatusError,
    DataError,
    InsufficientDataError,
    RowError,
    SchemaError,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("Date", "Open", "High", "Low", "Close", "Adj Close", "Volume")
MISSING_MARKERS = ("", "null")
DEFAULT_ENDPOINT = (
    "https://query1.finance.yahoo.com/v7/finance/download/{symbol}"
    "?period1={start_epoch}&period2={end_epoch}&interval=1d&events=history"
)
FIXTURES = {
    "wti": "wti_2010_2023.csv",
    "synthetic": "synthetic_300.csv",
}


@dataclass
class Series:
    """Daily univariate price series.

    ``timestamps`` is a ``datetime64[D]`` array, ``values`` a float array in
    which NaN marks a missing observation.
    """

    timestamps: np.ndarray
    values: np.ndarray
    stale: bool = field(default=False, compare=False)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype="datetime64[D]")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.timestamps.shape != self.values.shape or self.values.ndim != 1:
            raise ValueError("timestamps and values must be 1-D and equal length")
        if len(self.timestamps) > 1 and not np.all(np.diff(self.timestamps) > np.timedelta64(0, "D")):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self):
        return len(self.values)

    def __getitem__(self, item):
        if not isinstance(item, slice):
            raise TypeError("Series supports slicing only")
        return Series(self.timestamps[item], self.values[item])

    def with_values(self, values):
        return Series(self.timestamps.copy(), values)


@dataclass(frozen=True)
class NormalizationParams:
    y_min: float
    y_max: float

    def __post_init__(self):
        if not self.y_min <= self.y_max:
            raise ValueError("y_min must not exceed y_max")

    @property
    def span(self):
        return self.y_max - self.y_min


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.75

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")


@dataclass
class SupervisedSet:
    inputs: np.ndarray
    targets: np.ndarray
    lag: int = 1

    def __len__(self):
        return len(self.inputs)


def _parse_date(text, line):
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise RowError(line, f"unparseable date {text!r}") from None


def parse_ohlc_csv(text) -> Series:
    """Read the ``Close`` column of a daily OHLC CSV.

    ``text`` may be a string or a text stream. Rows are returned in
    ascending date order; empty or ``null`` closes become NaN.
    """
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(stream)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaError("Date") from None
    for column in ("Date", "Close"):
        if column not in header:
            raise SchemaError(column)
    date_idx, close_idx = header.index("Date"), header.index("Close")

    rows = []
    for line, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) <= max(date_idx, close_idx):
            raise RowError(line, f"expected {len(header)} fields, got {len(row)}")
        day = _parse_date(row[date_idx], line)
        raw = row[close_idx].strip()
        if raw in MISSING_MARKERS:
            value = math.nan
        else:
            try:
                value = float(raw)
            except ValueError:
                raise RowError(line, f"unparseable number {raw!r}") from None
            if not math.isfinite(value):
                raise RowError(line, f"non-finite close {raw!r}")
        rows.append((day, value, line))

    rows.sort(key=lambda r: r[0])
    for (a, _, _), (b, _, line) in zip(rows, rows[1:]):
        if a == b:
            raise RowError(line, f"duplicate date {b.isoformat()}")
    days = np.array([r[0] for r in rows], dtype="datetime64[D]")
    return Series(days, np.array([r[1] for r in rows], dtype=np.float64))


def serialize_csv(series: Series) -> str:
    """Write ``series`` in the seven-column layout ``parse_ohlc_csv`` reads.

    Only Close carries information; the other price columns repeat it.
    """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for day, value in zip(series.timestamps, series.values):
        close = "null" if math.isnan(value) else repr(float(value))
        writer.writerow([str(day), close, close, close, close, close, 0])
    return out.getvalue()


def load_csv(path) -> Series:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return parse_ohlc_csv(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None


def load_fixture(name: str = "wti") -> Series:
    """Load one of the bundled CSV snapshots (``wti`` or ``synthetic``)."""
    try:
        filename = FIXTURES[name]
    except KeyError:
        raise ConfigError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
    text = resources.files("rescast.fixtures").joinpath(filename).read_text(encoding="utf-8")
    return parse_ohlc_csv(text)


def _epoch(day: dt.date) -> int:
    return int(dt.datetime(day.year, day.month, day.day, tzinfo=dt.timezone.utc).timestamp())


def cache_path_for(cache_dir, symbol, start, end) -> Path:
    return Path(cache_dir) / f"{symbol}_{start.isoformat()}_{end.isoformat()}.csv"


def fetch_history(symbol, start, end, endpoint=DEFAULT_ENDPOINT, cache_dir=None, timeout=30.0) -> Series:
    """Download daily history for ``symbol`` and cache the raw CSV.

    ``endpoint`` is a URL template with ``{symbol}``, ``{start_epoch}`` and
    ``{end_epoch}`` placeholders. The end epoch is midnight UTC following
    ``end`` so the end date is included. If the request fails at the network
    level and a cached copy exists, the cached copy is returned with
    ``stale=True``.
    """
    if isinstance(start, str):
        start = dt.date.fromisoformat(start)
    if isinstance(end, str):
        end = dt.date.fromisoformat(end)
    if cache_dir is None:
        cache_dir = os.environ.get("RESCAST_CACHE_DIR", Path.home() / ".cache" / "rescast")
    cache_file = cache_path_for(cache_dir, symbol, start, end)
    url = endpoint.format(
        symbol=symbol,
        start_epoch=_epoch(start),
        end_epoch=_epoch(end + dt.timedelta(days=1)),
    )

    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            body = resp.read()
    except urllib.error.HTTPError as exc:
        excerpt = exc.read()[:200].decode("utf-8", "replace")
        raise HTTPStatusError(exc.code, excerpt, cache_file) from exc
    except (urllib.error.URLError, OSError) as exc:
        if cache_file.exists():
            logger.warning("fetch failed (%s); serving cached %s", exc, cache_file)
            series = load_csv(cache_file)
            series.stale = True
            return series
        raise FetchError(f"fetch of {url} failed ({exc}); no cache at {cache_file}", cache_file) from exc

    series = parse_ohlc_csv(body.decode("utf-8"))
    cache_file.parent.mkdir(parents=True, exist_ok=True)
    cache_file.write_bytes(body)
    return series


def _fill(values: np.ndarray) -> np.ndarray:
    # forward fill, then back-fill a leading gap from the first observation
    missing = np.isnan(values)
    idx = np.where(missing, 0, np.arange(len(values)))
    np.maximum.accumulate(idx, out=idx)
    out = values[idx]
    first = np.argmax(~missing)
    out[:first] = values[first]
    return out


def clean_series(raw: Series, outlier_policy="none", k: float = 3.0) -> Series:
    """Fill missing values, optionally treating z-score outliers as missing.

    ``outlier_policy`` is ``"none"`` or ``"zscore"``; under ``"zscore"`` any
    value more than ``k`` sample standard deviations from the mean is
    dropped before filling.
    """
    values = raw.values.copy()
    present = ~np.isnan(values)
    if not present.any():
        raise EmptySeriesError("every value is missing")
    if present.sum() < 2:
        raise InsufficientDataError("need at least two observed values")
    if outlier_policy == "zscore":
        observed = values[present]
        std = observed.std(ddof=1)
        if std > 0:
            z = np.abs(values - observed.mean()) / std
            values[present & (z > k)] = np.nan
    elif outlier_policy != "none":
        raise ConfigError(f"unknown outlier policy {outlier_policy!r}")
    if np.isnan(values).any():
        values = _fill(values)
    return raw.with_values(values)


def normalize(series: Series, params: NormalizationParams | None = None):
    """Min-max scale to [0, 1].

    Returns ``(scaled_series, params)``. When ``params`` is given it is used
    as-is (values outside its range then fall outside [0, 1]).
    """
    values = series.values
    if len(values) == 0:
        raise EmptySeriesError("cannot normalize an empty series")
    if params is None:
        params = NormalizationParams(float(values.min()), float(values.max()))
    if not params.y_max > params.y_min:
        raise DegenerateRangeError(f"max == min == {params.y_min}")
    scaled = (values - params.y_min) / params.span
    return series.with_values(scaled), params


def denormalize(values, params: NormalizationParams) -> np.ndarray:
    if not params.y_max > params.y_min:
        raise DegenerateRangeError(f"max == min == {params.y_min}")
    return np.asarray(values, dtype=np.float64) * params.span + params.y_min


def split_index(n: int, spec: SplitSpec) -> int:
    return math.floor(spec.train_fraction * n)


def split(series: Series, spec: SplitSpec = SplitSpec()):
    """Chronological split; the floor of ``fraction * n`` points go to train."""
    n = len(series)
    if n < 4:
        raise InsufficientDataError(f"need at least 4 points to split, got {n}")
    cut = split_index(n, spec)
    return series[:cut], series[cut:]


def make_supervised(values, lag: int = 1) -> SupervisedSet:
    """Pair each value with the value ``lag`` steps later."""
    if isinstance(values, Series):
        values = values.values
    values = np.asarray(values, dtype=np.float64)
    if lag < 1:
        raise ConfigError("lag must be a positive integer")
    if len(values) <= lag:
        raise InsufficientDataError(f"series of length {len(values)} too short for lag {lag}")
    return SupervisedSet(values[:-lag].copy(), values[lag:].copy(), lag)
