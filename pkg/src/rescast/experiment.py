"""End-to-end runs: data preparation, training, prediction and comparison."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import artifacts
from .charts import ChartSeries, ChartStyle, render_chart, save_png
from .data import (
    NormalizationParams,
    Series,
    SplitSpec,
    clean_series,
    denormalize,
    fetch_history,
    load_csv,
    load_fixture,
    make_supervised,
    normalize,
    split_index,
)
from .errors import ArtifactError, DivergenceError, InsufficientDataError, SchemaError
from .esn import EchoStateNetwork, build_reservoir
from .lstm import LstmModel, lstm_fit, lstm_free_run, lstm_predict
from .metrics import describe, evaluate, welch_t_test

logger = logging.getLogger(__name__)

METRICS = ("mae", "mse", "rmse", "mape_percent", "nrmse_mean")


@dataclass
class Prepared:
    series: Series          # cleaned, raw scale
    scaled: np.ndarray
    params: NormalizationParams
    cut: int                # first test index
    lag: int

    @property
    def train_set(self):
        return make_supervised(self.scaled[:self.cut], self.lag)

    @property
    def all_inputs(self):
        return self.scaled[:-self.lag]

    @property
    def test_dates(self):
        return self.series.timestamps[self.cut:]

    @property
    def test_actuals(self):
        return self.series.values[self.cut:]


def load_series(data_config) -> Series:
    if data_config.path:
        return load_csv(data_config.path)
    if data_config.symbol:
        kwargs = {"endpoint": data_config.endpoint} if data_config.endpoint else {}
        return fetch_history(data_config.symbol, data_config.start, data_config.end, **kwargs)
    return load_fixture(data_config.fixture or "wti")


def prepare(config, series=None, params=None) -> Prepared:
    """Clean, scale and split according to ``config``.

    ``params`` forces the scaling (used when predicting with a stored model).
    """
    raw = series if series is not None else load_series(config.data)
    clean = clean_series(raw, config.data.outlier_policy, config.data.zscore_k)
    n = len(clean)
    if n < 4:
        raise InsufficientDataError(f"need at least 4 observations, got {n}")
    cut = split_index(n, SplitSpec(config.split.train_fraction))
    if params is None:
        basis = clean if config.split.normalization == "full" else clean[:cut]
        _, params = normalize(basis)
    scaled, _ = normalize(clean, params)
    return Prepared(clean, scaled.values, params, cut, config.split.lag)


def array_fingerprint(*arrays):
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
    return h.hexdigest()


def _metadata(prep, config):
    return {
        "normalization": {"y_min": prep.params.y_min, "y_max": prep.params.y_max,
                          "mode": config.split.normalization},
        "lag": prep.lag,
        "train_fraction": config.split.train_fraction,
        "train_end": str(prep.series.timestamps[prep.cut - 1]),
    }


def train_esn(prep, reservoir_config):
    model = build_reservoir(reservoir_config)
    report = model.fit_readout(prep.train_set)
    return model, report


def train_lstm(prep, lstm_config):
    return lstm_fit(lstm_config, prep.train_set)


def _check_finite(pred, name):
    bad = np.flatnonzero(~np.isfinite(pred))
    if bad.size:
        raise DivergenceError(f"{name} produced a non-finite prediction at step {bad[0]}", name)


def predict_test(model, prep, mode="one-step"):
    """Scaled predictions aligned with the test targets.

    One-step mode replays every input from a zero state and keeps the
    outputs whose targets fall in the test range. Free-running mode warms
    up on the training inputs and then feeds predictions back.
    """
    horizon = len(prep.series) - prep.cut
    lag = prep.lag
    name = "esn" if isinstance(model, EchoStateNetwork) else "lstm"
    if mode == "one-step":
        if name == "esn":
            model.reset_state()
            full = model.predict_one_step(prep.all_inputs)
        else:
            full = lstm_predict(model, prep.all_inputs)
        pred = full[prep.cut - lag:]
    else:
        warm = prep.scaled[:prep.cut - 1]
        pred = free_run(model, warm, prep.scaled[prep.cut - 1], horizon)
    _check_finite(pred, name)
    return pred


def free_run(model, warm_inputs, x0, horizon):
    if isinstance(model, EchoStateNetwork):
        model.reset_state()
        if len(warm_inputs):
            model.predict_one_step(warm_inputs)
        return model.predict_free_running(x0, horizon)
    return lstm_free_run(model, warm_inputs, x0, horizon)


def predictions_csv(dates, actuals, predicted):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["date", "actual", "predicted"])
    for d, a, p in zip(dates, actuals, predicted):
        writer.writerow([str(d), "" if a is None or np.isnan(a) else repr(float(a)), repr(float(p))])
    return out.getvalue()


def read_predictions_csv(path):
    dates, actual, predicted = [], [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"date", "actual", "predicted"} - set(reader.fieldnames or ())
        if missing:
            raise SchemaError(sorted(missing)[0])
        for row in reader:
            if not row["actual"]:
                continue
            dates.append(row["date"])
            actual.append(float(row["actual"]))
            predicted.append(float(row["predicted"]))
    return np.array(dates, dtype="datetime64[D]"), np.array(actual), np.array(predicted)


def loss_csv(history):
    lines = ["epoch,loss"] + [f"{e},{loss!r}" for e, loss in enumerate(history)]
    return "\n".join(lines) + "\n"


def _winner(a, b):
    if a is None or b is None:
        return "tie" if a is b else ("esn" if b is None else "lstm")
    if a < b:
        return "esn"
    if b < a:
        return "lstm"
    return "tie"


def _dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def compare(config, out_dir, series=None):
    """Train both models on identical data and write the comparison outputs.

    Writes ``compare_report.json`` (deterministic for a fixed config),
    ``timing.json`` (wall-clock fit times), per-model prediction CSVs, the
    LSTM loss CSV and three SVG charts. Returns ``(report, timing)``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prep = prepare(config, series)
    mode = config.predict.mode
    eps = config.evaluate.mape_epsilon
    on_raw = config.evaluate.scale == "raw"

    esn_data = prep.train_set
    lstm_data = prep.train_set
    fed = {
        "esn": array_fingerprint(esn_data.inputs, esn_data.targets),
        "lstm": array_fingerprint(lstm_data.inputs, lstm_data.targets),
    }

    try:
        esn = build_reservoir(config.reservoir)
        esn_fit = esn.fit_readout(esn_data)
        esn_pred = predict_test(esn, prep, mode)
    except DivergenceError as exc:
        exc.model_name = "esn"
        raise
    try:
        lstm, lstm_fit_report = lstm_fit(config.lstm, lstm_data)
        lstm_pred = predict_test(lstm, prep, mode)
    except DivergenceError as exc:
        exc.model_name = "lstm"
        raise

    actual_scaled = prep.scaled[prep.cut:]
    if on_raw:
        actual = prep.test_actuals
        preds = {"esn": denormalize(esn_pred, prep.params), "lstm": denormalize(lstm_pred, prep.params)}
        for name, p in preds.items():
            _check_finite(p, name)
    else:
        actual = actual_scaled
        preds = {"esn": esn_pred, "lstm": lstm_pred}

    reports = {name: evaluate(actual, p, eps, model_name=name, scale=config.evaluate.scale)
               for name, p in preds.items()}
    abs_err = {name: np.abs(actual - p) for name, p in preds.items()}
    welch = welch_t_test(abs_err["esn"], abs_err["lstm"])
    winners = {m: _winner(getattr(reports["esn"], m), getattr(reports["lstm"], m)) for m in METRICS}

    report = {
        "config_fingerprint": config.fingerprint(),
        "data": {
            "observations": len(prep.series),
            "train_points": prep.cut,
            "test_points": len(prep.series) - prep.cut,
            "first_date": str(prep.series.timestamps[0]),
            "last_date": str(prep.series.timestamps[-1]),
            "test_start": str(prep.test_dates[0]),
            "train_fingerprint": array_fingerprint(prep.scaled[:prep.cut]),
            "test_fingerprint": array_fingerprint(prep.scaled[prep.cut:]),
            "fit_input_fingerprints": fed,
            "normalization": {"y_min": prep.params.y_min, "y_max": prep.params.y_max,
                              "mode": config.split.normalization},
        },
        "prediction_mode": mode,
        "models": {name: {**r.to_dict(), "mape_skipped": r.mape_skipped} for name, r in reports.items()},
        "welch_abs_error": welch.to_dict(),
        "winner": winners,
        "statistics": {
            "series": describe(prep.series.values).to_dict(),
            "abs_error": {name: describe(e).to_dict() for name, e in abs_err.items()},
        },
    }
    timing = {
        "esn": esn_fit.train_seconds,
        "lstm": lstm_fit_report.train_seconds,
        "winner": _winner(esn_fit.train_seconds, lstm_fit_report.train_seconds),
    }

    (out / "compare_report.json").write_text(_dump_json(report), encoding="utf-8")
    (out / "timing.json").write_text(_dump_json(timing), encoding="utf-8")
    for name, p in preds.items():
        (out / f"predictions_{name}.csv").write_text(
            predictions_csv(prep.test_dates, actual, p), encoding="utf-8")
    (out / "lstm_loss.csv").write_text(loss_csv(lstm_fit_report.loss_history), encoding="utf-8")
    write_charts(out, prep, actual if on_raw else None, preds, config)
    return report, timing


def write_charts(out, prep, actual, preds, config):
    series = prep.series
    dates = prep.test_dates
    if actual is None:
        # normalized-scale run: chart everything on the normalized scale
        values = prep.scaled
        actual = values[prep.cut:]
        unit = "normalized price"
    else:
        values = series.values
        unit = "price (USD/bbl)"
    charts = {
        "fig_series": (
            [ChartSeries("close", series.timestamps, values, color="#1f77b4")],
            ChartStyle(title="Daily closing price", y_label=unit),
        ),
        "fig_test_window": (
            [ChartSeries("actual", dates, actual, color="#1f77b4"),
             ChartSeries("LSTM", dates, preds["lstm"], color="#ff7f0e"),
             ChartSeries("reservoir", dates, preds["esn"], color="#d62728")],
            ChartStyle(title="Test window: actual vs predicted", y_label=unit),
        ),
        "fig_train_test_prediction": (
            [ChartSeries("train", series.timestamps[:prep.cut], values[:prep.cut], color="#1f77b4"),
             ChartSeries("test", dates, actual, color="#ff7f0e"),
             ChartSeries("prediction", dates, preds["esn"], color="#2ca02c")],
            ChartStyle(title="Reservoir model: train, test and prediction", y_label=unit),
        ),
    }
    for name, (lines, style) in charts.items():
        (out / f"{name}.svg").write_text(render_chart(lines, style), encoding="utf-8")
        if config.output.png:
            save_png(lines, style, out / f"{name}.png")


def train(config, kind, out_dir, series=None):
    """Fit one model and write its artifact; returns ``(path, fit_info)``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prep = prepare(config, series)
    meta = _metadata(prep, config)
    if kind == "esn":
        model, report = train_esn(prep, config.reservoir)
        info = {"model": "esn", "train_seconds": report.train_seconds,
                "ridge_residual_norm": report.ridge_residual_norm,
                "effective_samples": report.effective_samples}
    else:
        model, report = train_lstm(prep, config.lstm)
        info = {"model": "lstm", "train_seconds": report.train_seconds,
                "effective_samples": report.effective_samples,
                "final_loss": report.loss_history[-1]}
        (out / "lstm_loss.csv").write_text(loss_csv(report.loss_history), encoding="utf-8")
    path = out / f"{kind}_model.json"
    artifacts.save(path, model, meta)
    return path, info


def predict(config, model_path, out_dir, series=None):
    """Predict with a stored model; writes and returns the predictions CSV path."""
    model, meta = artifacts.load(model_path)
    try:
        norm = meta["normalization"]
        params = NormalizationParams(float(norm["y_min"]), float(norm["y_max"]))
    except (KeyError, TypeError, ValueError):
        raise ArtifactError(f"{model_path} lacks normalization metadata") from None
    if isinstance(model, LstmModel) and not model.fitted:
        raise ArtifactError(f"{model_path} holds an untrained model")
    lag = int(meta.get("lag", config.split.lag))
    config.split.lag = lag
    prep = prepare(config, series, params)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = "esn" if isinstance(model, EchoStateNetwork) else "lstm"
    if config.predict.mode == "one-step":
        pred = denormalize(predict_test(model, prep, "one-step"), params)
        # finite on the unit scale can still overflow once rescaled
        _check_finite(pred, name)
        text = predictions_csv(prep.test_dates, prep.test_actuals, pred)
    else:
        horizon = config.predict.horizon
        pred = denormalize(free_run(model, prep.scaled[:-1], prep.scaled[-1], horizon), params)
        _check_finite(pred, name)
        last = prep.series.timestamps[-1]
        dates = np.busday_offset(last, np.arange(1, horizon + 1), roll="forward")
        text = predictions_csv(dates, [None] * horizon, pred)
    path = out / "predictions.csv"
    path.write_text(text, encoding="utf-8")
    return path
