"""``rescast`` command-line entry point.

Exit codes: 0 success, 1 config error, 2 data/fetch error, 3 artifact
error, 4 model divergence.

Any config key can be overridden with a flag of the same dotted name, e.g.
``--reservoir.leak_rate 0.5`` or ``--split.normalization=train-only``.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import os
import sys
from pathlib import Path

from . import experiment
from .config import load_config
from .data import DEFAULT_ENDPOINT, cache_path_for, fetch_history, serialize_csv
from .errors import ConfigError, RescastError
from .metrics import evaluate

logger = logging.getLogger("rescast")


def _common(parser):
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int, help="seed for both models")
    parser.add_argument("--out", help="output directory (output.dir)")
    parser.add_argument("--data", help="input CSV (data.path)")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rescast", description="Echo state network vs LSTM forecasting of daily closing prices.",
        epilog="Exit codes: 0 ok, 1 config, 2 data or fetch, 3 artifact, 4 divergence.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", help="download daily history into the cache")
    _common(p)
    p.add_argument("--symbol", default="CL=F")
    p.add_argument("--start", default="2010-01-01")
    p.add_argument("--end", default="2023-05-31")
    p.add_argument("--endpoint", default=None, help="URL template with {symbol}, {start_epoch}, {end_epoch}")
    p.add_argument("--cache-dir", default=None)

    p = sub.add_parser("train", help="fit one model and write its artifact")
    _common(p)
    p.add_argument("--model", choices=("esn", "lstm"), default="esn")

    p = sub.add_parser("predict", help="predict with a stored model")
    _common(p)
    p.add_argument("--model", required=True, help="model artifact path")
    p.add_argument("--mode", choices=("one-step", "free-running"))
    p.add_argument("--horizon", type=int)

    p = sub.add_parser("evaluate", help="score a predictions CSV")
    _common(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--name", default="")

    p = sub.add_parser("compare", help="train both models and write the comparison report")
    _common(p)
    p.add_argument("--mode", choices=("one-step", "free-running"))
    return parser


def split_overrides(extra):
    """Turn leftover ``--section.key value`` arguments into pairs."""
    pairs = []
    it = iter(extra)
    for arg in it:
        if not arg.startswith("--") or "." not in arg.split("=", 1)[0]:
            raise ConfigError(f"unrecognised argument {arg!r}")
        key = arg[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            value = next(it, None)
            if value is None:
                raise ConfigError(f"flag --{key} needs a value")
        pairs.append((key, value))
    return pairs


def _config(args, extra):
    overrides = split_overrides(extra)
    if args.seed is not None:
        overrides += [("reservoir.seed", str(args.seed)), ("lstm.seed", str(args.seed))]
    if args.out:
        overrides.append(("output.dir", json.dumps(args.out)))
    if args.data:
        overrides.append(("data.path", json.dumps(args.data)))
        overrides.append(("data.fixture", '""'))
    if getattr(args, "mode", None):
        overrides.append(("predict.mode", json.dumps(args.mode)))
    if getattr(args, "horizon", None):
        overrides.append(("predict.horizon", str(args.horizon)))
    return load_config(args.config, overrides)


def _print_json(obj):
    print(json.dumps(obj, indent=2))


def cmd_fetch(args, extra):
    config = _config(args, extra)
    cache_dir = args.cache_dir or os.environ.get("RESCAST_CACHE_DIR") or Path.home() / ".cache" / "rescast"
    start = dt.date.fromisoformat(args.start)
    end = dt.date.fromisoformat(args.end)
    endpoint = args.endpoint or config.data.endpoint or DEFAULT_ENDPOINT
    try:
        series = fetch_history(args.symbol, start, end, endpoint, cache_dir)
    except RescastError as exc:
        tried = getattr(exc, "cache_path", None) or cache_path_for(cache_dir, args.symbol, start, end)
        exc.args = (f"{exc} (cache path: {tried})",)
        raise
    out = Path(config.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{args.symbol}.csv").write_text(serialize_csv(series), encoding="utf-8")
    span = f"{series.timestamps[0]} to {series.timestamps[-1]}" if len(series) else "empty"
    stale = " (stale cache)" if series.stale else ""
    print(f"{args.symbol}: {len(series)} rows, {span}{stale}")
    return 0


def cmd_train(args, extra):
    config = _config(args, extra)
    path, info = experiment.train(config, args.model, config.output.dir)
    info["artifact"] = str(path)
    _print_json(info)
    return 0


def cmd_predict(args, extra):
    config = _config(args, extra)
    path = experiment.predict(config, args.model, config.output.dir)
    print(path)
    return 0


def cmd_evaluate(args, extra):
    config = _config(args, extra)
    _, actual, predicted = experiment.read_predictions_csv(args.predictions)
    report = evaluate(actual, predicted, config.evaluate.mape_epsilon, model_name=args.name,
                      scale=config.evaluate.scale)
    out = Path(config.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "evaluation.json").write_text(report.to_json() + "\n", encoding="utf-8")
    (out / "evaluation.csv").write_text(report.to_csv_row(), encoding="utf-8")
    _print_json(report.to_dict())
    return 0


def cmd_compare(args, extra):
    config = _config(args, extra)
    report, timing = experiment.compare(config, config.output.dir)
    _print_json({"winner": report["winner"], "fit_seconds": timing,
                 "mape_percent": {k: v["mape_percent"] for k, v in report["models"].items()}})
    return 0


COMMANDS = {
    "fetch": cmd_fetch,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
}


def main(argv=None):
    args, extra = build_parser().parse_known_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, extra)
    except RescastError as exc:
        name = getattr(exc, "model_name", None)
        prefix = f"{name}: " if name else ""
        print(f"rescast {args.command}: error: {prefix}{exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
