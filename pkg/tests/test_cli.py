import csv
import json

import numpy as np
import pytest

from rescast.cli import main, split_overrides
from rescast.data import Series, serialize_csv
from rescast.errors import ConfigError

from test_fetch import END, FIVE_ROWS, START, StubHandler, dead_endpoint, stub  # noqa: F401

BIAS_ONLY = "tests/data/bias_only_esn.json"


@pytest.fixture
def toy_csv(tmp_path):
    days = np.busday_offset("2021-01-04", np.arange(100), roll="forward")
    t = np.arange(100)
    values = 60 + 5 * np.sin(t / 7) + 0.05 * t
    path = tmp_path / "toy.csv"
    path.write_text(serialize_csv(Series(days, values)))
    return path


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_split_overrides():
    assert split_overrides(["--a.b", "1", "--c.d=x"]) == [("a.b", "1"), ("c.d", "x")]
    with pytest.raises(ConfigError):
        split_overrides(["--nodot", "1"])
    with pytest.raises(ConfigError):
        split_overrides(["--a.b"])


def test_train_esn_is_byte_identical(toy_csv, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["train", "--model", "esn", "--data", str(toy_csv), "--out", str(a)]) == 0
    assert main(["train", "--model", "esn", "--data", str(toy_csv), "--out", str(b)]) == 0
    assert (a / "esn_model.json").read_bytes() == (b / "esn_model.json").read_bytes()
    info = json.loads(capsys.readouterr().out.split("\n}\n")[0] + "\n}")
    assert info["model"] == "esn" and info["effective_samples"] == 74 - 50


def test_train_lstm_one_epoch(toy_csv, tmp_path):
    out = tmp_path / "o"
    code = main(["train", "--model", "lstm", "--data", str(toy_csv), "--out", str(out),
                 "--lstm.epochs", "1", "--lstm.hidden_units", "4"])
    assert code == 0
    loss = rows(out / "lstm_loss.csv")
    assert len(loss) == 1 and loss[0]["epoch"] == "0"
    assert (out / "lstm_model.json").exists()


def test_predict_bias_only_is_constant(toy_csv, tmp_path):
    assert main(["predict", "--model", BIAS_ONLY, "--data", str(toy_csv), "--out", str(tmp_path)]) == 0
    out = rows(tmp_path / "predictions.csv")
    assert len(out) == 25  # test portion of 100 points at 0.75
    assert {r["predicted"] for r in out} == {"50.0"}
    assert out[0]["date"] == str(np.busday_offset("2021-01-04", 75))


def test_predict_free_running_business_days(toy_csv, tmp_path):
    code = main(["predict", "--model", BIAS_ONLY, "--data", str(toy_csv), "--out", str(tmp_path),
                 "--mode", "free-running", "--horizon", "10"])
    assert code == 0
    out = rows(tmp_path / "predictions.csv")
    expected = np.busday_offset(np.busday_offset("2021-01-04", 99), np.arange(1, 11))
    assert [r["date"] for r in out] == [str(d) for d in expected]
    assert all(r["actual"] == "" for r in out)


def test_train_predict_evaluate_chain(toy_csv, tmp_path):
    assert main(["train", "--data", str(toy_csv), "--out", str(tmp_path)]) == 0
    assert main(["predict", "--model", str(tmp_path / "esn_model.json"), "--data", str(toy_csv),
                 "--out", str(tmp_path)]) == 0
    assert main(["evaluate", "--predictions", str(tmp_path / "predictions.csv"), "--name", "esn",
                 "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "evaluation.json").read_text())
    assert report["n"] == 25 and report["model_name"] == "esn"
    assert report["mape_percent"] < 5
    assert (tmp_path / "evaluation.csv").read_text().startswith("mae,mse,rmse,")


def test_config_error_exit_1(tmp_path, capsys):
    assert main(["train", "--out", str(tmp_path), "--split.lag", "0"]) == 1
    assert "split.lag" in capsys.readouterr().err
    assert main(["train", "--out", str(tmp_path), "--bogus.key", "1"]) == 1


def test_data_error_exit_2(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("Date,Open\n2020-01-01,1\n")
    assert main(["train", "--data", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["train", "--data", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 2


def test_artifact_error_exit_3(toy_csv, tmp_path, capsys):
    doc = json.loads(open(BIAS_ONLY).read())
    doc["format_version"] = 99
    path = tmp_path / "future.json"
    path.write_text(json.dumps(doc))
    assert main(["predict", "--model", str(path), "--data", str(toy_csv), "--out", str(tmp_path)]) == 3
    assert "version" in capsys.readouterr().err
    path.write_text("{not json")
    assert main(["predict", "--model", str(path), "--data", str(toy_csv), "--out", str(tmp_path)]) == 3


def test_divergence_exit_4(toy_csv, tmp_path, capsys):
    doc = json.loads(open(BIAS_ONLY).read())
    doc["model"]["w_out"] = [1.7e308] * 5
    path = tmp_path / "wild.json"
    path.write_text(json.dumps(doc))
    with np.errstate(over="ignore", invalid="ignore"):
        code = main(["predict", "--model", str(path), "--data", str(toy_csv), "--out", str(tmp_path)])
    assert code == 4
    assert "esn" in capsys.readouterr().err


def test_fetch_writes_rows(stub, tmp_path, capsys):  # noqa: F811
    _, url = stub
    code = main(["fetch", "--endpoint", url, "--cache-dir", str(tmp_path / "cache"),
                 "--out", str(tmp_path / "out")])
    assert code == 0
    assert "5 rows" in capsys.readouterr().out
    assert len(rows(tmp_path / "out" / "CL=F.csv")) == 5


def test_fetch_stale_then_cold(stub, tmp_path, capsys):  # noqa: F811
    _, url = stub
    cache = str(tmp_path / "cache")
    main(["fetch", "--endpoint", url, "--cache-dir", cache, "--out", str(tmp_path)])
    capsys.readouterr()
    assert main(["fetch", "--endpoint", dead_endpoint(), "--cache-dir", cache, "--out", str(tmp_path)]) == 0
    assert "stale" in capsys.readouterr().out
    cold = str(tmp_path / "cold")
    assert main(["fetch", "--endpoint", dead_endpoint(), "--cache-dir", cold, "--out", str(tmp_path)]) == 2
    assert "cache path: " + cold in capsys.readouterr().err
