from dataclasses import fields

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rescast.config import SECTIONS, RunConfig, load_config, parse_config, parse_value
from rescast.errors import ConfigError

SAMPLE = """
# reference setup
reservoir.units = 20
reservoir.leak_rate = 0.75
reservoir.rho = 1.025
split.train_fraction = 0.75

[lstm]
hidden_units = 8
optimizer = "sgd"
"""


def test_parse_dotted_and_tables():
    c = parse_config(SAMPLE)
    assert c.reservoir.spectral_radius == 1.025
    assert c.reservoir.units == 20 and c.lstm.hidden_units == 8 and c.lstm.optimizer == "sgd"


def test_every_field_is_settable_through_its_own_type():
    c = RunConfig()
    for section in SECTIONS:
        for f in fields(getattr(c, section)):
            value = getattr(getattr(c, section), f.name)
            c.set(f"{section}.{f.name}", value)
            assert getattr(getattr(c, section), f.name) == value


def test_int_fields_coerce_and_reject():
    c = RunConfig()
    c.set("reservoir.units", 50.0)
    assert c.reservoir.units == 50 and isinstance(c.reservoir.units, int)
    for bad in (2.5, "many", True):
        with pytest.raises(ConfigError):
            c.set("reservoir.units", bad)


def test_unknown_key_and_syntax_error():
    with pytest.raises(ConfigError, match="unknown"):
        parse_config("reservoir.nope = 1")
    with pytest.raises(ConfigError, match="unknown"):
        parse_config("nosuch.key = 1")
    with pytest.raises(ConfigError, match="syntax"):
        parse_config("reservoir.units = = 3")


def test_overrides_beat_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(SAMPLE)
    c = load_config(path, [("reservoir.rho", "0.9"), ("predict.mode", "free-running"), ("output.png", "true")])
    assert c.reservoir.spectral_radius == 0.9
    assert c.predict.mode == "free-running" and c.output.png is True


def test_parse_value():
    assert parse_value("3") == 3 and parse_value("1e-8") == 1e-8
    assert parse_value("true") is True and parse_value('"x"') == "x"
    assert parse_value("one-step") == "one-step"


def test_default_data_source_is_fixture():
    assert load_config().data.fixture == "wti"


@pytest.mark.parametrize("key,value", [
    ("split.train_fraction", "1.0"),
    ("split.lag", "0"),
    ("split.normalization", '"later"'),
    ("evaluate.scale", '"log"'),
    ("predict.mode", '"sideways"'),
    ("predict.horizon", "0"),
    ("data.outlier_policy", '"iqr"'),
    ("data.path", '"a.csv"'),
    ("reservoir.leak_rate", "0"),
    ("lstm.optimizer", '"rmsprop"'),
])
def test_validation_errors(key, value):
    with pytest.raises(ConfigError):
        load_config(None, [("data.fixture", '"wti"'), (key, value)])


def test_free_running_needs_lag_one():
    with pytest.raises(ConfigError, match="lag"):
        load_config(None, [("predict.mode", "free-running"), ("split.lag", "2")])


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.toml")


@given(st.sampled_from(["reservoir.units", "lstm.epochs", "split.lag", "predict.horizon"]), st.integers(1, 10**6))
def test_fingerprint_tracks_fields(key, value):
    a, b = RunConfig(), RunConfig()
    assert a.fingerprint() == b.fingerprint()
    b.set(key, value)
    section, name = key.split(".")
    changed = getattr(getattr(a, section), name) != value
    assert (a.fingerprint() != b.fingerprint()) == changed
