import sys

import numpy as np
import pytest

from rescast.data import Series, clean_series, load_fixture


@pytest.fixture(scope="session")
def wti():
    return clean_series(load_fixture("wti"))


@pytest.fixture(scope="session")
def toy():
    return clean_series(load_fixture("synthetic"))


def make_series(values, start="2020-01-01"):
    days = np.datetime64(start) + np.arange(len(values))
    return Series(days, np.asarray(values, dtype=float))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.RESULTS:
        terminalreporter.write_line(line)
