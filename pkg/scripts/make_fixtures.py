"""Regenerate the bundled CSV fixtures.

wti_2010_2023.csv is a synthetic surrogate of front-month WTI daily closes
on the NYSE session calendar, 2010-01-04 .. 2023-05-31 (3,375 sessions).
Log prices follow a mean-reverting walk around a hand-placed anchor path;
the 2020-04-20 close is pinned at -37.63. synthetic_300.csv is a noisy
seasonal toy series with two missing closes.

Needs pandas (calendar only). Run from the repo root:

    python scripts/make_fixtures.py
"""

import numpy as np
import pandas as pd
from pandas.tseries.holiday import (
    AbstractHolidayCalendar,
    GoodFriday,
    Holiday,
    USLaborDay,
    USMartinLutherKingJr,
    USMemorialDay,
    USPresidentsDay,
    USThanksgivingDay,
    nearest_workday,
)

from rescast.data import Series, serialize_csv

OUT = "src/rescast/fixtures/"

ANCHORS = [
    ("2010-01-04", 81.5), ("2010-05-25", 68.0), ("2010-12-31", 91.4),
    ("2011-04-29", 113.4), ("2011-10-04", 75.7), ("2012-02-24", 109.8),
    ("2012-06-28", 77.7), ("2013-04-17", 86.7), ("2013-09-06", 110.5),
    ("2013-11-27", 92.3), ("2014-06-20", 107.3), ("2015-01-28", 44.5),
    ("2015-06-10", 61.4), ("2015-08-24", 38.2), ("2016-02-11", 26.2),
    ("2016-06-08", 51.2), ("2016-11-14", 43.3), ("2017-01-06", 53.9),
    ("2017-06-21", 42.5), ("2018-01-26", 66.1), ("2018-10-03", 76.4),
    ("2018-12-24", 42.5), ("2019-04-23", 66.3), ("2019-08-07", 51.1),
    ("2020-01-06", 63.3), ("2020-03-09", 31.1), ("2020-03-30", 20.1),
    ("2020-04-17", 18.3), ("2020-04-21", 10.0), ("2020-04-28", 12.3),
    ("2020-06-22", 40.5), ("2020-10-30", 35.8), ("2021-03-05", 66.1),
    ("2021-07-06", 73.4), ("2021-10-26", 84.7), ("2021-12-01", 65.6),
    ("2022-03-08", 123.7), ("2022-06-08", 122.1), ("2022-09-26", 76.7),
    ("2022-11-07", 91.8), ("2022-12-09", 71.0), ("2023-03-17", 66.7),
    ("2023-04-12", 83.3), ("2023-05-31", 68.1),
]


class NYSECalendar(AbstractHolidayCalendar):
    rules = [
        Holiday("New Year", month=1, day=1, observance=nearest_workday),
        USMartinLutherKingJr,
        USPresidentsDay,
        GoodFriday,
        USMemorialDay,
        Holiday("Independence Day", month=7, day=4, observance=nearest_workday),
        USLaborDay,
        USThanksgivingDay,
        Holiday("Christmas", month=12, day=25, observance=nearest_workday),
    ]


def sessions():
    days = pd.bdate_range("2010-01-01", "2023-05-31")
    days = days.difference(NYSECalendar().holidays("2010-01-01", "2023-05-31"))
    days = days.difference(pd.to_datetime(["2012-10-29", "2012-10-30"]))  # Hurricane Sandy
    assert len(days) == 3375
    return days.values.astype("datetime64[D]")


def wti_surrogate(days, seed=20230531):
    rng = np.random.default_rng(seed)
    t = days.astype(np.int64)
    at = np.array([np.datetime64(d, "D").astype(np.int64) for d, _ in ANCHORS])
    trend = np.interp(t, at, np.log([p for _, p in ANCHORS]))

    stress = (days >= np.datetime64("2020-03-01")) & (days <= np.datetime64("2020-06-30"))
    vol = np.where(stress, 0.055, 0.019)
    dev = np.zeros(len(days))
    for i in range(1, len(days)):
        dev[i] = 0.95 * dev[i - 1] + vol[i] * rng.standard_normal()
    prices = np.round(np.exp(trend + dev), 2)
    prices[days == np.datetime64("2020-04-20")] = -37.63
    for day in ("2012-07-03", "2016-08-15", "2019-11-29"):
        prices[days == np.datetime64(day)] = np.nan
    return prices


def toy_series(seed=7):
    rng = np.random.default_rng(seed)
    days = np.busday_offset(np.datetime64("2021-01-04"), np.arange(300))
    i = np.arange(300)
    prices = np.round(60 + 0.02 * i + 8 * np.sin(2 * np.pi * i / 40) + rng.normal(0, 0.6, 300), 2)
    prices[[57, 211]] = np.nan
    return days, prices


def main():
    days = sessions()
    with open(OUT + "wti_2010_2023.csv", "w", encoding="utf-8") as fh:
        fh.write(serialize_csv(Series(days, wti_surrogate(days))))
    with open(OUT + "synthetic_300.csv", "w", encoding="utf-8") as fh:
        fh.write(serialize_csv(Series(*toy_series())))


if __name__ == "__main__":
    main()
