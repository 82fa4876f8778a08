import datetime as dt
import json

import pytest

from visit_optimizer.utils import day_bounds, dumps_exact, local_day, parse_offset, stable_hash, time_window


@pytest.mark.parametrize(
    "text,minutes",
    [("+09:00", 540), ("-05:30", -330), ("540", 540), ("0", 0), ("+00:00", 0)],
)
def test_parse_offset(text, minutes):
    assert parse_offset(text) == minutes


def test_parse_offset_rejects_empty():
    with pytest.raises(ValueError):
        parse_offset("  ")


def test_day_bounds_and_local_day():
    day = dt.date(2024, 1, 15)
    lo, hi = day_bounds(day, 540)
    assert hi - lo == 86_399
    assert local_day(lo, 540) == day
    assert local_day(hi, 540) == day
    assert local_day(hi + 1, 540) == day + dt.timedelta(days=1)


def test_time_windows_are_six_hours():
    lo, _ = day_bounds(dt.date(2024, 1, 15), 0)
    assert [time_window(lo + h * 3600, 0) for h in (0, 5, 6, 11, 12, 17, 18, 23)] == [0, 0, 1, 1, 2, 2, 3, 3]


def test_stable_hash_is_deterministic():
    assert stable_hash(0, "u01_2024-01-15") == stable_hash(0, "u01_2024-01-15")
    assert stable_hash(0, "u01_2024-01-15") != stable_hash(1, "u01_2024-01-15")


def test_dumps_exact_keeps_every_digit():
    value = 0.1 + 0.2
    text = dumps_exact({"x": value, "xs": [value, 1], "nested": [{"y": 1.0 / 3.0}]})
    assert "0.30000000000000004" in text
    loaded = json.loads(text)
    assert loaded["x"] == value
    assert loaded["nested"][0]["y"] == 1.0 / 3.0
