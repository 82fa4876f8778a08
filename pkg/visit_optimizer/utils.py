"""Utility helpers for the Visit Optimizer.

Includes:
    - ANSI colorized logging setup.
    - Fixed-offset local time helpers (session days, six-hour windows).
    - Deterministic hashing and 17-digit JSON dumps.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
import math
import sys
from typing import Any

from .defaults import SECONDS_PER_DAY, TIME_WINDOW_HOURS

LOGGER_NAME = "visit_optimizer"


# === ANSI color codes for logger ===
class ColorFormatter(logging.Formatter):
    """Custom log formatter with ANSI color codes."""

    COLORS = {
        logging.DEBUG: "\033[92m",  # Green
        logging.INFO: "\033[94m",  # Blue
        logging.WARNING: "\033[93m",  # Yellow
        logging.ERROR: "\033[91m",  # Red
        logging.CRITICAL: "\033[95m",  # Magenta
    }

    RESET = "\033[0m"

    def format(self, record: logging.LogRecord) -> str:
        color = self.COLORS.get(record.levelno, self.RESET)
        message = super().format(record)
        return f"{color}{message}{self.RESET}"


def setup_logger(verbose: bool = False) -> logging.Logger:
    """Configure the colorized package logger.

    Args:
        verbose: If True, sets log level to DEBUG; otherwise INFO.

    Returns:
        logging.Logger: Configured logger. Module loggers are its children.
    """
    logger = logging.getLogger(LOGGER_NAME)

    if logger.handlers:
        # Re-point at the current STDERR (it may have been swapped, e.g. by a test runner)
        for h in logger.handlers:
            if isinstance(h, logging.StreamHandler):
                h.setStream(sys.stderr)
        logger.setLevel(logging.DEBUG if verbose else logging.INFO)
        return logger

    # Send logs to STDERR so STDOUT can be piped/parsed separately
    handler = logging.StreamHandler(sys.stderr)
    formatter = ColorFormatter("%(asctime)s [%(levelname)s]\t| %(message)s")
    handler.setFormatter(formatter)
    logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    logger.propagate = False
    return logger


# === Local time under a fixed UTC offset ===
def local_seconds(ts: int, tz_offset_minutes: int) -> int:
    """Seconds since local midnight of `ts`."""
    return (ts + tz_offset_minutes * 60) % SECONDS_PER_DAY


def local_day(ts: int, tz_offset_minutes: int) -> dt.date:
    shifted = ts + tz_offset_minutes * 60
    return dt.date(1970, 1, 1) + dt.timedelta(days=shifted // SECONDS_PER_DAY)


def day_bounds(day: dt.date, tz_offset_minutes: int) -> tuple[int, int]:
    """Epoch seconds of local 00:00:00 and 23:59:59 on `day`."""
    start = (day - dt.date(1970, 1, 1)).days * SECONDS_PER_DAY - tz_offset_minutes * 60
    return start, start + SECONDS_PER_DAY - 1


def time_window(ts: int, tz_offset_minutes: int) -> int:
    """Index of the six-hour window containing `ts`: 0 = [00-06), ..., 3 = [18-24)."""
    return local_seconds(ts, tz_offset_minutes) // (TIME_WINDOW_HOURS * 3600)


# === Helper functions ===
def stable_hash(*parts: Any) -> int:
    """Process-independent 64-bit hash (Python's hash() is salted per run)."""
    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def dumps_exact(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON text whose floats carry 17 significant digits (bit-exact round trip).

    The stdlib encoder always uses the shortest repr; dumps of solver
    coefficients are meant to be diffed digit for digit.
    """
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        if math.isfinite(obj):
            return f"{obj:.17g}"
        return json.dumps(str(obj))
    if isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps_exact(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps_exact(v, indent, _level + 1) for v in obj) + "]"
        items = [f"{pad}{dumps_exact(v, indent, _level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def parse_offset(text: str) -> int:
    """Parse "+09:00" / "-05:30" / "540" into minutes east of UTC."""
    s = text.strip()
    if not s:
        raise ValueError("empty timezone offset")
    if ":" in s:
        sign = -1 if s[0] == "-" else 1
        hh, mm = s.lstrip("+-").split(":", 1)
        return sign * (int(hh) * 60 + int(mm))
    return int(s)
