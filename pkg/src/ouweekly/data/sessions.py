"""
Trading-week segmentation. A trading week runs from Sunday 21:00 UTC to
Friday 21:00 UTC; samples outside that window are dropped.
"""
import logging
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from ..errors import ParameterError

logger = logging.getLogger(__name__)

# Sunday 1970-01-04 21:00 UTC
WEEK_ANCHOR = 334800
WEEK_SECONDS = 7 * 86400
TRADING_SECONDS = 5 * 86400
DAY_SECONDS = 86400

CANDLES = "candles"
TICKS = "ticks"


def week_index(timestamps) -> np.ndarray:
    return np.floor_divide(np.asarray(timestamps, dtype=np.int64) - WEEK_ANCHOR, WEEK_SECONDS)


def week_label(index: int) -> str:
    """ISO week of the Monday following the Sunday-evening open."""
    monday = datetime.fromtimestamp(WEEK_ANCHOR + int(index) * WEEK_SECONDS, tz=timezone.utc) + timedelta(hours=3)
    year, week, _ = monday.isocalendar()
    return f"{year}-W{week:02d}"


def week_start(index: int) -> int:
    return WEEK_ANCHOR + int(index) * WEEK_SECONDS


@dataclass(frozen=True, eq=False)
class WeekSession:
    """
    Samples of one trading week. Ticks are stored as degenerate candles
    (open == high == low == close).
    @param week_id: ISO week label, e.g. 2013-W05
    @param zero_level: Reference level of the week (first sample's open)
    @param timestamps: UTC seconds, strictly increasing
    """

    week_id: str
    zero_level: float
    timestamps: np.ndarray
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    kind: str = CANDLES

    def __post_init__(self):
        for name in ("open", "high", "low", "close"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "timestamps", np.asarray(self.timestamps, dtype=np.int64))
        n = self.timestamps.size
        if any(getattr(self, name).shape != (n,) for name in ("open", "high", "low", "close")):
            raise ParameterError(f"week {self.week_id}: sample arrays are not aligned")
        if n and np.any(np.diff(self.timestamps) <= 0):
            raise ParameterError(f"week {self.week_id}: timestamps must increase strictly")
        if not np.isfinite(self.zero_level):
            raise ParameterError(f"week {self.week_id}: zero level must be finite")
        if self.kind not in (CANDLES, TICKS):
            raise ParameterError(f"unknown session kind {self.kind!r}")

    def __len__(self) -> int:
        return self.timestamps.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeekSession):
            return NotImplemented
        return (self.week_id == other.week_id and self.zero_level == other.zero_level
                and self.kind == other.kind
                and all(np.array_equal(getattr(self, name), getattr(other, name))
                        for name in ("timestamps", "open", "high", "low", "close")))

    __hash__ = None

    @property
    def start_time(self) -> int:
        return int(self.timestamps[0]) if len(self) else 0

    @classmethod
    def from_ticks(cls, week_id: str, timestamps, prices) -> "WeekSession":
        prices = np.asarray(prices, dtype=float)
        zero = float(prices[0]) if prices.size else float("nan")
        return cls(week_id, zero, timestamps, prices, prices, prices, prices, kind=TICKS)

    def negated(self) -> "WeekSession":
        """Mirror every price through zero; high and low swap roles."""
        return WeekSession(self.week_id, -self.zero_level, self.timestamps,
                           -self.open, -self.low, -self.high, -self.close, kind=self.kind)


def segment_sessions(timestamps, open_, high, low, close, kind: str = CANDLES) -> list[WeekSession]:
    """
    Split time-ordered samples into WeekSessions.
    @param timestamps: UTC seconds, strictly increasing
    @return: Sessions in time order; weeks without samples are absent
    """
    timestamps = np.asarray(timestamps, dtype=np.int64)
    if timestamps.size == 0:
        return []
    index = week_index(timestamps)
    offset = timestamps - WEEK_ANCHOR - index * WEEK_SECONDS
    trading = offset < TRADING_SECONDS
    skipped = int(np.count_nonzero(~trading))
    if skipped:
        logger.warning("Skipped %d sample(s) outside the Sunday 21:00 - Friday 21:00 UTC window", skipped)

    arrays = [np.asarray(a, dtype=float)[trading] for a in (open_, high, low, close)]
    timestamps, index = timestamps[trading], index[trading]
    bounds = np.concatenate(([0], np.flatnonzero(np.diff(index)) + 1, [index.size]))
    sessions = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if lo == hi:
            continue
        o, h, l, c = (a[lo:hi] for a in arrays)
        sessions.append(WeekSession(week_label(index[lo]), float(o[0]), timestamps[lo:hi], o, h, l, c, kind=kind))
    logger.info("Segmented %d sample(s) into %d week(s)", timestamps.size, len(sessions))
    return sessions
