import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from ..errors import DataError, MalformedRowError, MissingColumnsError, NonMonotoneTimeError, ParameterError
from .sessions import CANDLES, TICKS, WeekSession, segment_sessions

logger = logging.getLogger(__name__)

CANDLE_COLUMNS = ("timestamp", "open", "high", "low", "close")
TICK_COLUMNS = ("timestamp", "price")
FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class CandleRecord:
    timestamp: int
    open: float
    high: float
    low: float
    close: float

    def __post_init__(self):
        if not self.low <= min(self.open, self.close) <= max(self.open, self.close) <= self.high:
            raise ParameterError(f"inconsistent candle at {self.timestamp}: {self}")


def _first_line(mask: np.ndarray) -> int:
    """File line of the first flagged row (header is line 1)."""
    return int(np.flatnonzero(mask)[0]) + 2


def _read_table(path: Path, columns: Sequence[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise MissingColumnsError("file has no header", path=path, line=1) from None
    except pd.errors.ParserError as e:
        raise MalformedRowError(f"cannot parse file: {e}", path=path) from None
    except OSError as e:
        raise DataError(f"cannot read file: {e}", path=path) from None

    frame.columns = [str(c).strip().lower() for c in frame.columns]
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise MissingColumnsError(f"missing column(s): {', '.join(missing)}", path=path, line=1)
    if frame.empty:
        empty = pd.DataFrame({name: np.empty(0) for name in columns})
        return empty.astype({"timestamp": np.int64})
    frame = pd.DataFrame({name: frame[name].str.strip() for name in columns})

    numeric = pd.DataFrame({name: pd.to_numeric(frame[name], errors="coerce") for name in columns})
    bad = (~np.isfinite(numeric.to_numpy(dtype=float))).any(axis=1)
    stamps = numeric["timestamp"].to_numpy()
    with np.errstate(invalid="ignore"):
        bad |= np.floor(stamps) != stamps
    if bad.any():
        line = _first_line(bad)
        raise MalformedRowError(f"unparseable row {','.join(frame.iloc[line - 2])!r}", path=path, line=line)

    out = pd.DataFrame({"timestamp": numeric["timestamp"].astype(np.int64)})
    for name in columns[1:]:
        out[name] = frame[name].astype(float)

    steps = np.diff(out["timestamp"].to_numpy())
    if np.any(steps <= 0):
        raise NonMonotoneTimeError("timestamps must increase strictly", path=path,
                                   line=int(np.flatnonzero(steps <= 0)[0]) + 3)
    return out


def read_candles(path) -> pd.DataFrame:
    """
    Read and validate a `timestamp,open,high,low,close` file.
    @param path: CSV path
    @return: DataFrame with int64 timestamps and float prices
    """
    path = Path(path).expanduser()
    frame = _read_table(path, CANDLE_COLUMNS)
    o, h, l, c = (frame[name].to_numpy() for name in CANDLE_COLUMNS[1:])
    broken = (l > np.minimum(o, c)) | (h < np.maximum(o, c)) | (l > h)
    if broken.any():
        i = int(np.flatnonzero(broken)[0])
        try:
            CandleRecord(int(frame["timestamp"].iloc[i]), o[i], h[i], l[i], c[i])
        except ParameterError as e:
            raise MalformedRowError(str(e), path=path, line=i + 2) from None
    logger.info("Read %d candle(s) from %s", len(frame), path)
    return frame


def read_ticks(path) -> pd.DataFrame:
    path = Path(path).expanduser()
    frame = _read_table(path, TICK_COLUMNS)
    logger.info("Read %d tick(s) from %s", len(frame), path)
    return frame


def ingest(path, kind: str = CANDLES) -> list[WeekSession]:
    """
    Read a candle or tick file and segment it into trading weeks.
    @param path: CSV path
    @param kind: "candles" or "ticks"
    @return: WeekSessions in time order
    """
    if kind == CANDLES:
        frame = read_candles(path)
        return segment_sessions(frame["timestamp"], frame["open"], frame["high"], frame["low"], frame["close"])
    if kind == TICKS:
        frame = read_ticks(path)
        price = frame["price"]
        return segment_sessions(frame["timestamp"], price, price, price, price, kind=TICKS)
    raise ParameterError(f"unknown data kind {kind!r}")


def write_sessions(sessions: Sequence[WeekSession], path) -> None:
    """Write sessions back in the format they were read from."""
    kind = sessions[0].kind if sessions else CANDLES
    if any(s.kind != kind for s in sessions):
        raise ParameterError("cannot mix candle and tick sessions in one file")
    stamps = np.concatenate([s.timestamps for s in sessions]) if sessions else np.empty(0, dtype=np.int64)
    if kind == TICKS:
        frame = pd.DataFrame({"timestamp": stamps,
                              "price": np.concatenate([s.close for s in sessions]) if sessions else []})
    else:
        frame = pd.DataFrame({"timestamp": stamps})
        for name in CANDLE_COLUMNS[1:]:
            frame[name] = np.concatenate([getattr(s, name) for s in sessions]) if sessions else np.empty(0)
    frame.to_csv(Path(path).expanduser(), index=False, float_format=FLOAT_FORMAT)
