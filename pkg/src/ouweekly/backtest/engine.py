"""
Weekly U/D/TS/PC strategy.

At most one position per week: short when the price first rises U pips above
the zero level, long when it first drops D pips below it. Once open the
position is closed by a trailing stop TS pips behind the best price seen, by a
profit call PC pips from the opening level, or at the end of the week.

On candles the rest of the entry candle counts: its adverse extreme lies past
the trigger, so a stop can fire inside the candle that opened the position.
Ticks are checked from the next sample on.

Short positions are evaluated on mirrored prices (every price negated, high
and low swapped) so both sides share one exit routine.
"""
import logging
import math
import operator
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Protocol, Sequence

import numpy as np

from ..data.sessions import CANDLES, DAY_SECONDS, WeekSession
from ..errors import ParameterError
from ..model.params import PIP

logger = logging.getLogger(__name__)

MAX_THRESHOLD_PIPS = 500

# internal exit codes of the exit table
_CLOSE, _STOP, _PC = 0, 1, 2


class Side(str, Enum):
    LONG = "long"
    SHORT = "short"
    NONE = "none"

    def opposite(self) -> "Side":
        return {Side.LONG: Side.SHORT, Side.SHORT: Side.LONG}.get(self, Side.NONE)


class ExitReason(str, Enum):
    TRAILING_STOP = "trailing_stop"
    PROFIT_CALL = "profit_call"
    WEEK_CLOSE = "week_close"
    NOT_OPENED = "not_opened"


class ExitPriority(str, Enum):
    """Which exit wins when one sample touches both the profit call and the stop."""

    PC_FIRST = "pc_first"
    TS_FIRST = "ts_first"
    NEAREST_OPEN = "nearest_open"


class GateMode(str, Enum):
    SKIP = "skip"
    OPPOSITE = "opposite"


_REASONS = {_CLOSE: ExitReason.WEEK_CLOSE, _STOP: ExitReason.TRAILING_STOP, _PC: ExitReason.PROFIT_CALL}


def _pips(value, name: str) -> int:
    try:
        pips = operator.index(value)
    except TypeError:
        raise ParameterError(f"{name} must be an integer number of pips, got {value!r}") from None
    if pips <= 0:
        raise ParameterError(f"{name} must be positive, got {pips}")
    return int(pips)


@dataclass(frozen=True)
class StrategyParams:
    u_pips: int
    d_pips: int
    ts_pips: int
    pc_pips: int

    def __post_init__(self):
        for name in ("u_pips", "d_pips", "ts_pips", "pc_pips"):
            object.__setattr__(self, name, _pips(getattr(self, name), name))
        for name in ("ts_pips", "pc_pips"):
            if getattr(self, name) > MAX_THRESHOLD_PIPS:
                raise ParameterError(f"{name} must not exceed {MAX_THRESHOLD_PIPS}, got {getattr(self, name)}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return self.u_pips, self.d_pips, self.ts_pips, self.pc_pips

    def label(self) -> str:
        return "({}, {}, {}, {})".format(*self.as_tuple())

    def swapped(self) -> "StrategyParams":
        return StrategyParams(self.d_pips, self.u_pips, self.ts_pips, self.pc_pips)


@dataclass(frozen=True)
class CostModel:
    """
    Margin-FX costs. One pip is worth notional * leverage * 1e-4 / open_level
    (rounded to 1e-6); every night the position is held costs
    notional * overnight_commission_rate.
    """

    position_notional: float = 1000.0
    leverage: float = 200.0
    overnight_commission_rate: float = 0.0014

    def __post_init__(self):
        for name in ("position_notional", "leverage", "overnight_commission_rate"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be positive, got {value}")

    def pip_value(self, open_level: float) -> float:
        return float(np.round(self.position_notional * self.leverage * PIP / abs(open_level), 6))

    def commission(self, nights):
        return self.position_notional * self.overnight_commission_rate * nights


def nights_between(open_time, exit_time):
    """UTC date boundaries crossed between the two timestamps."""
    return exit_time // DAY_SECONDS - open_time // DAY_SECONDS


@dataclass(frozen=True)
class TradeOutcome:
    week_id: str
    side: Side
    open_level: float
    exit_reason: ExitReason
    pnl_pips: float
    pnl_currency: float
    nights_held: int
    exit_level: float = math.nan
    open_time: Optional[int] = None
    exit_time: Optional[int] = None
    gated: bool = False

    @property
    def opened(self) -> bool:
        return self.side is not Side.NONE

    @classmethod
    def not_opened(cls, week_id: str, gated: bool = False) -> "TradeOutcome":
        return cls(week_id, Side.NONE, math.nan, ExitReason.NOT_OPENED, 0.0, 0.0, 0, gated=gated)


@dataclass(frozen=True, eq=False)
class ExitTable:
    """
    Exit of one opened position for several (TS, PC) pairs, in oriented prices
    (favourable direction is up).
    """

    reason: np.ndarray
    index: np.ndarray
    pnl_pips: np.ndarray
    level: np.ndarray


def oriented(session: WeekSession, side: Side) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(favourable extreme, adverse extreme, open, close) per sample, mirrored for shorts."""
    if side is Side.LONG:
        return session.high, session.low, session.open, session.close
    return -session.low, -session.high, -session.open, -session.close


def exit_samples(session: WeekSession, side: Side, entry: int,
                 o: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, float, int]:
    """
    Oriented samples the exits are checked on once a position opened at `entry`.
    For candles the entry candle leads, reduced to what surely happened after
    the trigger: the move to its adverse extreme, with the best price still at
    the opening level.
    @return: (fav, adv, opens, final close, sample index of the first row)
    """
    fav, adv, opens, closes = oriented(session, side)
    after = slice(entry + 1, None)
    if session.kind != CANDLES:
        return fav[after], adv[after], opens[after], float(closes[-1]), entry + 1
    head = np.array([o])
    return (np.concatenate((head, fav[after])), np.concatenate((adv[entry:entry + 1], adv[after])),
            np.concatenate((head, opens[after])), float(closes[-1]), entry)


def exit_table(fav: np.ndarray, adv: np.ndarray, opens: np.ndarray, final_close: float, o: float,
               ts_pips, pc_pips, priority: ExitPriority) -> ExitTable:
    """
    Evaluate the exit rules on the samples following the entry.
    @param fav: Favourable extremes after the entry
    @param adv: Adverse extremes after the entry
    @param opens: Sample opens after the entry
    @param final_close: Last close of the week
    @param o: Oriented opening level
    @param ts_pips: Trailing stops, array of pairs
    @param pc_pips: Profit calls, same shape as ts_pips
    @param priority: Rule for samples touching both levels
    @return: ExitTable shaped like the (TS, PC) pairs; index -1 means week close
    """
    ts_pips, pc_pips = np.broadcast_arrays(np.asarray(ts_pips, dtype=float), np.asarray(pc_pips, dtype=float))
    n = fav.size
    close_pnl = (final_close - o) / PIP
    if n == 0:
        shape = ts_pips.shape
        return ExitTable(np.full(shape, _CLOSE), np.full(shape, -1), np.full(shape, close_pnl),
                         np.full(shape, final_close))

    best = np.maximum.accumulate(np.maximum(fav, o))
    ts_values, ts_at = np.unique(ts_pips, return_inverse=True)
    pc_values, pc_at = np.unique(pc_pips, return_inverse=True)
    stop_hit = adv[None, :] <= best[None, :] - ts_values[:, None] * PIP
    pc_hit = fav[None, :] >= (o + pc_values * PIP)[:, None]
    first_stop = np.where(stop_hit.any(axis=1), stop_hit.argmax(axis=1), n)[ts_at.reshape(ts_pips.shape)]
    first_pc = np.where(pc_hit.any(axis=1), pc_hit.argmax(axis=1), n)[pc_at.reshape(pc_pips.shape)]

    take_pc = first_pc < first_stop
    take_stop = first_stop < first_pc
    both = (first_pc == first_stop) & (first_pc < n)
    stop_index = np.minimum(first_stop, n - 1)
    stop_level = best[stop_index] - ts_pips * PIP
    pc_level = o + pc_pips * PIP
    if priority is ExitPriority.PC_FIRST:
        take_pc |= both
    elif priority is ExitPriority.TS_FIRST:
        take_stop |= both
    else:
        opening = opens[stop_index]
        nearer_pc = (pc_level - opening) < (opening - stop_level)
        take_pc |= both & nearer_pc
        take_stop |= both & ~nearer_pc

    reason = np.where(take_pc, _PC, np.where(take_stop, _STOP, _CLOSE))
    index = np.where(take_pc, first_pc, np.where(take_stop, first_stop, -1))
    pnl = np.where(take_pc, pc_pips, np.where(take_stop, (best[stop_index] - o) / PIP - ts_pips, close_pnl))
    level = np.where(take_pc, pc_level, np.where(take_stop, stop_level, final_close))
    return ExitTable(reason, index, pnl, level)


def resolve_entry(open_price: float, up: float, down: float) -> Side:
    """Both triggers inside one sample: the level nearer the sample open wins, ties go short."""
    return Side.LONG if (open_price - down) < (up - open_price) else Side.SHORT


def find_entry(session: WeekSession, sp: StrategyParams, allowed: Optional[Side] = None) -> tuple[Side, int, float]:
    """
    First trigger of the week.
    @param allowed: Restrict entries to one side, None allows both
    @return: (side, sample index, opening level); Side.NONE with index -1 if nothing triggers
    """
    zero = session.zero_level
    up = zero + sp.u_pips * PIP
    down = zero - sp.d_pips * PIP
    short_hits = np.flatnonzero(session.high >= up) if allowed is not Side.LONG else np.empty(0, dtype=int)
    long_hits = np.flatnonzero(session.low <= down) if allowed is not Side.SHORT else np.empty(0, dtype=int)
    first_short = int(short_hits[0]) if short_hits.size else len(session)
    first_long = int(long_hits[0]) if long_hits.size else len(session)
    if first_short == first_long == len(session):
        return Side.NONE, -1, math.nan
    if first_short < first_long:
        return Side.SHORT, first_short, up
    if first_long < first_short:
        return Side.LONG, first_long, down
    side = resolve_entry(float(session.open[first_short]), up, down)
    return side, first_short, up if side is Side.SHORT else down


def settle(session: WeekSession, side: Side, entry: int, first: int, level: float, table: ExitTable, k,
           cm: CostModel, gated: bool = False) -> TradeOutcome:
    """Turn entry `k` of an exit table whose rows start at sample `first` into a TradeOutcome with costs."""
    code = int(table.reason[k])
    offset = int(table.index[k])
    exit_index = first + offset if offset >= 0 else len(session) - 1
    exit_level = float(table.level[k])
    if side is Side.SHORT:
        exit_level = -exit_level
    open_time = int(session.timestamps[entry])
    exit_time = int(session.timestamps[exit_index])
    nights = int(nights_between(open_time, exit_time))
    pnl_pips = float(table.pnl_pips[k])
    pnl_currency = pnl_pips * cm.pip_value(level) - cm.commission(nights)
    return TradeOutcome(session.week_id, side, level, _REASONS[code], pnl_pips, float(pnl_currency), nights,
                        exit_level=exit_level, open_time=open_time, exit_time=exit_time, gated=gated)


def open_position(session: WeekSession, sp: StrategyParams, cm: CostModel, side: Side, entry: int,
                  level: float, priority: ExitPriority, gated: bool = False) -> TradeOutcome:
    o = level if side is Side.LONG else -level
    fav, adv, opens, final_close, first = exit_samples(session, side, entry, o)
    table = exit_table(fav, adv, opens, final_close, o, np.array([sp.ts_pips]), np.array([sp.pc_pips]), priority)
    return settle(session, side, entry, first, level, table, 0, cm, gated=gated)


def run_week(session: WeekSession, sp: StrategyParams, cm: CostModel = CostModel(),
             priority: ExitPriority = ExitPriority.PC_FIRST, allowed: Optional[Side] = None) -> TradeOutcome:
    """
    Trade one week. Entries fill at the trigger level; exits are checked from
    the sample after the entry on, for candles from the entry candle on.
    @param session: Week of samples
    @param sp: Strategy parameters
    @param cm: Cost model
    @param priority: Exit rule when PC and TS are touched by the same sample
    @param allowed: Only open positions on this side
    @return: TradeOutcome
    """
    if len(session) == 0:
        return TradeOutcome.not_opened(session.week_id)
    side, entry, level = find_entry(session, sp, allowed)
    if side is Side.NONE:
        return TradeOutcome.not_opened(session.week_id)
    return open_position(session, sp, cm, side, entry, level, priority)


class WeekGate(Protocol):
    mode: GateMode

    def allows(self, session: WeekSession, side: Side, level: float, sp: StrategyParams) -> bool:
        ...


@dataclass(frozen=True, eq=False)
class BacktestResult:
    outcomes: list[TradeOutcome]
    cumulative: np.ndarray

    @property
    def total(self) -> float:
        return float(self.cumulative[-1]) if self.cumulative.size else 0.0

    @property
    def mean_weekly_return(self) -> float:
        """Mean over all weeks, weeks without a position count as zero."""
        return self.total / len(self.outcomes) if self.outcomes else 0.0


def _gated_week(session: WeekSession, sp: StrategyParams, cm: CostModel, priority: ExitPriority,
                gate: WeekGate) -> TradeOutcome:
    if len(session) == 0:
        return TradeOutcome.not_opened(session.week_id)
    side, entry, level = find_entry(session, sp)
    if side is Side.NONE:
        return TradeOutcome.not_opened(session.week_id)
    if gate.allows(session, side, level, sp):
        return open_position(session, sp, cm, side, entry, level, priority)
    if gate.mode is GateMode.OPPOSITE:
        other, entry, level = find_entry(session, sp, allowed=side.opposite())
        if other is not Side.NONE and gate.allows(session, other, level, sp):
            return open_position(session, sp, cm, other, entry, level, priority, gated=True)
    return TradeOutcome.not_opened(session.week_id, gated=True)


def run_backtest(weeks: Sequence[WeekSession], sp: StrategyParams, cm: CostModel = CostModel(),
                 priority: ExitPriority = ExitPriority.PC_FIRST, gate: Optional[WeekGate] = None) -> BacktestResult:
    """
    Trade every week in order.
    @param gate: Optional filter deciding whether a triggered position may open
    @return: BacktestResult with the running sum of pnl_currency
    """
    if gate is None:
        outcomes = [run_week(week, sp, cm, priority) for week in weeks]
    else:
        outcomes = [_gated_week(week, sp, cm, priority, gate) for week in weeks]
    cumulative = np.cumsum([o.pnl_currency for o in outcomes], dtype=float)
    opened = sum(o.opened for o in outcomes)
    logger.info("Backtest %s: %d week(s), %d position(s), total %.2f", sp.label(), len(outcomes), opened,
                cumulative[-1] if cumulative.size else 0.0)
    return BacktestResult(outcomes, cumulative)
