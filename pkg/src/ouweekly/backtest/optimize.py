"""
Exhaustive grid search over (U, D, TS, PC) and walk-forward evaluation.

For each week the currency P&L of every grid point is tabulated at once: entry
times per trigger level come from running extremes, and every distinct entry
is pushed through the same exit routine `run_week` uses, so grid totals agree
with single backtests to the last bit.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..data.sessions import WeekSession
from ..errors import ParameterError
from ..model.params import PIP
from .engine import (CostModel, ExitPriority, Side, StrategyParams, TradeOutcome, exit_samples, exit_table,
                     nights_between, run_backtest)

logger = logging.getLogger(__name__)

PERIOD_WEEKS = 52
BATCH_PER_WORKER = 4


def parse_range(text: str, name: str) -> tuple[int, ...]:
    parts = text.split(":")
    try:
        numbers = [int(p) for p in parts]
    except ValueError:
        raise ParameterError(f"invalid range for {name}: {text!r}") from None
    if len(numbers) == 1:
        return (numbers[0],)
    if len(numbers) not in (2, 3) or (len(numbers) == 3 and numbers[2] <= 0):
        raise ParameterError(f"range for {name} must be lo:hi or lo:hi:step, got {text!r}")
    lo, hi = numbers[0], numbers[1]
    step = numbers[2] if len(numbers) == 3 else 1
    return tuple(range(lo, hi + 1, step))


@dataclass(frozen=True)
class ParameterGrid:
    """
    Candidate values; the profit call is TS plus one of `pc_offsets`.
    Values are kept sorted and unique so enumeration order never matters.
    """

    u: tuple[int, ...] = tuple(range(10, 61))
    d: tuple[int, ...] = tuple(range(10, 61))
    ts: tuple[int, ...] = tuple(range(40, 71))
    pc_offsets: tuple[int, ...] = tuple(range(0, 16))

    def __post_init__(self):
        for name in ("u", "d", "ts", "pc_offsets"):
            values = tuple(sorted(set(int(v) for v in getattr(self, name))))
            if not values:
                raise ParameterError(f"grid axis {name} is empty")
            object.__setattr__(self, name, values)
        if min(self.u + self.d + self.ts) <= 0:
            raise ParameterError("U, D and TS must be positive")
        # constructing the extreme points validates the PC range
        StrategyParams(1, 1, self.ts[0], self.ts[0] + self.pc_offsets[0])
        StrategyParams(1, 1, self.ts[-1], self.ts[-1] + self.pc_offsets[-1])

    @classmethod
    def parse(cls, text: str) -> "ParameterGrid":
        """Parse 'u=10:60,d=10:60,ts=40:70,pc=0:15'; missing axes keep their defaults."""
        keys = {"u": "u", "d": "d", "ts": "ts", "pc": "pc_offsets"}
        values = {}
        for item in filter(None, (p.strip() for p in text.split(","))):
            name, sep, axis_range = item.partition("=")
            if not sep or name.strip().lower() not in keys:
                raise ParameterError(f"invalid grid item {item!r}")
            values[keys[name.strip().lower()]] = parse_range(axis_range.strip(), name)
        return cls(**values)

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return len(self.u), len(self.d), len(self.ts), len(self.pc_offsets)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def params_at(self, index) -> StrategyParams:
        i, j, k, m = (int(x) for x in index)
        return StrategyParams(self.u[i], self.d[j], self.ts[k], self.ts[k] + self.pc_offsets[m])

    def points(self):
        for index in np.ndindex(*self.shape):
            yield self.params_at(index)


def _entry_tables(session: WeekSession, side: Side, levels: np.ndarray, first: np.ndarray,
                  ts_pairs: np.ndarray, pc_pairs: np.ndarray, cm: CostModel, priority: ExitPriority) -> np.ndarray:
    """Currency P&L per (level, TS, PC offset) for positions opened at each level."""
    n = len(session)
    out = np.zeros((levels.size,) + ts_pairs.shape)
    for i, (level, entry) in enumerate(zip(levels, first)):
        if entry >= n:
            continue
        level = float(level)
        entry = int(entry)
        o = level if side is Side.LONG else -level
        fav, adv, opens, final_close, start = exit_samples(session, side, entry, o)
        table = exit_table(fav, adv, opens, final_close, o, ts_pairs, pc_pairs, priority)
        exit_index = np.where(table.index >= 0, start + table.index, n - 1)
        nights = nights_between(session.timestamps[entry], session.timestamps[exit_index])
        out[i] = table.pnl_pips * cm.pip_value(level) - cm.commission(nights)
    return out


def week_table(session: WeekSession, grid: ParameterGrid, cm: CostModel = CostModel(),
               priority: ExitPriority = ExitPriority.PC_FIRST) -> np.ndarray:
    """
    Currency P&L of one week for every grid point.
    @return: Array shaped grid.shape
    """
    out = np.zeros(grid.shape)
    n = len(session)
    if n == 0:
        return out
    zero = session.zero_level
    ups = zero + np.asarray(grid.u) * PIP
    downs = zero - np.asarray(grid.d) * PIP
    first_short = np.searchsorted(np.maximum.accumulate(session.high), ups, side="left")
    first_long = np.searchsorted(np.maximum.accumulate(-session.low), -downs, side="left")

    ts = np.asarray(grid.ts, dtype=float)
    ts_pairs = np.broadcast_to(ts[:, None], grid.shape[2:])
    pc_pairs = ts[:, None] + np.asarray(grid.pc_offsets, dtype=float)[None, :]
    short = _entry_tables(session, Side.SHORT, ups, first_short, ts_pairs, pc_pairs, cm, priority)
    long = _entry_tables(session, Side.LONG, downs, first_long, ts_pairs, pc_pairs, cm, priority)

    s = first_short[:, None]
    l = first_long[None, :]
    tie = (s == l) & (s < n)
    opening = session.open[np.minimum(s, n - 1)]
    long_wins_tie = (opening - downs[None, :]) < (ups[:, None] - opening)
    is_short = (s < l) | (tie & ~long_wins_tie)
    is_long = (l < s) | (tie & long_wins_tie)
    return np.where(is_short[:, :, None, None], short[:, None],
                    np.where(is_long[:, :, None, None], long[None, :], out))


def _period_bounds(n_weeks: int, period_weeks: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + period_weeks, n_weeks)) for lo in range(0, n_weeks, period_weeks)]


def period_totals(weeks: Sequence[WeekSession], grid: ParameterGrid, cm: CostModel = CostModel(),
                  priority: ExitPriority = ExitPriority.PC_FIRST, period_weeks: Optional[int] = None,
                  workers: int = 1) -> np.ndarray:
    """
    Grid P&L summed per period of `period_weeks` consecutive weeks (one
    period when None). Weeks are added in order whatever the worker count.
    @return: Array (periods,) + grid.shape
    """
    bounds = _period_bounds(len(weeks), period_weeks or max(len(weeks), 1))
    totals = np.zeros((len(bounds),) + grid.shape)
    period_of = np.concatenate([np.full(hi - lo, k) for k, (lo, hi) in enumerate(bounds)]) if bounds else []

    def accumulate(tables, offset):
        for i, table in enumerate(tables):
            totals[period_of[offset + i]] += table

    if workers > 1:
        batch = workers * BATCH_PER_WORKER
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for lo in range(0, len(weeks), batch):
                chunk = weeks[lo:lo + batch]
                accumulate(pool.map(lambda w: week_table(w, grid, cm, priority), chunk), lo)
    else:
        accumulate((week_table(w, grid, cm, priority) for w in weeks), 0)
    return totals


@dataclass(frozen=True, eq=False)
class GridEvaluation:
    grid: ParameterGrid
    totals: np.ndarray
    n_weeks: int

    def means(self) -> np.ndarray:
        return self.totals / self.n_weeks


def evaluate_grid(weeks: Sequence[WeekSession], grid: ParameterGrid, cm: CostModel = CostModel(),
                  priority: ExitPriority = ExitPriority.PC_FIRST, workers: int = 1) -> GridEvaluation:
    if not weeks:
        raise ParameterError("cannot evaluate a grid on zero weeks")
    totals = period_totals(weeks, grid, cm, priority, None, workers)[0]
    return GridEvaluation(grid, totals, len(weeks))


def select_best(evaluation: GridEvaluation) -> tuple[StrategyParams, float]:
    """
    Grid point with the largest mean weekly return. Ties go to the smaller TS,
    then the smaller U + D, then the lexicographically smaller (U, D, TS, PC).
    """
    means = evaluation.means()
    top = np.max(means)
    candidates = [evaluation.grid.params_at(index) for index in np.argwhere(means == top)]
    best = min(candidates, key=lambda p: (p.ts_pips, p.u_pips + p.d_pips) + p.as_tuple())
    return best, float(top)


def optimize_grid(weeks: Sequence[WeekSession], grid: ParameterGrid, cm: CostModel = CostModel(),
                  priority: ExitPriority = ExitPriority.PC_FIRST, workers: int = 1) -> tuple[StrategyParams, float]:
    """
    Parameters maximising the mean weekly return over `weeks`.
    @return: (best parameters, their mean weekly return in account currency)
    """
    best, mean = select_best(evaluate_grid(weeks, grid, cm, priority, workers))
    logger.info("Best of %d grid point(s) over %d week(s): %s, mean %.4f", grid.size, len(weeks), best.label(), mean)
    return best, mean


@dataclass(frozen=True, eq=False)
class WalkForwardRow:
    """Parameters fitted up to `estimate_period` and traded in `applied_period`."""

    estimate_period: str
    applied_period: str
    params: StrategyParams
    estimated_mean: float
    actual_mean: float
    outcomes: list[TradeOutcome] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class WalkForwardReport:
    lookback_periods: Optional[int]
    period_weeks: int
    rows: list[WalkForwardRow]

    @property
    def scheme(self) -> str:
        return "expanding" if self.lookback_periods is None else f"lookback:{self.lookback_periods}"

    def cumulative(self) -> np.ndarray:
        """Running P&L over all out-of-sample weeks."""
        return np.cumsum([o.pnl_currency for row in self.rows for o in row.outcomes], dtype=float)


def walk_forward(weeks: Sequence[WeekSession], lookback_periods: Optional[int], cm: CostModel = CostModel(),
                 grid: ParameterGrid = ParameterGrid(), period_weeks: int = PERIOD_WEEKS,
                 priority: ExitPriority = ExitPriority.PC_FIRST, workers: int = 1,
                 require_full_lookback: bool = True, totals: Optional[np.ndarray] = None) -> WalkForwardReport:
    """
    Fit on trailing periods, trade the next one.
    @param weeks: Weeks in time order
    @param lookback_periods: Periods used for each fit, None for all history
    @param require_full_lookback: Skip fits that would see fewer than `lookback_periods` periods
    @param totals: Precomputed `period_totals` for the same weeks, grid and period length
    @return: WalkForwardReport, one row per feasible period
    """
    if lookback_periods is not None and lookback_periods < 1:
        raise ParameterError(f"lookback must be at least one period, got {lookback_periods}")
    if period_weeks < 1:
        raise ParameterError(f"period must hold at least one week, got {period_weeks}")
    bounds = _period_bounds(len(weeks), period_weeks)
    if len(bounds) < 2:
        logger.warning("Walk-forward needs at least two periods, got %d", len(bounds))
        return WalkForwardReport(lookback_periods, period_weeks, [])

    if totals is None:
        totals = period_totals(weeks, grid, cm, priority, period_weeks, workers)
    elif totals.shape != (len(bounds),) + grid.shape:
        raise ParameterError(f"period totals of shape {totals.shape} do not match {len(bounds)} period(s) of this grid")
    counts = np.array([hi - lo for lo, hi in bounds])
    labels = [weeks[lo].week_id for lo, _ in bounds]
    rows = []
    for k in range(len(bounds) - 1):
        first = 0 if lookback_periods is None else k - lookback_periods + 1
        if first < 0:
            if require_full_lookback:
                continue
            first = 0
        evaluation = GridEvaluation(grid, totals[first:k + 1].sum(axis=0), int(counts[first:k + 1].sum()))
        params, estimated = select_best(evaluation)
        lo, hi = bounds[k + 1]
        result = run_backtest(weeks[lo:hi], params, cm, priority)
        rows.append(WalkForwardRow(labels[k], labels[k + 1], params, estimated, result.mean_weekly_return,
                                   result.outcomes))
    if not rows:
        logger.warning("Not enough history for a %d-period lookback", lookback_periods)
    return WalkForwardReport(lookback_periods, period_weeks, rows)
