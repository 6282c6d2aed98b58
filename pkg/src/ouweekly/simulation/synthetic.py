"""
Synthetic trading weeks driven by an OU process whose parameters may change
from week to week. One trading week is one unit of model time.
"""
import logging
from typing import Callable, Sequence, Union

import numpy as np

from ..data.sessions import CANDLES, TICKS, TRADING_SECONDS, WeekSession, week_label, week_start
from ..errors import ParameterError
from ..model.params import OUParams
from .paths import ou_path

logger = logging.getLogger(__name__)

# week of Sunday 2012-01-01 21:00 UTC
DEFAULT_FIRST_WEEK = 2191

Schedule = Union[OUParams, Sequence[OUParams], Callable[[int, float], OUParams]]


def _params_for(schedule: Schedule, week: int, level: float) -> OUParams:
    if isinstance(schedule, OUParams):
        return schedule
    if callable(schedule):
        return schedule(week, level)
    return schedule[week]


def simulate_sessions(n_weeks: int, schedule: Schedule, x0: float, seed: int = 0, kind: str = TICKS,
                      sample_seconds: int = 3600, substeps: int = 12,
                      first_week: int = DEFAULT_FIRST_WEEK) -> list[WeekSession]:
    """
    Generate consecutive weeks. The price carries over the weekend unchanged.
    @param n_weeks: Number of weeks
    @param schedule: OUParams, one per week, or a callable (week number, level at week start) -> OUParams
    @param x0: Price at the first week start
    @param seed: Root seed; week w uses the w-th child stream
    @param kind: "ticks" (one price per sample) or "candles" (OHLC from `substeps` sub-steps)
    @param sample_seconds: Spacing of samples; must divide the trading week
    @param substeps: Sub-steps per candle
    @param first_week: Week index of the first week
    @return: WeekSessions in time order
    """
    if n_weeks < 0:
        raise ParameterError(f"n_weeks must be nonnegative, got {n_weeks}")
    if sample_seconds <= 0 or TRADING_SECONDS % sample_seconds:
        raise ParameterError(f"sample spacing must divide the trading week, got {sample_seconds}s")
    if kind not in (TICKS, CANDLES) or substeps < 1:
        raise ParameterError(f"unsupported session layout {kind!r} with {substeps} sub-steps")
    if not isinstance(schedule, OUParams) and not callable(schedule) and len(schedule) < n_weeks:
        raise ParameterError(f"schedule covers {len(schedule)} of {n_weeks} weeks")

    per_week = TRADING_SECONDS // sample_seconds
    fine = per_week * (substeps if kind == CANDLES else 1)
    dt = 1.0 / fine
    seeds = np.random.SeedSequence(seed).spawn(n_weeks)
    offsets = np.arange(per_week, dtype=np.int64) * sample_seconds
    level = float(x0)
    sessions = []
    for w in range(n_weeks):
        index = first_week + w
        ou = _params_for(schedule, w, level)
        path = ou_path(level, ou, dt, fine, np.random.default_rng(seeds[w]))
        stamps = week_start(index) + offsets
        if kind == TICKS:
            sessions.append(WeekSession.from_ticks(week_label(index), stamps, path[1:]))
        else:
            blocks = path[1:].reshape(per_week, substeps)
            opens = path[:-1:substeps]
            high = np.maximum(opens, blocks.max(axis=1))
            low = np.minimum(opens, blocks.min(axis=1))
            sessions.append(WeekSession(week_label(index), float(opens[0]), stamps, opens, high, low,
                                        blocks[:, -1]))
        level = float(path[-1])
    logger.info("Simulated %d %s week(s) from seed %d", n_weeks, kind, seed)
    return sessions
