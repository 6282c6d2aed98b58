"""
Model-based filtering of weekly positions: a triggered position opens only if
the OU model calibrated on the history before the week predicts a positive
expected return and a large enough profit-call probability.
"""
import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from ..calibration.mle import CalibrationResult, validity_gate
from ..calibration.schemes import EstimationScheme, estimates_at
from ..calibration.series import HOURLY, series_from_sessions
from ..data.sessions import WeekSession
from ..errors import CalibrationError, ParameterError
from ..model.distribution import expected_weekly_return, mirror_short, pc_probability
from ..model.params import PIP, StoppedMaxProblem
from .engine import GateMode, Side, StrategyParams

logger = logging.getLogger(__name__)

DEFAULT_PC_FLOOR = 0.30
DEFAULT_DESIGN_FLOOR = 0.40


@dataclass(frozen=True)
class GateDecision:
    opens: bool
    expected_return: float
    pc_probability: float
    reason: str = ""


def position_problem(cal: CalibrationResult, side: Side, level: float, ts_pips: float) -> StoppedMaxProblem:
    """Stopped-maximum problem of a position opened at `level`, mirrored for shorts."""
    problem = StoppedMaxProblem(start=level, drawdown=ts_pips * PIP, ou=cal.params)
    return mirror_short(problem) if side is Side.SHORT else problem


def predict(cal: CalibrationResult, side: Side, level: float, ts_pips: float, pc_pips: float) -> tuple[float, float]:
    """Predicted (expected return in pips, P(PC)) of a position."""
    problem = position_problem(cal, side, level, ts_pips)
    return expected_weekly_return(problem, ts_pips, pc_pips), pc_probability(problem, pc_pips * PIP)


def gate_week(cal: Optional[CalibrationResult], side: Side, level: float, sp: StrategyParams,
              pc_floor: float = DEFAULT_PC_FLOOR) -> GateDecision:
    """
    Decide whether a triggered position may open.
    @param cal: Calibration known at the week start
    @param side: Side of the candidate position
    @param level: Opening level of the candidate
    @param sp: Strategy parameters (TS and PC are used)
    @param pc_floor: Smallest acceptable profit-call probability
    @return: GateDecision, opens=False when the model is rejected or predicts a loss
    """
    if side is Side.NONE:
        raise ParameterError("no position to gate")
    if cal is None or not validity_gate(cal):
        return GateDecision(False, float("nan"), float("nan"), "invalid_model")
    expected, probability = predict(cal, side, level, sp.ts_pips, sp.pc_pips)
    if not expected > 0:
        return GateDecision(False, expected, probability, "negative_expectation")
    if probability < pc_floor:
        return GateDecision(False, expected, probability, "low_pc_probability")
    return GateDecision(True, expected, probability)


@dataclass(frozen=True)
class CalibrationGate:
    """
    Gate backed by per-week calibrations. Weeks without a calibration (not
    enough history yet) are traded ungated.
    """

    calibrations: Mapping[str, CalibrationResult]
    mode: GateMode = GateMode.SKIP
    pc_floor: float = DEFAULT_PC_FLOOR

    def allows(self, session: WeekSession, side: Side, level: float, sp: StrategyParams) -> bool:
        cal = self.calibrations.get(session.week_id)
        if cal is None:
            return True
        decision = gate_week(cal, side, level, sp, self.pc_floor)
        if not decision.opens:
            logger.info("Week %s: %s at %.5f gated (%s)", session.week_id, side.value, level, decision.reason)
        return decision.opens


def weekly_calibrations(weeks: Sequence[WeekSession], scheme: EstimationScheme = EstimationScheme(),
                        sampling: str = HOURLY) -> dict[str, CalibrationResult]:
    """
    Calibration available at the start of every week, from samples strictly before it.
    @return: Mapping week_id -> CalibrationResult; weeks with too little history are absent
    """
    populated = [w for w in weeks if len(w)]
    try:
        series = series_from_sessions(populated, sampling)
    except CalibrationError as e:
        logger.warning("No weekly calibrations: %s", e)
        return {}
    starts = np.array([w.start_time for w in populated], dtype=np.int64)
    ends = np.searchsorted(series.timestamps, starts, side="right")
    feasible = ends >= scheme.window_samples(series.delta)
    estimates = estimates_at(series, ends[feasible], scheme)
    ids = [w.week_id for w, ok in zip(populated, feasible) if ok]
    return {week_id: est.result for week_id, est in zip(ids, estimates)}


@dataclass(frozen=True)
class DesignChoice:
    side: Side
    level: float
    ts_pips: int
    pc_pips: int
    expected_return: float
    pc_probability: float


def design_week(cal: CalibrationResult, zero_level: float, u_pips: int, d_pips: int,
                ts_candidates: Sequence[int], pc_offsets: Sequence[int],
                min_pc_probability: float = DEFAULT_DESIGN_FLOOR) -> list[DesignChoice]:
    """
    Pick TS and PC per side from the calibrated model: the largest predicted
    expected return among candidates whose P(PC) reaches the floor.
    @param cal: Valid calibration
    @param zero_level: Week zero level
    @param ts_candidates: Trailing stops to try
    @param pc_offsets: Profit calls to try, as offsets over TS
    @return: Up to one choice per side (long first); a side is absent when no candidate qualifies
    """
    if not validity_gate(cal):
        raise ParameterError("cannot design a week from a rejected calibration")
    choices = []
    for side, level in ((Side.LONG, zero_level - d_pips * PIP), (Side.SHORT, zero_level + u_pips * PIP)):
        best = None
        for ts in sorted(set(ts_candidates)):
            for offset in sorted(set(pc_offsets)):
                pc = ts + offset
                if pc <= 0:
                    continue
                expected, probability = predict(cal, side, level, ts, pc)
                if probability < min_pc_probability:
                    continue
                if best is None or expected > best.expected_return:
                    best = DesignChoice(side, level, int(ts), int(pc), expected, probability)
        if best is not None:
            choices.append(best)
    return choices
