"""
Predicted versus realised behaviour of opened positions.

The number of profit calls over n weeks is a sum of independent Bernoulli
variables with week-specific probabilities, so its mean and variance follow
from the predicted probabilities alone.
"""
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from ..calibration.mle import CalibrationResult, validity_gate
from ..errors import ParameterError
from .engine import ExitReason, Side, StrategyParams, TradeOutcome
from .gating import predict

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PCFrequencyReport:
    """
    @param n: Positions compared
    @param actual_frequency: Share of positions closed by the profit call
    @param actual_variance: f (1 - f) of the realised indicators
    @param theoretical_mean: Mean predicted probability
    @param theoretical_variance: Sum of p (1 - p) divided by n
    @param variance_sum: Sum of p (1 - p), the variance of the profit-call count
    """

    n: int
    actual_frequency: float
    actual_variance: float
    theoretical_mean: float
    theoretical_variance: float
    variance_sum: float

    @property
    def std_error(self) -> float:
        """Standard deviation of the realised frequency under the model."""
        return math.sqrt(self.variance_sum) / self.n

    @property
    def z_score(self) -> float:
        if self.variance_sum == 0:
            return 0.0 if self.actual_frequency == self.theoretical_mean else math.inf
        return (self.actual_frequency - self.theoretical_mean) / self.std_error


def pc_frequency_report(weekly_pc_probs: Sequence[float], outcomes: Sequence[TradeOutcome],
                        side: Optional[Side] = None) -> PCFrequencyReport:
    """
    Compare predicted profit-call probabilities with realised exits.
    @param weekly_pc_probs: Predicted P(PC), aligned with outcomes
    @param outcomes: Trade outcomes; weeks without a position are ignored
    @param side: Restrict to one side
    @return: PCFrequencyReport
    """
    if len(weekly_pc_probs) != len(outcomes):
        raise ParameterError(f"{len(weekly_pc_probs)} probabilities for {len(outcomes)} outcomes")
    pairs = [(p, o) for p, o in zip(weekly_pc_probs, outcomes)
             if o.opened and (side is None or o.side is side)]
    if not pairs:
        raise ParameterError("no opened positions to report on")
    p = np.array([float(q) for q, _ in pairs])
    if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise ParameterError("probabilities must lie in [0, 1]")
    hits = np.array([o.exit_reason is ExitReason.PROFIT_CALL for _, o in pairs], dtype=float)
    n = p.size
    frequency = float(hits.sum() / n)
    variance_sum = float(np.sum(p * (1 - p)))
    return PCFrequencyReport(n=n, actual_frequency=frequency, actual_variance=frequency * (1 - frequency),
                             theoretical_mean=float(p.sum() / n), theoretical_variance=variance_sum / n,
                             variance_sum=variance_sum)


@dataclass(frozen=True)
class WeeklyPrediction:
    week_id: str
    side: Side
    open_level: float
    predicted_return: float
    pc_probability: float
    pnl_pips: float
    hit_pc: bool


def weekly_predictions(outcomes: Sequence[TradeOutcome], calibrations: Mapping[str, CalibrationResult],
                       sp: StrategyParams) -> list[WeeklyPrediction]:
    """Model prediction next to the realised result for every opened week with a usable calibration."""
    rows = []
    for outcome in outcomes:
        cal = calibrations.get(outcome.week_id)
        if not outcome.opened or cal is None or not validity_gate(cal):
            continue
        expected, probability = predict(cal, outcome.side, outcome.open_level, sp.ts_pips, sp.pc_pips)
        rows.append(WeeklyPrediction(outcome.week_id, outcome.side, outcome.open_level, expected, probability,
                                     outcome.pnl_pips, outcome.exit_reason is ExitReason.PROFIT_CALL))
    logger.info("Predicted %d of %d week(s)", len(rows), len(outcomes))
    return rows


def pc_frequency_table(reports: Mapping[str, PCFrequencyReport]) -> pd.DataFrame:
    """
    Actual profit-call frequency next to the theoretical one of each
    calibration scheme: rows mean and variance, columns actual then schemes.
    """
    if not reports:
        raise ParameterError("no reports to tabulate")
    first = next(iter(reports.values()))
    columns = {"actual": [first.actual_frequency, first.actual_variance]}
    for label, report in reports.items():
        if report.n != first.n or report.actual_frequency != first.actual_frequency:
            logger.warning("Scheme %s was evaluated on a different set of weeks", label)
        columns[label] = [report.theoretical_mean, report.theoretical_variance]
    return pd.DataFrame(columns, index=pd.Index(["mean", "variance"], name="statistic"))
