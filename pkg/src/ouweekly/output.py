"""
Plot-ready tables for every command. Each command yields one flat DataFrame,
written as CSV (17 significant digits) or as JSON records.
"""
import json
import math
import sys
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .backtest.engine import TradeOutcome
from .backtest.gating import DesignChoice
from .backtest.optimize import WalkForwardReport
from .backtest.reports import WeeklyPrediction
from .calibration.schemes import Estimate
from .errors import OutputError, ParameterError
from .model.params import ReturnDistribution
from .simulation.montecarlo import MonteCarloResult

FLOAT_FORMAT = "%.17g"


def distribution_frame(dist: ReturnDistribution, expected_return: float, kappa: float) -> pd.DataFrame:
    """Density rows, the profit-call atom and summary rows in one (kind, y_pips, value) table."""
    rows = [("density", float(y), float(f)) for y, f in zip(dist.grid, dist.density)]
    rows.append(("pc_atom", dist.pc_pips, dist.pc_atom))
    rows.append(("pc_probability", dist.pc_pips, dist.pc_atom))
    rows.append(("expected_return", math.nan, expected_return))
    rows.append(("kappa", math.nan, kappa))
    return pd.DataFrame(rows, columns=["kind", "y_pips", "value"])


def calibration_frame(estimates: Sequence[Estimate]) -> pd.DataFrame:
    return pd.DataFrame({
        "index": [e.index for e in estimates],
        "time": [e.timestamp for e in estimates],
        "theta": [e.result.theta for e in estimates],
        "lam": [e.result.lam for e in estimates],
        "sigma": [e.result.sigma for e in estimates],
        "kappa": [e.result.kappa for e in estimates],
        "valid": [e.result.valid for e in estimates],
        "n_obs": [e.result.n_obs for e in estimates],
    })


def histogram_frame(result: MonteCarloResult, bins: int) -> pd.DataFrame:
    if result.samples.size == 0:
        return pd.DataFrame(columns=["bin_left", "bin_right", "count", "density"])
    counts, edges = np.histogram(result.samples, bins=bins)
    widths = np.diff(edges)
    return pd.DataFrame({
        "bin_left": edges[:-1],
        "bin_right": edges[1:],
        "count": counts,
        "density": counts / (result.samples.size * np.where(widths > 0, widths, 1.0)),
    })


def outcomes_frame(outcomes: Sequence[TradeOutcome], cumulative: Optional[np.ndarray] = None) -> pd.DataFrame:
    frame = pd.DataFrame({
        "week": [o.week_id for o in outcomes],
        "side": [o.side.value for o in outcomes],
        "exit": [o.exit_reason.value for o in outcomes],
        "open_level": [o.open_level for o in outcomes],
        "exit_level": [o.exit_level for o in outcomes],
        "pnl_pips": [o.pnl_pips for o in outcomes],
        "pnl_currency": [o.pnl_currency for o in outcomes],
        "nights": [o.nights_held for o in outcomes],
        "gated": [o.gated for o in outcomes],
    })
    if cumulative is not None:
        frame["cumulative"] = cumulative
    return frame


def walkforward_frame(reports: Sequence[WalkForwardReport]) -> pd.DataFrame:
    """Estimation ("e") and actual ("A") rows per scheme and period."""
    rows = []
    for report in reports:
        for row in report.rows:
            u, d, ts, pc = row.params.as_tuple()
            rows.append((report.scheme, row.estimate_period, "e", u, d, ts, pc, row.estimated_mean))
            rows.append((report.scheme, row.applied_period, "A", u, d, ts, pc, row.actual_mean))
    return pd.DataFrame(rows, columns=["scheme", "period", "row", "u", "d", "ts", "pc", "mean_weekly_return"])


def walkforward_cumulative_frame(reports: Sequence[WalkForwardReport]) -> pd.DataFrame:
    frames = []
    for report in reports:
        outcomes = [o for row in report.rows for o in row.outcomes]
        frame = outcomes_frame(outcomes, report.cumulative())
        frame.insert(0, "scheme", report.scheme)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True) if frames else outcomes_frame([])


def predictions_frame(predictions: Mapping[str, Sequence[WeeklyPrediction]]) -> pd.DataFrame:
    rows = [(label, p.week_id, p.side.value, p.open_level, p.predicted_return, p.pc_probability, p.pnl_pips, p.hit_pc)
            for label, items in predictions.items() for p in items]
    return pd.DataFrame(rows, columns=["scheme", "week", "side", "open_level", "predicted_return",
                                       "pc_probability", "pnl_pips", "hit_pc"])


def design_frame(choices: Sequence[DesignChoice]) -> pd.DataFrame:
    return pd.DataFrame([(c.side.value, c.level, c.ts_pips, c.pc_pips, c.expected_return, c.pc_probability)
                         for c in choices],
                        columns=["side", "open_level", "ts", "pc", "expected_return", "pc_probability"])


def _json_value(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def render(frame: pd.DataFrame, fmt: str, meta: Optional[Mapping] = None) -> str:
    """
    Serialise a table.
    @param fmt: "csv" or "json"
    @param meta: Extra fields placed next to the rows in JSON output
    """
    if fmt == "csv":
        return frame.to_csv(index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
    if fmt == "json":
        records = [{k: _json_value(v) for k, v in row.items()} for row in frame.to_dict(orient="records")]
        return json.dumps({"meta": dict(meta or {}), "rows": records}, allow_nan=False, indent=1) + "\n"
    raise ParameterError(f"unknown output format {fmt!r}")


def write_output(frame: pd.DataFrame, fmt: str, path: Optional[Path] = None, meta: Optional[Mapping] = None) -> None:
    """
    Write a table to `path`, or to stdout when no path is given.
    @raise OutputError: The file cannot be written
    """
    text = render(frame, fmt, meta)
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e.strerror or e}") from e
