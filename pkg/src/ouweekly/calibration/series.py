import logging
from typing import Sequence

import numpy as np
import pandas as pd

from ..data.sessions import WeekSession
from ..errors import CalibrationError, ParameterError
from .mle import SampledSeries

logger = logging.getLogger(__name__)

HOURLY = "hourly"
DAILY = "daily"

# bin width in seconds, sampling step in weeks, resample rule and bin offset
SAMPLINGS = {
    HOURLY: (3600, 1.0 / 120.0, "1h", None),
    DAILY: (86400, 1.0 / 5.0, "1D", "21h"),
}


def sampling_delta(sampling: str) -> float:
    if sampling not in SAMPLINGS:
        raise ParameterError(f"unknown sampling {sampling!r}, expected one of {', '.join(SAMPLINGS)}")
    return SAMPLINGS[sampling][1]


def series_from_sessions(sessions: Sequence[WeekSession], sampling: str = HOURLY) -> SampledSeries:
    """
    Last close per hour (or per trading day, days starting 21:00 UTC) over all
    sessions. Each sample is stamped with the end of its bin so that a sample
    is known at its timestamp.
    @param sessions: Weeks in time order
    @param sampling: "hourly" (delta = 1/120 week) or "daily" (delta = 1/5 week)
    @return: SampledSeries with bin-end timestamps
    """
    delta = sampling_delta(sampling)
    width, _, rule, offset = SAMPLINGS[sampling]
    populated = [s for s in sessions if len(s)]
    if not populated:
        raise CalibrationError("no price samples to calibrate on")

    stamps = np.concatenate([s.timestamps for s in populated])
    closes = np.concatenate([s.close for s in populated])
    prices = pd.Series(closes, index=pd.to_datetime(stamps, unit="s", utc=True))
    resampled = prices.resample(rule, offset=offset).last().dropna()
    if len(resampled) < 3:
        raise CalibrationError(f"only {len(resampled)} {sampling} sample(s) available")

    bin_start = ((resampled.index - pd.Timestamp(0, tz="UTC")) // pd.Timedelta(seconds=1)).to_numpy()
    logger.info("Resampled %d price(s) to %d %s sample(s)", closes.size, len(resampled), sampling)
    return SampledSeries(values=resampled.to_numpy(dtype=float), delta=delta, timestamps=bin_start + width)
