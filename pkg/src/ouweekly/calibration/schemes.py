import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from ..errors import ParameterError
from .mle import CalibrationResult, SampledSeries, _estimates, _result

logger = logging.getLogger(__name__)

ROLLING = "rolling"
EXPANDING = "expanding"
DEFAULT_WINDOW_WEEKS = 22
MIN_WINDOW_WEEKS = 4


@dataclass(frozen=True)
class EstimationScheme:
    """
    Which history a dynamic estimate uses: the trailing `window_weeks` (rolling)
    or everything since the series start (expanding). Both wait for
    `window_weeks` of data before the first estimate.
    """

    kind: str = ROLLING
    window_weeks: float = DEFAULT_WINDOW_WEEKS

    def __post_init__(self):
        if self.kind not in (ROLLING, EXPANDING):
            raise ParameterError(f"unknown estimation scheme {self.kind!r}")
        if not self.window_weeks >= MIN_WINDOW_WEEKS:
            raise ParameterError(f"window must cover at least {MIN_WINDOW_WEEKS} weeks, got {self.window_weeks}")

    @classmethod
    def parse(cls, text: str) -> "EstimationScheme":
        """Parse 'rolling:22', 'rolling', 'expanding' or 'expanding:10'."""
        kind, _, window = text.strip().lower().partition(":")
        try:
            weeks = float(window) if window else DEFAULT_WINDOW_WEEKS
        except ValueError:
            raise ParameterError(f"invalid window in scheme {text!r}") from None
        return cls(kind=kind, window_weeks=weeks)

    def window_samples(self, delta: float) -> int:
        return max(3, int(round(self.window_weeks / delta)))

    def label(self) -> str:
        return f"{self.kind}:{self.window_weeks:g}"


class Estimate(NamedTuple):
    index: int
    timestamp: Optional[int]
    result: CalibrationResult


def _prefix(values: np.ndarray) -> np.ndarray:
    return np.concatenate(([0.0], np.cumsum(values)))


def estimates_at(series: SampledSeries, ends: Sequence[int], scheme: EstimationScheme) -> list[Estimate]:
    """
    Fit the scheme's window ending just before each sample index in `ends`.
    @param series: Full sampled series
    @param ends: Exclusive end indices, each at least the window length
    @param scheme: Rolling or expanding
    @return: One Estimate per end, in the given order
    """
    ends = np.asarray(ends, dtype=np.int64)
    if ends.size == 0:
        return []
    window = scheme.window_samples(series.delta)
    if ends.min() < window or ends.max() > len(series):
        raise ParameterError(f"window ends must lie in [{window}, {len(series)}]")

    values = series.values
    centre = values.mean()
    centred = values - centre
    x, y = centred[:-1], centred[1:]
    sums = [_prefix(x), _prefix(y), _prefix(x * x), _prefix(x * y), _prefix(y * y)]

    first = np.zeros_like(ends) if scheme.kind == EXPANDING else ends - window
    last = ends - 1
    n = last - first
    window_sums = [s[last] - s[first] for s in sums]
    theta, lam, sigma2 = _estimates(n, *window_sums, series.delta)

    stamps = series.timestamps
    out = []
    for k, end in enumerate(ends):
        timestamp = int(stamps[end - 1]) if stamps is not None else None
        out.append(Estimate(int(end - 1), timestamp, _result(theta[k] + centre, lam[k], sigma2[k], n[k])))
    return out


def rolling_estimates(series: SampledSeries, scheme: EstimationScheme = EstimationScheme(),
                      step: Optional[int] = None) -> list[Estimate]:
    """
    Dynamic estimates every `step` samples, anchored at the final sample.
    @param series: Sampled series
    @param scheme: Rolling or expanding scheme
    @param step: Samples between estimates, default one week of samples
    @return: Estimates ordered by time index; invalid fits are included
    """
    window = scheme.window_samples(series.delta)
    if len(series) < window:
        logger.warning("Series of %d samples is shorter than one %s window (%d samples)",
                       len(series), scheme.label(), window)
        return []
    if step is None:
        step = max(1, int(round(1.0 / series.delta)))
    if step < 1:
        raise ParameterError(f"step must be positive, got {step}")
    ends = np.arange(len(series), window - 1, -step)[::-1]
    return estimates_at(series, ends, scheme)
