"""
Maximum-likelihood calibration of the OU model from a uniformly sampled series.

The estimators are the exact AR(1) ones written in terms of five sums over the
pairs (S_{i-1}, S_i). Samples are centred on their mean before summing; the
estimators are shift-equivariant so the centre is added back to theta only.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import CalibrationError, ModelError, ParameterError
from ..model.params import OUParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SampledSeries:
    """
    Price samples S_0..S_n taken every `delta` weeks.
    @param values: Samples
    @param delta: Sampling step in weeks
    @param timestamps: Optional UTC seconds, one per sample
    """

    values: np.ndarray
    delta: float
    timestamps: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.size < 3:
            raise ParameterError(f"a series needs at least 3 samples, got {values.size}")
        if not self.delta > 0:
            raise ParameterError(f"delta must be positive, got {self.delta}")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise ParameterError("series values must be finite and positive")
        if self.timestamps is not None:
            stamps = np.asarray(self.timestamps, dtype=np.int64)
            if stamps.shape != values.shape:
                raise ParameterError("timestamps must align with values")
            object.__setattr__(self, "timestamps", stamps)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class CalibrationResult:
    """
    Raw estimates of one fit. Invalid fits keep their raw values (lam may be
    negative or nan) so they can be charted.
    """

    theta: float
    lam: float
    sigma: float
    valid: bool
    n_obs: int

    @property
    def kappa(self) -> float:
        if not (math.isfinite(self.lam) and self.sigma > 0):
            return math.nan
        return self.lam / self.sigma ** 2

    @property
    def params(self) -> OUParams:
        try:
            return OUParams(theta=self.theta, lam=self.lam, sigma=self.sigma)
        except ParameterError as e:
            raise ModelError(f"calibration produced no usable model: {e}") from e


def _estimates(n, sx, sy, sxx, sxy, syy, delta: float):
    """Vectorised theta, lambda, sigma^2 from pair sums (any array shape)."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        denominator = n * (sxx - sxy) - (sx * sx - sx * sy)
        theta = (sy * sxx - sx * sxy) / denominator
        ratio = (sxy - theta * sx - theta * sy + n * theta ** 2) / (sxx - 2 * theta * sx + n * theta ** 2)
        lam = np.where(ratio > 0, -np.log(np.where(ratio > 0, ratio, 1.0)) / delta, np.nan)
        alpha = ratio
        conditional = (syy - 2 * alpha * sxy + alpha ** 2 * sxx
                       - 2 * theta * (1 - alpha) * (sy - alpha * sx)
                       + n * theta ** 2 * (1 - alpha) ** 2) / n
        scale = np.where(lam == 0, 1.0 / delta, 2 * lam / -np.expm1(-2 * lam * delta))
        sigma2 = conditional * scale
    return theta, lam, sigma2


def _result(theta: float, lam: float, sigma2: float, n_obs: int) -> CalibrationResult:
    theta, lam, sigma2 = float(theta), float(lam), float(sigma2)
    valid = all(math.isfinite(v) for v in (theta, lam, sigma2)) and lam > 0 and sigma2 > 0
    sigma = math.sqrt(sigma2) if math.isfinite(sigma2) and sigma2 > 0 else math.nan
    return CalibrationResult(theta=theta, lam=lam, sigma=sigma, valid=valid, n_obs=int(n_obs))


def mle_fit(series: SampledSeries) -> CalibrationResult:
    """
    Fit (theta, lambda, sigma) by maximum likelihood.
    @param series: Uniformly sampled prices
    @return: CalibrationResult, valid=False when the fit does not mean-revert
    """
    values = series.values
    if np.ptp(values) == 0:
        raise CalibrationError("degenerate series: all samples are equal")
    centre = values.mean()
    centred = values - centre
    x, y = centred[:-1], centred[1:]
    theta, lam, sigma2 = _estimates(x.size, x.sum(), y.sum(), x @ x, x @ y, y @ y, series.delta)
    result = _result(theta + centre, lam, sigma2, x.size)
    if not result.valid:
        logger.info("OU fit rejected: theta=%g lam=%g sigma=%g", result.theta, result.lam, result.sigma)
    return result


def validity_gate(result: CalibrationResult) -> bool:
    return bool(result.valid)


def ar1_to_ou(alpha: float, beta: float, eps: float, delta: float) -> OUParams:
    """Map S_{i+1} = alpha S_i + beta + eps Z onto OU parameters."""
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1) for a reverting AR(1), got {alpha}")
    lam = -math.log(alpha) / delta
    return OUParams(theta=beta / (1 - alpha), lam=lam, sigma=eps * math.sqrt(2 * lam / (1 - alpha ** 2)))
