"""
Exact discretisation of the OU process.

Over a step dt the transition is Gaussian with mean s e^{-lam dt} + theta (1 - e^{-lam dt})
and variance sigma^2 (1 - e^{-2 lam dt}) / (2 lam), so no time-stepping error
is introduced. Paths are generated with a first-order linear filter.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from ..errors import ParameterError
from ..model.params import OUParams

DEFAULT_DT = 1e-3
DEFAULT_PATHS = 100_000
MAX_STEPS = 10 ** 8


@dataclass(frozen=True)
class SimConfig:
    """
    Monte Carlo settings.
    @param ou: Process parameters
    @param x0: Starting price
    @param dt: Step in weeks
    @param horizon: Weeks to simulate, None runs every path until it stops
    @param n_paths: Number of paths
    @param seed: Root seed of all random substreams
    @param workers: Threads evaluating chunks; results do not depend on it
    @param max_steps: Per-path step cap, paths beyond it are censored
    """

    ou: OUParams
    x0: float
    dt: float = DEFAULT_DT
    horizon: Optional[float] = None
    n_paths: int = DEFAULT_PATHS
    seed: int = 0
    workers: int = 1
    max_steps: int = MAX_STEPS

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if self.n_paths < 1:
            raise ParameterError(f"n_paths must be at least 1, got {self.n_paths}")
        if self.horizon is not None and not self.horizon > 0:
            raise ParameterError(f"horizon must be positive when bounded, got {self.horizon}")
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.workers < 1 or self.max_steps < 1:
            raise ParameterError("workers and max_steps must be positive")
        if not math.isfinite(self.x0):
            raise ParameterError(f"x0 must be finite, got {self.x0}")

    @property
    def horizon_steps(self) -> Optional[int]:
        if self.horizon is None:
            return None
        return max(1, int(math.ceil(self.horizon / self.dt - 1e-9)))


def transition(ou: OUParams, dt: float) -> tuple[float, float, float]:
    """
    Coefficients of one exact step: s' = decay_keep * s + shift + scale * z.
    @return: (e^{-lam dt}, theta (1 - e^{-lam dt}), conditional standard deviation)
    """
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    lost = -math.expm1(-ou.lam * dt)
    if ou.lam == 0:
        variance = ou.sigma ** 2 * dt
    else:
        variance = ou.sigma ** 2 * -math.expm1(-2 * ou.lam * dt) / (2 * ou.lam)
    return 1.0 - lost, ou.theta * lost, math.sqrt(variance)


def ou_step(s, ou: OUParams, dt: float, z):
    """One exact transition from s driven by the standard normal draw z."""
    lost = -np.expm1(-ou.lam * dt)
    _, _, scale = transition(ou, dt)
    return s - (s - ou.theta) * lost + scale * z


def filter_path(drive: np.ndarray, keep: float, start: np.ndarray) -> np.ndarray:
    """
    Run x_{i+1} = keep x_i + drive_i along axis 1, rows starting from `start`.
    The starting value itself is not part of the output.
    """
    path, _ = lfilter([1.0], [1.0, -keep], drive, axis=1, zi=keep * np.asarray(start, dtype=float)[:, None])
    return path


def ou_path(x0: float, ou: OUParams, dt: float, n_steps: int, rng: np.random.Generator,
            n_paths: int = 1) -> np.ndarray:
    """
    Sample paths on the grid 0, dt, ..., n_steps dt.
    @return: Array (n_paths, n_steps + 1), or (n_steps + 1,) for a single path
    """
    if n_steps < 0:
        raise ParameterError(f"n_steps must be nonnegative, got {n_steps}")
    keep, shift, scale = transition(ou, dt)
    drive = rng.normal(shift, scale, size=(n_paths, n_steps))
    paths = np.empty((n_paths, n_steps + 1))
    paths[:, 0] = x0
    if n_steps:
        paths[:, 1:] = filter_path(drive, keep, np.full(n_paths, float(x0)))
    return paths[0] if n_paths == 1 else paths
