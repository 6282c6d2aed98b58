import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from ..errors import ParameterError

# EUR/USD convention
PIP = 1e-4

# Volatility used when a model is specified only through its ratio kappa.
REFERENCE_SIGMA = 0.01


@dataclass(frozen=True)
class OUParams:
    """
    Ornstein-Uhlenbeck parameters in weekly units.
    @param theta: Long-term mean (price)
    @param lam: Mean-reversion rate (1/week)
    @param sigma: Volatility (price per sqrt-week)
    """

    theta: float
    lam: float
    sigma: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.theta, self.lam, self.sigma)):
            raise ParameterError(f"OU parameters must be finite: {self}")
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")

    @property
    def kappa(self) -> float:
        return self.lam / self.sigma ** 2

    @property
    def usable(self) -> bool:
        """The model is viable only while it actually reverts."""
        return self.lam > 0

    @classmethod
    def from_kappa(cls, theta: float, kappa: float, sigma: float = REFERENCE_SIGMA) -> "OUParams":
        return cls(theta=theta, lam=kappa * sigma ** 2, sigma=sigma)


@dataclass(frozen=True)
class StoppedMaxProblem:
    """
    Running maximum of an OU process started at `start` and stopped once it
    falls `drawdown` below that maximum.
    """

    start: float
    drawdown: float
    ou: OUParams

    def __post_init__(self):
        if not (math.isfinite(self.start) and math.isfinite(self.drawdown)):
            raise ParameterError(f"start and drawdown must be finite: {self.start}, {self.drawdown}")
        if not self.drawdown > 0:
            raise ParameterError(f"drawdown must be positive, got {self.drawdown}")


@dataclass(frozen=True, eq=False)
class ReturnDistribution:
    """
    Weekly return law of a long position in pips: a density on [-TS, PC-TS]
    (per pip, right end holds the left limit) and an atom at +PC.
    """

    grid: np.ndarray
    density: np.ndarray
    pc_atom: float
    ts_pips: float
    pc_pips: float

    def __post_init__(self):
        if self.grid.shape != self.density.shape:
            raise ParameterError("grid and density must be aligned")
        if np.any(self.density < 0):
            raise ParameterError("density must be nonnegative")
        if not 0.0 <= self.pc_atom <= 1.0:
            raise ParameterError(f"pc_atom outside [0, 1]: {self.pc_atom}")

    def continuous_mass(self) -> float:
        return float(trapezoid(self.density, self.grid))

    def mass(self) -> float:
        return self.continuous_mass() + self.pc_atom

    def cdf(self, y) -> np.ndarray:
        """Mixed-law distribution function P(return <= y)."""
        y = np.asarray(y, dtype=float)
        running = cumulative_trapezoid(self.density, self.grid, initial=0.0)
        result = np.interp(y, self.grid, running, left=0.0, right=running[-1])
        return np.where(y >= self.pc_pips, result + self.pc_atom, result)
