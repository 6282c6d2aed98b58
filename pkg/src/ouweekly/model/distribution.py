"""
Law of the running maximum of an OU process stopped at a fixed drawdown.

With Psi(u, z) = exp{kappa [(z - theta)^2 - (u - theta)^2]} the maximum M
reached before the process first falls `a` below it satisfies

    P[M > v] = exp(-H(v)),   H(v) = int_x^v h(z) dz,
    h(z) = 1 / int_{z-a}^{z} Psi(z, y) dy.

Everything below (distribution function, density, profit-call probability,
expected weekly return) is built on H. Long positions are computed directly,
short positions through the reflection in `mirror_short`.
"""
import logging
import math

import numpy as np
from scipy.optimize import brentq

from ..errors import ModelError, ParameterError
from .params import PIP, REFERENCE_SIGMA, OUParams, ReturnDistribution, StoppedMaxProblem
from .quadrature import integrate, integrate_log

logger = logging.getLogger(__name__)

INNER_RTOL = 1e-10
OUTER_RTOL = 1e-8
EXPECTATION_RTOL = 1e-10
SUPPORT_TAIL = 1e-9
SUPPORT_BLOCK = 64
MAX_SUPPORT_STEPS = 2 ** 16
DEFAULT_GRID_SIZE = 512
MIN_GRID_SIZE = 64
MAX_GRID_SIZE = 2 ** 16
MASS_TOLERANCE = 1e-6


def _like(value: np.ndarray, template):
    """Return a float for scalar input, an array otherwise."""
    if np.ndim(template) == 0:
        return float(np.asarray(value).reshape(-1)[0])
    return value


def log_psi(u, z, ou: OUParams):
    """Exponent of Psi(u, z), factored so nearby arguments do not cancel."""
    u = np.asarray(u, dtype=float)
    z = np.asarray(z, dtype=float)
    value = ou.kappa * (z - u) * ((z - ou.theta) + (u - ou.theta))
    return _like(value, value)


def psi(u, z, ou: OUParams):
    """
    Plain Psi(u, z). Raises FloatingPointError on overflow; integrals must go
    through `log_psi` instead.
    """
    with np.errstate(over="raise"):
        return _like(np.exp(log_psi(u, z, ou)), np.asarray(u) + np.asarray(z))


def _log_denominator(z: np.ndarray, prob: StoppedMaxProblem) -> np.ndarray:
    ou = prob.ou

    def integrand(y, rows):
        return log_psi(z[rows][:, None], y, ou)

    return integrate_log(integrand, z - prob.drawdown, z, INNER_RTOL)


def _hazard_values(z: np.ndarray, prob: StoppedMaxProblem) -> np.ndarray:
    flat = np.asarray(z, dtype=float).ravel()
    return np.exp(-_log_denominator(flat, prob)).reshape(np.shape(z))


def hazard(z, prob: StoppedMaxProblem):
    """
    Hazard h(z) of the stopped maximum, in the cancelled form 1/int Psi(z, y) dy.
    @param z: Price level(s)
    @param prob: Stopped-maximum problem
    @return: h(z), same shape as z
    """
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    return _like(_hazard_values(z_arr, prob), z)


def cumulative_hazard(v, prob: StoppedMaxProblem):
    """H(v) = int_x^v h; zero at and below the start, infinite at +inf."""
    v_arr = np.asarray(v, dtype=float)
    flat = v_arr.ravel()
    out = np.zeros(flat.shape)
    above = flat > prob.start
    out[above & np.isposinf(flat)] = np.inf
    finite = above & np.isfinite(flat)
    if np.any(finite):
        points = flat[finite]
        order = np.argsort(points, kind="stable")
        edges = np.concatenate(([prob.start], points[order]))
        pieces = integrate(lambda nodes, rows: _hazard_values(nodes, prob),
                           edges[:-1], edges[1:], OUTER_RTOL)
        cumulative = np.empty(points.size)
        cumulative[order] = np.cumsum(pieces)
        out[finite] = cumulative
    return _like(out.reshape(v_arr.shape), v)


def running_max_cdf(v, prob: StoppedMaxProblem):
    """P[M <= v]; zero for v at or below the start."""
    return _like(-np.expm1(-np.asarray(cumulative_hazard(v, prob))), v)


def survival(v, prob: StoppedMaxProblem):
    return _like(np.exp(-np.asarray(cumulative_hazard(v, prob))), v)


def running_max_pdf(v, prob: StoppedMaxProblem):
    """Exact density h(v) exp(-H(v)); zero below the start."""
    v_arr = np.asarray(v, dtype=float)
    flat = v_arr.ravel()
    out = np.zeros(flat.shape)
    inside = (flat >= prob.start) & np.isfinite(flat)
    if np.any(inside):
        points = flat[inside]
        out[inside] = _hazard_values(points, prob) * np.exp(-cumulative_hazard(points, prob))
    return _like(out.reshape(v_arr.shape), v)


def pc_probability(prob: StoppedMaxProblem, pc: float) -> float:
    """Probability that the maximum reaches start + pc before the stop fires."""
    if not pc > 0:
        raise ParameterError(f"profit call must be positive, got {pc}")
    return float(survival(prob.start + pc, prob))


def support_upper(prob: StoppedMaxProblem, tail: float = SUPPORT_TAIL) -> float:
    """
    Smallest level on a drawdown-spaced grid beyond which the survival is below `tail`.
    @param prob: Stopped-maximum problem
    @param tail: Remaining probability treated as negligible
    @return: Price level
    """
    target = -math.log(tail)
    step = prob.drawdown
    lower = prob.start
    total = 0.0
    for _ in range(MAX_SUPPORT_STEPS // SUPPORT_BLOCK):
        edges = lower + step * np.arange(SUPPORT_BLOCK + 1)
        pieces = integrate(lambda nodes, rows: _hazard_values(nodes, prob),
                           edges[:-1], edges[1:], OUTER_RTOL)
        cumulative = total + np.cumsum(pieces)
        crossed = np.flatnonzero(cumulative > target)
        if crossed.size:
            return float(edges[crossed[0] + 1])
        total = float(cumulative[-1])
        lower = float(edges[-1])
    raise ModelError(
        f"survival of the stopped maximum stays above {tail} "
        f"(kappa={prob.ou.kappa:g}); the model does not revert"
    )


def pdf_mass(prob: StoppedMaxProblem, tail: float = SUPPORT_TAIL) -> float:
    """Quadrature of the density up to `support_upper`."""
    upper = support_upper(prob, tail)
    mass = integrate(lambda nodes, rows: running_max_pdf(nodes, prob),
                     prob.start, upper, EXPECTATION_RTOL)
    return float(mass[0])


def _check_thresholds(prob: StoppedMaxProblem, ts_pips: float, pc_pips: float) -> None:
    if not (ts_pips > 0 and pc_pips > 0):
        raise ParameterError(f"TS and PC must be positive, got {ts_pips}, {pc_pips}")
    if not math.isclose(prob.drawdown, ts_pips * PIP, rel_tol=1e-9):
        raise ModelError(
            f"drawdown {prob.drawdown!r} does not match a trailing stop of {ts_pips} pips"
        )


def expected_weekly_return(prob: StoppedMaxProblem, ts_pips: float, pc_pips: float) -> float:
    """
    Expected weekly return of a long position opened at prob.start, in pips.
    @param prob: Problem whose drawdown equals the trailing stop
    @param ts_pips: Trailing stop width
    @param pc_pips: Profit call distance from the opening level
    @return: E = int_{-TS}^{PC-TS} y f(y) dy + PC P(PC)
    """
    _check_thresholds(prob, ts_pips, pc_pips)
    start = prob.start

    def weighted_density(nodes, rows):
        returns = (nodes - start) / PIP - ts_pips
        return returns * running_max_pdf(nodes, prob)

    continuous = integrate(weighted_density, start, start + pc_pips * PIP,
                           EXPECTATION_RTOL, atol=1e-12)
    return float(continuous[0]) + pc_pips * pc_probability(prob, pc_pips * PIP)


def return_distribution(prob: StoppedMaxProblem, ts_pips: float, pc_pips: float,
                        grid_size: int = DEFAULT_GRID_SIZE) -> ReturnDistribution:
    """
    Tabulate the weekly return law on a uniform pip grid from -TS to PC-TS.

    The density is per pip: density(y) = running_max_pdf(start + (y + TS) pip) * pip.
    The grid is refined (intervals halved) until trapezoid mass plus atom is
    within MASS_TOLERANCE of one, so `grid_size` is a lower bound.
    """
    if grid_size < MIN_GRID_SIZE:
        raise ParameterError(f"grid_size must be at least {MIN_GRID_SIZE}, got {grid_size}")
    _check_thresholds(prob, ts_pips, pc_pips)
    atom = pc_probability(prob, pc_pips * PIP)
    size = int(grid_size)
    while True:
        grid = np.linspace(-ts_pips, pc_pips - ts_pips, size)
        density = running_max_pdf(prob.start + (grid + ts_pips) * PIP, prob) * PIP
        dist = ReturnDistribution(grid=grid, density=density, pc_atom=atom,
                                  ts_pips=float(ts_pips), pc_pips=float(pc_pips))
        error = abs(dist.mass() - 1.0)
        if error <= MASS_TOLERANCE:
            return dist
        if 2 * size - 1 > MAX_GRID_SIZE:
            raise ModelError(f"return distribution mass is off by {error:.3g} at {size} grid points")
        logger.debug("Mass off by %.3g at %d grid points, refining", error, size)
        size = 2 * size - 1


def mirror_short(prob: StoppedMaxProblem) -> StoppedMaxProblem:
    """Reflect prices through zero: a short position becomes a long one."""
    ou = prob.ou
    return StoppedMaxProblem(start=-prob.start, drawdown=prob.drawdown,
                             ou=OUParams(theta=-ou.theta, lam=ou.lam, sigma=ou.sigma))


def short_pc_probability(prob: StoppedMaxProblem, pc: float) -> float:
    """P(PC) of a short opened at prob.start with a trailing stop of prob.drawdown."""
    return pc_probability(mirror_short(prob), pc)


def short_expected_weekly_return(prob: StoppedMaxProblem, ts_pips: float, pc_pips: float) -> float:
    return expected_weekly_return(mirror_short(prob), ts_pips, pc_pips)


def kappa_for_pc_probability(target: float, start: float, theta: float, drawdown: float, pc: float,
                             sigma: float = REFERENCE_SIGMA,
                             bracket: tuple[float, float] = (1e-3, 1e5)) -> float:
    """
    Find the ratio kappa for which the profit-call probability equals `target`.
    @param target: Desired P(PC)
    @param start: Opening level
    @param theta: Long-term mean
    @param drawdown: Trailing stop width (price)
    @param pc: Profit call distance (price)
    @param sigma: Volatility used to turn kappa into (lambda, sigma)
    @param bracket: Search interval for kappa
    @return: kappa
    """
    def gap(kappa: float) -> float:
        problem = StoppedMaxProblem(start, drawdown, OUParams.from_kappa(theta, kappa, sigma))
        return pc_probability(problem, pc) - target

    low, high = bracket
    g_low, g_high = gap(low), gap(high)
    if g_low * g_high > 0:
        raise ModelError(f"P(PC)={target} is not reachable for kappa in {bracket}")
    kappa = brentq(gap, low, high, xtol=1e-8, rtol=1e-12)
    logger.info("kappa %.6g reproduces P(PC)=%.4f", kappa, target)
    return kappa
