"""
Vectorised composite Gauss-Legendre quadrature with panel doubling.

Every routine integrates many intervals at once: `lo` and `hi` are arrays and
the integrand receives a 2-D array of nodes (one row per interval) together
with the row indices it is being evaluated for, so per-interval parameters
can be looked up by the caller.
"""
import logging
from typing import Callable

import numpy as np
from scipy.special import logsumexp

logger = logging.getLogger(__name__)

GAUSS_ORDER = 20
MAX_PANELS = 2 ** 20
LOG_SPACE_THRESHOLD = 40.0

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(GAUSS_ORDER)

Integrand = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _panel_rule(lo: np.ndarray, hi: np.ndarray, panels: int) -> tuple[np.ndarray, np.ndarray]:
    width = (hi - lo) / panels
    left = lo[:, None] + width[:, None] * np.arange(panels)
    half = 0.5 * width[:, None, None]
    nodes = left[:, :, None] + half * (_NODES + 1.0)
    weights = np.broadcast_to(half * _WEIGHTS, nodes.shape)
    rows = lo.size
    return nodes.reshape(rows, -1), weights.reshape(rows, -1)


def _plain_sum(func: Integrand, lo, hi, rows, panels) -> np.ndarray:
    nodes, weights = _panel_rule(lo, hi, panels)
    return np.sum(weights * func(nodes, rows), axis=1)


def _log_sum(log_func: Integrand, lo, hi, rows, panels) -> np.ndarray:
    nodes, weights = _panel_rule(lo, hi, panels)
    exponents = log_func(nodes, rows)
    if np.max(np.abs(exponents)) > LOG_SPACE_THRESHOLD:
        return logsumexp(exponents, axis=1, b=weights)
    return np.log(np.sum(weights * np.exp(exponents), axis=1))


def _doubling(panel_sum, func: Integrand, lo, hi, converged) -> np.ndarray:
    lo, hi = np.broadcast_arrays(np.atleast_1d(np.asarray(lo, dtype=float)),
                                 np.atleast_1d(np.asarray(hi, dtype=float)))
    result = np.empty(lo.shape)
    if lo.size == 0:
        return result
    rows = np.arange(lo.size)
    panels = 1
    coarse = panel_sum(func, lo, hi, rows, panels)
    while rows.size:
        fine = panel_sum(func, lo[rows], hi[rows], rows, 2 * panels)
        done = converged(coarse, fine)
        result[rows[done]] = fine[done]
        rows, coarse = rows[~done], fine[~done]
        panels *= 2
        if rows.size and 2 * panels > MAX_PANELS:
            logger.warning("Quadrature hit the panel cap on %d interval(s); keeping last estimate", rows.size)
            result[rows] = coarse
            break
    return result


def integrate(func: Integrand, lo, hi, rtol: float, atol: float = 0.0) -> np.ndarray:
    """
    Integrate `func` over every interval [lo_i, hi_i].
    @param func: Callable (nodes, rows) -> values with the shape of nodes
    @param lo: Lower bounds
    @param hi: Upper bounds
    @param rtol: Relative tolerance between successive panel counts
    @param atol: Absolute tolerance floor
    @return: Array of integrals, one per interval
    """
    def converged(coarse, fine):
        return (fine == coarse) | (np.abs(fine - coarse) <= np.maximum(rtol * np.abs(fine), atol))

    return _doubling(_plain_sum, func, lo, hi, converged)


def integrate_log(log_func: Integrand, lo, hi, rtol: float) -> np.ndarray:
    """
    Logarithm of the integral of exp(log_func) over every interval.

    Sums are taken in log space as soon as an exponent exceeds
    LOG_SPACE_THRESHOLD in magnitude, so integrands far outside the range of
    a double stay representable.
    """
    def converged(coarse, fine):
        return (fine == coarse) | (np.abs(fine - coarse) <= rtol)

    return _doubling(_log_sum, log_func, lo, hi, converged)
