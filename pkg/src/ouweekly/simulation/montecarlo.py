"""
Monte Carlo counterparts of the analytic stopped-maximum law.

Paths are split into fixed-size chunks; chunk k draws from the k-th child of
SeedSequence(seed), so samples depend on the seed only and not on how many
workers evaluate the chunks.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import ParameterError, SimulationError
from ..model.params import PIP
from .paths import SimConfig, filter_path, transition

logger = logging.getLogger(__name__)

CHUNK_PATHS = 4096
BLOCK_STEPS = 256
CENSOR_WARNING = 0.01

CENSORED, STOPPED, PROFIT_CALL, HORIZON = 0, 1, 2, 3


@dataclass(frozen=True, eq=False)
class MonteCarloResult:
    """
    Sorted samples of the paths that finished, plus the number censored by the step cap.
    """

    samples: np.ndarray
    censored: int
    n_paths: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples)) if self.samples.size else float("nan")

    @property
    def std_error(self) -> float:
        if self.samples.size < 2:
            return float("nan")
        return float(np.std(self.samples, ddof=1) / np.sqrt(self.samples.size))

    @property
    def censored_fraction(self) -> float:
        return self.censored / self.n_paths

    def ecdf(self, v) -> np.ndarray:
        return np.searchsorted(self.samples, np.asarray(v, dtype=float), side="right") / max(self.samples.size, 1)


@dataclass(frozen=True, eq=False)
class _ChunkOutcome:
    reason: np.ndarray
    maximum: np.ndarray
    last: np.ndarray


def _chunk_sizes(n_paths: int) -> list[int]:
    full, rest = divmod(n_paths, CHUNK_PATHS)
    return [CHUNK_PATHS] * full + ([rest] if rest else [])


def _run_chunk(cfg: SimConfig, drawdown: Optional[float], pc: Optional[float],
               seed: np.random.SeedSequence, size: int) -> _ChunkOutcome:
    rng = np.random.default_rng(seed)
    keep, shift, scale = transition(cfg.ou, cfg.dt)
    cap = cfg.max_steps if cfg.horizon_steps is None else min(cfg.max_steps, cfg.horizon_steps)

    current = np.full(size, float(cfg.x0))
    best = current.copy()
    reason = np.full(size, CENSORED, dtype=np.int8)
    maximum = np.full(size, np.nan)
    last = np.full(size, np.nan)
    active = np.arange(size)
    steps = 0
    while active.size and steps < cap:
        width = min(BLOCK_STEPS, cap - steps)
        drive = rng.normal(shift, scale, size=(active.size, width))
        path = filter_path(drive, keep, current[active])
        running = np.maximum(np.maximum.accumulate(path, axis=1), best[active][:, None])

        pc_hit = running >= cfg.x0 + pc if pc is not None else np.zeros(path.shape, dtype=bool)
        stop_hit = running - path >= drawdown if drawdown is not None else np.zeros(path.shape, dtype=bool)
        event = pc_hit | stop_hit
        ended = event.any(axis=1)
        rows = np.flatnonzero(ended)
        cols = event[rows].argmax(axis=1)
        done = active[rows]
        maximum[done] = running[rows, cols]
        last[done] = path[rows, cols]
        reason[done] = np.where(pc_hit[rows, cols], PROFIT_CALL, STOPPED)

        alive = ~ended
        active = active[alive]
        current[active] = path[alive, -1]
        best[active] = running[alive, -1]
        steps += width

    if active.size and cfg.horizon_steps is not None and steps >= cfg.horizon_steps:
        reason[active] = HORIZON
        maximum[active] = best[active]
        last[active] = current[active]
    return _ChunkOutcome(reason, maximum, last)


def _simulate(cfg: SimConfig, drawdown: Optional[float], pc: Optional[float]) -> _ChunkOutcome:
    sizes = _chunk_sizes(cfg.n_paths)
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(sizes))
    jobs = list(zip(seeds, sizes))
    if cfg.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(lambda job: _run_chunk(cfg, drawdown, pc, *job), jobs))
    else:
        parts = [_run_chunk(cfg, drawdown, pc, *job) for job in jobs]
    outcome = _ChunkOutcome(*(np.concatenate([getattr(p, name) for p in parts])
                              for name in ("reason", "maximum", "last")))
    censored = int(np.count_nonzero(outcome.reason == CENSORED))
    if censored > CENSOR_WARNING * cfg.n_paths:
        logger.warning("%d of %d path(s) hit the %d-step cap and were censored",
                       censored, cfg.n_paths, cfg.max_steps)
    return outcome


def _result(values: np.ndarray, outcome: _ChunkOutcome, n_paths: int) -> MonteCarloResult:
    finished = outcome.reason != CENSORED
    return MonteCarloResult(samples=np.sort(values[finished]), censored=int(np.count_nonzero(~finished)),
                            n_paths=n_paths)


def mc_stopped_max(cfg: SimConfig, drawdown: float) -> MonteCarloResult:
    """
    Running maximum at the first time the drawdown from it reaches `drawdown`
    (or at the horizon, when bounded).
    @param cfg: Simulation settings
    @param drawdown: Drawdown width in price units
    @return: MonteCarloResult of maxima
    """
    if not drawdown > 0:
        raise ParameterError(f"drawdown must be positive, got {drawdown}")
    outcome = _simulate(cfg, drawdown, None)
    logger.info("Simulated %d stopped maxima (seed %d)", cfg.n_paths, cfg.seed)
    return _result(outcome.maximum, outcome, cfg.n_paths)


def mc_weekly_returns(cfg: SimConfig, ts_pips: float, pc_pips: float) -> MonteCarloResult:
    """
    Returns in pips of a long position opened at x0: +PC at the profit call,
    max - x0 - TS at the trailing stop, final - x0 at the horizon.
    """
    if not (ts_pips > 0 and pc_pips > 0):
        raise ParameterError(f"TS and PC must be positive, got {ts_pips}, {pc_pips}")
    outcome = _simulate(cfg, ts_pips * PIP, pc_pips * PIP)
    returns = np.full(outcome.reason.shape, np.nan)
    returns[outcome.reason == PROFIT_CALL] = pc_pips
    stopped = outcome.reason == STOPPED
    returns[stopped] = (outcome.maximum[stopped] - cfg.x0) / PIP - ts_pips
    closed = outcome.reason == HORIZON
    returns[closed] = (outcome.last[closed] - cfg.x0) / PIP
    return _result(returns, outcome, cfg.n_paths)


def mc_pc_frequency(result: MonteCarloResult, pc_pips: float) -> float:
    """Share of finished paths that ended at the profit call."""
    if result.samples.size == 0:
        raise SimulationError("no finished paths")
    return float(np.count_nonzero(result.samples == pc_pips) / result.samples.size)


def mc_terminal_values(cfg: SimConfig) -> MonteCarloResult:
    """Values at the horizon of unstopped paths."""
    if cfg.horizon is None:
        raise ParameterError("terminal values need a bounded horizon")
    outcome = _simulate(cfg, None, None)
    return _result(outcome.last, outcome, cfg.n_paths)
