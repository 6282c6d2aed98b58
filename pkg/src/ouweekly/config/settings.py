"""
Resolved run settings. Precedence: command-line flags, then the config file,
then the built-in defaults.
"""
import configparser
from argparse import Namespace
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, TypeVar

from ..backtest.engine import CostModel, ExitPriority, GateMode, StrategyParams
from ..backtest.optimize import ParameterGrid
from ..calibration.schemes import EstimationScheme
from ..calibration.series import sampling_delta
from ..data.sessions import CANDLES, TICKS
from ..errors import ConfigError, OuWeeklyError

T = TypeVar("T")

OUTPUT_FORMATS = ("csv", "json")

# argparse destination -> (section, option)
FLAG_OPTIONS = {
    "data": ("data", "path"),
    "kind": ("data", "kind"),
    "u": ("strategy", "u"),
    "d": ("strategy", "d"),
    "ts": ("strategy", "ts"),
    "pc": ("strategy", "pc"),
    "exit_priority": ("strategy", "exit_priority"),
    "notional": ("costs", "position_notional"),
    "leverage": ("costs", "leverage"),
    "commission": ("costs", "overnight_commission_rate"),
    "scheme": ("estimation", "scheme"),
    "sampling": ("estimation", "sampling"),
    "paths": ("simulation", "paths"),
    "dt": ("simulation", "dt"),
    "seed": ("simulation", "seed"),
    "workers": ("simulation", "workers"),
    "grid": ("optimize", "grid"),
    "period_weeks": ("optimize", "period_weeks"),
    "lookback": ("optimize", "lookback"),
    "pc_floor": ("gate", "pc_floor"),
    "gate_mode": ("gate", "mode"),
    "format": ("output", "format"),
    "out": ("output", "path"),
}


def parse_lookbacks(text: str) -> tuple[Optional[int], ...]:
    """'1,2,expanding' -> (1, 2, None)."""
    out = []
    for item in (p.strip().lower() for p in text.split(",")):
        if not item:
            continue
        if item == "expanding":
            out.append(None)
            continue
        value = int(item)
        if value < 1:
            raise ValueError(f"lookback must be positive, got {value}")
        out.append(value)
    if not out:
        raise ValueError("no lookback given")
    return tuple(out)


def _choice(options: tuple[str, ...]) -> Callable[[str], str]:
    def convert(raw: str) -> str:
        value = raw.strip().lower()
        if value not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return value
    return convert


def _path(raw: str) -> Optional[Path]:
    return Path(raw).expanduser() if raw.strip() else None


@dataclass(frozen=True)
class RunConfig:
    command: str
    data_path: Optional[Path]
    data_kind: str
    strategy: StrategyParams
    exit_priority: ExitPriority
    costs: CostModel
    scheme: EstimationScheme
    sampling: str
    n_paths: int
    dt: float
    seed: int
    workers: int
    grid: ParameterGrid
    period_weeks: int
    lookbacks: tuple[Optional[int], ...]
    pc_floor: float
    gate_mode: GateMode
    output_format: str
    output_path: Optional[Path]


def _get(config: configparser.ConfigParser, section: str, option: str, convert: Callable[[str], T]) -> T:
    raw = config.get(section, option)
    try:
        return convert(raw)
    except (ValueError, OuWeeklyError) as e:
        raise ConfigError(f"[{section}] {option} = {raw!r}: {e}") from None


def run_config_from(config: configparser.ConfigParser, command: str = "") -> RunConfig:
    """Build a RunConfig from fully layered sections."""
    def strategy(_):
        return StrategyParams(*(int(config.get("strategy", key)) for key in ("u", "d", "ts", "pc")))

    def costs(_):
        return CostModel(*(float(config.get("costs", key))
                           for key in ("position_notional", "leverage", "overnight_commission_rate")))

    def sampling(raw):
        sampling_delta(raw.strip())
        return raw.strip()

    def positive_int(raw):
        value = int(raw)
        if value < 1:
            raise ValueError("must be positive")
        return value

    def floor(raw):
        value = float(raw)
        if not 0 <= value <= 1:
            raise ValueError("must lie in [0, 1]")
        return value

    return RunConfig(
        command=command,
        data_path=_get(config, "data", "path", _path),
        data_kind=_get(config, "data", "kind", _choice((CANDLES, TICKS))),
        strategy=_get(config, "strategy", "u", strategy),
        exit_priority=_get(config, "strategy", "exit_priority", lambda raw: ExitPriority(raw.strip().lower())),
        costs=_get(config, "costs", "position_notional", costs),
        scheme=_get(config, "estimation", "scheme", EstimationScheme.parse),
        sampling=_get(config, "estimation", "sampling", sampling),
        n_paths=_get(config, "simulation", "paths", positive_int),
        dt=_get(config, "simulation", "dt", float),
        seed=_get(config, "simulation", "seed", int),
        workers=_get(config, "simulation", "workers", positive_int),
        grid=_get(config, "optimize", "grid", ParameterGrid.parse),
        period_weeks=_get(config, "optimize", "period_weeks", positive_int),
        lookbacks=_get(config, "optimize", "lookback", parse_lookbacks),
        pc_floor=_get(config, "gate", "pc_floor", floor),
        gate_mode=_get(config, "gate", "mode", lambda raw: GateMode(raw.strip().lower())),
        output_format=_get(config, "output", "format", _choice(OUTPUT_FORMATS)),
        output_path=_get(config, "output", "path", _path),
    )


def resolve_run_config(args: Namespace, config: configparser.ConfigParser) -> RunConfig:
    """
    Overlay the flags that were given onto the configuration.
    @param args: Parsed command line; unset flags are None
    @param config: Configuration read by read_config
    @return: RunConfig
    """
    for dest, (section, option) in FLAG_OPTIONS.items():
        value = getattr(args, dest, None)
        if value is not None:
            config.set(section, option, str(value))
    return run_config_from(config, getattr(args, "command", "") or "")
