import configparser
import os
import sys
from pathlib import Path

from ..errors import OutputError

DEFAULT_CONFIG_PATH = "~/.config/ouweekly/config.ini"

DEFAULTS = {
    "data": {
        "path": "",
        "kind": "candles",
    },
    "strategy": {
        "u": "19",
        "d": "20",
        "ts": "51",
        "pc": "58",
        "exit_priority": "pc_first",
    },
    "costs": {
        "position_notional": "1000",
        "leverage": "200",
        "overnight_commission_rate": "0.0014",
    },
    "estimation": {
        "scheme": "rolling:22",
        "sampling": "hourly",
    },
    "simulation": {
        "paths": "100000",
        "dt": "0.001",
        "seed": "0",
        "workers": "1",
    },
    "optimize": {
        "grid": "u=10:60,d=10:60,ts=40:70,pc=0:15",
        "period_weeks": "52",
        "lookback": "1,2,3,4,expanding",
    },
    "gate": {
        "pc_floor": "0.30",
        "mode": "skip",
    },
    "output": {
        "format": "csv",
        "path": "",
    },
}


def default_config() -> configparser.ConfigParser:
    config = configparser.ConfigParser()
    config.read_dict(DEFAULTS)
    return config


def read_config(file_path: str, verbose: bool) -> configparser.ConfigParser:
    """Read the configuration file on top of the built-in defaults."""
    config = default_config()
    try:
        expanded_path = os.path.expanduser(file_path)
        if os.path.exists(expanded_path):
            config.read(expanded_path)
            if verbose:
                print(f"✓ Konfiguration geladen: {expanded_path}", file=sys.stderr)
        else:
            if verbose:
                print(f"⚠ Konfigurationsdatei nicht gefunden: {expanded_path}", file=sys.stderr)
    except configparser.Error as e:
        print(f"✗ Fehler beim Lesen der Konfiguration: {e}", file=sys.stderr)

    return config


def write_config(config: configparser.ConfigParser, config_path: str) -> Path:
    """
    Write the settings to `config_path`, creating missing directories.
    @return: Expanded path of the written file
    @raise OutputError: The file or its directory cannot be created
    """
    path = Path(config_path).expanduser()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as f:
            config.write(f)
    except OSError as e:
        raise OutputError(f"cannot write configuration {path}: {e.strerror or e}") from e
    return path
