from ..errors import ConfigError
from .operations import DEFAULTS, read_config
from .settings import run_config_from


def validate_config(config_path: str, verbose: bool) -> tuple[bool, str]:
    """Validate configuration file and contents."""
    config = read_config(config_path, verbose)

    unknown = [s for s in config.sections() if s not in DEFAULTS]
    if unknown:
        return False, f"Unbekannte Sektion(en) in Konfigurationsdatei: {', '.join(unknown)}"

    for section in DEFAULTS:
        extra = [o for o in config.options(section) if o not in DEFAULTS[section]]
        if extra:
            return False, f"Unbekannte Option(en) in [{section}]: {', '.join(extra)}"

    try:
        run_config_from(config)
    except ConfigError as e:
        return False, f"Ungültiger Wert: {e}"

    return True, "Konfiguration ist gültig"
