from typing import Optional


class OuWeeklyError(Exception):
    """Base class for every error the toolkit raises on purpose."""

    category = "error"
    exit_code = 1


class ParameterError(OuWeeklyError, ValueError):
    """A domain value violates its invariants."""

    category = "invalid_parameters"
    exit_code = 2


class ConfigError(OuWeeklyError):
    category = "config_error"
    exit_code = 2


class DataError(OuWeeklyError):
    """
    Input price data cannot be used.
    @param message: Human readable reason
    @param path: File the problem was found in
    @param line: 1-based line number inside the file, if known
    """

    category = "data_error"
    exit_code = 3

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")


class MissingColumnsError(DataError):
    pass


class MalformedRowError(DataError):
    pass


class NonMonotoneTimeError(DataError):
    pass


class CalibrationError(OuWeeklyError):
    category = "calibration_error"
    exit_code = 4


class ModelError(OuWeeklyError):
    category = "model_error"
    exit_code = 5


class SimulationError(OuWeeklyError):
    category = "simulation_error"
    exit_code = 6


class OutputError(OuWeeklyError):
    """A result or configuration file cannot be written."""

    category = "output_error"
    exit_code = 7
