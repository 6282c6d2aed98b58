import logging
import os
import sys
from argparse import Namespace
from typing import Callable, Optional

import pandas as pd

from .backtest import (CalibrationGate, EstimationScheme, ParameterGrid, Side, design_week, optimize_grid,
                       parse_range, pc_frequency_report, pc_frequency_table, period_totals, run_backtest,
                       walk_forward, weekly_calibrations, weekly_predictions)
from .calibration import CalibrationResult, rolling_estimates, series_from_sessions
from .config import default_config, read_config, resolve_run_config, validate_config, write_config
from .config.settings import RunConfig
from .data.ingest import ingest
from .errors import ConfigError, ModelError, OuWeeklyError
from .model import (PIP, REFERENCE_SIGMA, OUParams, StoppedMaxProblem, expected_weekly_return,
                    kappa_for_pc_probability, mirror_short, return_distribution)
from .output import (calibration_frame, design_frame, distribution_frame, histogram_frame, outcomes_frame,
                     predictions_frame, walkforward_cumulative_frame, walkforward_frame, write_output)
from .parser import check_global_arguments, get_args
from .simulation import SimConfig, mc_stopped_max, mc_weekly_returns

DEFAULT_PCREPORT_SCHEMES = ("rolling:22", "expanding")


def _status(message: str) -> None:
    print(message, file=sys.stderr)


def _load_weeks(run: RunConfig):
    if run.data_path is None:
        raise ConfigError("no price data given, use --data or set [data] path")
    weeks = ingest(run.data_path, run.data_kind)
    _status(f"✓ {len(weeks)} Handelswochen aus {run.data_path} gelesen")
    return weeks


def _latest_calibration(weeks, run: RunConfig) -> CalibrationResult:
    series = series_from_sessions(weeks, run.sampling)
    estimates = rolling_estimates(series, run.scheme, step=len(series))
    if not estimates:
        raise ModelError(f"not enough data for one {run.scheme.label()} window")
    return estimates[-1].result


def _viable(ou: OUParams) -> OUParams:
    if not ou.usable:
        raise ModelError(f"lambda = {ou.lam:g} <= 0: the OU model is not viable here (no mean reversion)")
    return ou


def _model(args: Namespace, run: RunConfig, weeks=None) -> OUParams:
    """OU parameters from the flags, or calibrated on the data."""
    if args.theta is not None and args.kappa is not None:
        return _viable(OUParams.from_kappa(args.theta, args.kappa, args.sigma or REFERENCE_SIGMA))
    if None not in (args.theta, args.lam, args.sigma):
        return _viable(OUParams(args.theta, args.lam, args.sigma))
    if weeks:
        cal = _latest_calibration(weeks, run)
        if not cal.valid:
            raise ModelError(f"lambda = {cal.lam:g}: the OU model is not viable on the latest window")
        _status(f"✓ Kalibriert ({run.scheme.label()}): theta={cal.theta:.6g} lambda={cal.lam:.6g} sigma={cal.sigma:.6g}")
        return cal.params
    raise ConfigError("OU parameters missing: give --theta with --kappa or --lam and --sigma, or --data")


def cmd_dist(args: Namespace, run: RunConfig) -> bool:
    """
    Tabulate the weekly return law.
    @param args: Parsed command line
    @param run: Resolved settings
    @return: Success status
    """
    ts, pc = run.strategy.ts_pips, run.strategy.pc_pips
    weeks = _load_weeks(run) if run.data_path is not None else None
    if args.match_pc is not None:
        if args.theta is None or args.x is None:
            raise ConfigError("--match-pc needs --theta and --x")
        kappa = kappa_for_pc_probability(args.match_pc, args.x, args.theta, ts * PIP, pc * PIP,
                                         args.sigma or REFERENCE_SIGMA)
        ou = OUParams.from_kappa(args.theta, kappa, args.sigma or REFERENCE_SIGMA)
    else:
        ou = _model(args, run, weeks)
    x = args.x
    if x is None:
        x = float(weeks[-1].close[-1]) if weeks else ou.theta
    problem = StoppedMaxProblem(start=x, drawdown=ts * PIP, ou=ou)
    if args.short:
        problem = mirror_short(problem)
    dist = return_distribution(problem, ts, pc, args.grid_size)
    expected = expected_weekly_return(problem, ts, pc)
    _status(f"✓ P(PC) = {dist.pc_atom:.6f}, E[W] = {expected:.6f} Pips (kappa = {ou.kappa:.6g})")
    write_output(distribution_frame(dist, expected, ou.kappa), run.output_format, run.output_path,
                 {"command": "dist", "theta": ou.theta, "lam": ou.lam, "sigma": ou.sigma, "x": x,
                  "ts_pips": ts, "pc_pips": pc, "side": "short" if args.short else "long"})
    return True


def cmd_calibrate(args: Namespace, run: RunConfig) -> bool:
    weeks = _load_weeks(run)
    series = series_from_sessions(weeks, run.sampling)
    estimates = rolling_estimates(series, run.scheme, args.step)
    rejected = sum(not e.result.valid for e in estimates)
    if rejected:
        _status(f"⚠ {rejected} von {len(estimates)} Schätzungen ohne Mean-Reversion (lambda <= 0)")
    write_output(calibration_frame(estimates), run.output_format, run.output_path,
                 {"command": "calibrate", "scheme": run.scheme.label(), "sampling": run.sampling})
    return bool(estimates)


def cmd_simulate(args: Namespace, run: RunConfig) -> bool:
    ou = _model(args, run)
    x = args.x if args.x is not None else ou.theta
    cfg = SimConfig(ou=ou, x0=x, dt=run.dt, horizon=args.horizon, n_paths=run.n_paths, seed=run.seed,
                    workers=run.workers)
    ts, pc = run.strategy.ts_pips, run.strategy.pc_pips
    if args.mode == "max":
        result = mc_stopped_max(cfg, ts * PIP)
    else:
        result = mc_weekly_returns(cfg, ts, pc)
    _status(f"✓ Seed {run.seed}: Mittelwert {result.mean:.6g}, Standardfehler {result.std_error:.3g}, "
            f"{result.censored} zensierte Pfade")
    write_output(histogram_frame(result, args.bins), run.output_format, run.output_path,
                 {"command": "simulate", "mode": args.mode, "seed": run.seed, "n_paths": run.n_paths,
                  "dt": run.dt, "mean": result.mean, "std_error": result.std_error, "censored": result.censored})
    return True


def cmd_backtest(args: Namespace, run: RunConfig) -> bool:
    weeks = _load_weeks(run)
    gate = None
    if args.gate:
        gate = CalibrationGate(weekly_calibrations(weeks, run.scheme, run.sampling), run.gate_mode, run.pc_floor)
    result = run_backtest(weeks, run.strategy, run.costs, run.exit_priority, gate)
    _status(f"✓ {run.strategy.label()}: Gesamt {result.total:.2f}, Mittel pro Woche {result.mean_weekly_return:.4f}")
    write_output(outcomes_frame(result.outcomes, result.cumulative), run.output_format, run.output_path,
                 {"command": "backtest", "params": list(run.strategy.as_tuple()), "gated": bool(args.gate)})
    return True


def cmd_optimize(args: Namespace, run: RunConfig) -> bool:
    weeks = _load_weeks(run)
    params, mean = optimize_grid(weeks, run.grid, run.costs, run.exit_priority, run.workers)
    _status(f"✓ Beste Parameter {params.label()} mit {mean:.4f} pro Woche")
    frame = pd.DataFrame([params.as_tuple() + (mean, len(weeks))],
                         columns=["u", "d", "ts", "pc", "mean_weekly_return", "n_weeks"])
    write_output(frame, run.output_format, run.output_path, {"command": "optimize", "grid_size": run.grid.size})
    return True


def cmd_walkforward(args: Namespace, run: RunConfig) -> bool:
    weeks = _load_weeks(run)
    totals = period_totals(weeks, run.grid, run.costs, run.exit_priority, run.period_weeks, run.workers)
    reports = [walk_forward(weeks, lookback, run.costs, run.grid, run.period_weeks, run.exit_priority,
                            run.workers, require_full_lookback=not args.partial, totals=totals)
               for lookback in run.lookbacks]
    frame = walkforward_cumulative_frame(reports) if args.cumulative else walkforward_frame(reports)
    _status(f"✓ Walk-Forward mit {len(reports)} Schema(ta) über {len(weeks)} Wochen")
    write_output(frame, run.output_format, run.output_path,
                 {"command": "walkforward", "period_weeks": run.period_weeks})
    return True


def cmd_pcreport(args: Namespace, run: RunConfig) -> bool:
    weeks = _load_weeks(run)
    side = Side(args.side) if args.side else None
    schemes = [EstimationScheme.parse(s) for s in (args.schemes or DEFAULT_PCREPORT_SCHEMES)]
    result = run_backtest(weeks, run.strategy, run.costs, run.exit_priority)
    predictions = {}
    for scheme in schemes:
        calibrations = weekly_calibrations(weeks, scheme, run.sampling)
        predictions[scheme.label()] = [p for p in weekly_predictions(result.outcomes, calibrations, run.strategy)
                                       if side is None or p.side is side]
    if args.predictions:
        write_output(predictions_frame(predictions), run.output_format, run.output_path,
                     {"command": "pcreport", "params": list(run.strategy.as_tuple())})
        return True

    common = set.intersection(*(set(p.week_id for p in rows) for rows in predictions.values()))
    if not common:
        _status("✗ Keine Woche mit Position und gültiger Kalibrierung in allen Schemata")
        return False
    by_week = {o.week_id: o for o in result.outcomes}
    reports = {}
    for label, rows in predictions.items():
        kept = [p for p in rows if p.week_id in common]
        reports[label] = pc_frequency_report([p.pc_probability for p in kept], [by_week[p.week_id] for p in kept])
    table = pc_frequency_table(reports).reset_index()
    first = next(iter(reports.values()))
    _status(f"✓ {first.n} Positionen, Gewinnmitnahme-Quote {first.actual_frequency:.3f}")
    write_output(table, run.output_format, run.output_path,
                 {"command": "pcreport", "n": first.n, "params": list(run.strategy.as_tuple())})
    return True


def cmd_design(args: Namespace, run: RunConfig) -> bool:
    weeks = _load_weeks(run) if run.data_path is not None else None
    ou = _model(args, run, weeks)
    cal = CalibrationResult(theta=ou.theta, lam=ou.lam, sigma=ou.sigma, valid=ou.usable, n_obs=0)
    zero = args.zero
    if zero is None:
        if not weeks:
            raise ConfigError("--zero is required without price data")
        zero = float(weeks[-1].close[-1])
    choices = design_week(cal, zero, run.strategy.u_pips, run.strategy.d_pips,
                          parse_range(args.ts_range, "ts"), parse_range(args.pc_range, "pc"), args.min_pc)
    if not choices:
        _status(f"⚠ Kein (TS, PC) erreicht P(PC) >= {args.min_pc}")
    write_output(design_frame(choices), run.output_format, run.output_path,
                 {"command": "design", "zero_level": zero, "theta": ou.theta, "kappa": ou.kappa})
    return True


COMMANDS: dict[str, Callable[[Namespace, RunConfig], bool]] = {
    "dist": cmd_dist,
    "calibrate": cmd_calibrate,
    "simulate": cmd_simulate,
    "backtest": cmd_backtest,
    "optimize": cmd_optimize,
    "walkforward": cmd_walkforward,
    "pcreport": cmd_pcreport,
    "design": cmd_design,
}


def handle_init_command(config_path: str, force: bool, verbose: bool) -> bool:
    """
    Write a configuration file holding the default settings.
    @param config_path: Path to config file
    @param force: Overwrite an existing file
    @param verbose: Whether to print verbose output
    @return: Success status
    """
    print("=== ouweekly Konfigurationsverwaltung ===\n", file=sys.stderr)
    expanded_path = os.path.expanduser(config_path)
    print(f"Konfigurationsdatei: {expanded_path}", file=sys.stderr)

    if os.path.exists(expanded_path) and not force:
        is_valid, message = validate_config(config_path, verbose)
        print(f"⚠ Datei existiert bereits ({message}); --force überschreibt sie", file=sys.stderr)
        return is_valid

    write_config(default_config(), config_path)
    print("✓ Standardkonfiguration geschrieben", file=sys.stderr)
    return True


def run(argv: Optional[list[str]] = None) -> int:
    """
    Execute one command and return the process exit code.
    """
    args = get_args(argv)
    success, config_path, verbose = check_global_arguments(args)
    if not success:
        print("✗ Kein Befehl angegeben. Verwenden Sie --help für verfügbare Befehle.", file=sys.stderr)
        return 1

    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    try:
        if args.command == "init":
            ok = handle_init_command(config_path, args.force, verbose)
        else:
            settings = resolve_run_config(args, read_config(config_path, verbose))
            ok = COMMANDS[args.command](args, settings)
    except OuWeeklyError as e:
        print(f"✗ [{e.category}] {e}", file=sys.stderr)
        return e.exit_code
    return 0 if ok else 1


def main() -> None:
    """
    Main entry point for the ouweekly CLI.
    """
    sys.exit(run())


if __name__ == "__main__":
    main()
