import sys
from argparse import ArgumentParser, Namespace
from os.path import expanduser
from typing import Optional, Sequence

from .config.operations import DEFAULT_CONFIG_PATH


def _add_output_args(parser: ArgumentParser) -> None:
    parser.add_argument("--format", choices=["csv", "json"], help="Output format (default csv)")
    parser.add_argument("--out", help="Output file, stdout if omitted")


def _add_data_args(parser: ArgumentParser) -> None:
    parser.add_argument("--data", help="Price file: timestamp,open,high,low,close (or timestamp,price)")
    parser.add_argument("--kind", choices=["candles", "ticks"], help="Layout of the price file")


def _add_strategy_args(parser: ArgumentParser) -> None:
    parser.add_argument("--u", type=int, help="Short trigger above the zero level (pips)")
    parser.add_argument("--d", type=int, help="Long trigger below the zero level (pips)")
    parser.add_argument("--ts", type=int, help="Trailing stop (pips)")
    parser.add_argument("--pc", type=int, help="Profit call (pips)")
    parser.add_argument("--exit-priority", choices=["pc_first", "ts_first", "nearest_open"],
                        help="Exit taken when one sample touches both PC and TS")


def _add_cost_args(parser: ArgumentParser) -> None:
    parser.add_argument("--notional", type=float, help="Position size in account currency")
    parser.add_argument("--leverage", type=float, help="Leverage ratio")
    parser.add_argument("--commission", type=float, help="Overnight commission per night (fraction)")


def _add_estimation_args(parser: ArgumentParser) -> None:
    parser.add_argument("--scheme", help="Estimation scheme: rolling:22 or expanding")
    parser.add_argument("--sampling", choices=["hourly", "daily"], help="Calibration sampling")


def _add_model_args(parser: ArgumentParser) -> None:
    parser.add_argument("--theta", type=float, help="Long-term mean")
    parser.add_argument("--lam", type=float, help="Mean-reversion rate per week")
    parser.add_argument("--sigma", type=float, help="Volatility per square-root week")
    parser.add_argument("--kappa", type=float, help="Ratio lambda/sigma^2 (sigma defaults to 0.01)")


def get_args(argv: Optional[Sequence[str]] = None) -> Namespace:
    "Argument parser for the OU weekly strategy toolkit"
    parser = ArgumentParser(description="Mean-reverting weekly FX strategy: model, calibration, simulation and backtests")

    # Global arguments
    parser.add_argument("--verbose",
                        action="store_true",
                        help="Enable verbose output")

    parser.add_argument("--config",
                        default=DEFAULT_CONFIG_PATH,
                        help="Path to configuration file")

    # Subcommands
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    init_parser = subparsers.add_parser("init", help="Write a configuration file with the default settings")
    init_parser.add_argument("--force", action="store_true", help="Overwrite an existing file")

    dist_parser = subparsers.add_parser("dist", help="Weekly return law of a long position")
    _add_model_args(dist_parser)
    _add_strategy_args(dist_parser)
    _add_data_args(dist_parser)
    _add_estimation_args(dist_parser)
    dist_parser.add_argument("--x", type=float, help="Opening level (default: last close or theta)")
    dist_parser.add_argument("--short", action="store_true", help="Describe a short position instead")
    dist_parser.add_argument("--match-pc", type=float,
                             help="Choose kappa so that P(PC) equals this value at the given theta")
    dist_parser.add_argument("--grid-size", type=int, default=512, help="Points of the density grid")
    _add_output_args(dist_parser)

    calibrate_parser = subparsers.add_parser("calibrate", help="Rolling or expanding OU estimates")
    _add_data_args(calibrate_parser)
    _add_estimation_args(calibrate_parser)
    calibrate_parser.add_argument("--step", type=int, help="Samples between estimates (default one week)")
    _add_output_args(calibrate_parser)

    simulate_parser = subparsers.add_parser("simulate", help="Monte Carlo stopped maxima or weekly returns")
    _add_model_args(simulate_parser)
    _add_strategy_args(simulate_parser)
    simulate_parser.add_argument("--x", type=float, help="Starting level (default theta)")
    simulate_parser.add_argument("--mode", choices=["max", "returns"], default="returns",
                                 help="Simulate stopped maxima or weekly returns")
    simulate_parser.add_argument("--horizon", type=float, help="Bounded horizon in weeks")
    simulate_parser.add_argument("--paths", type=int, help="Number of paths")
    simulate_parser.add_argument("--dt", type=float, help="Step in weeks")
    simulate_parser.add_argument("--seed", type=int, help="Random seed")
    simulate_parser.add_argument("--workers", type=int, help="Worker threads")
    simulate_parser.add_argument("--bins", type=int, default=100, help="Histogram bins")
    _add_output_args(simulate_parser)

    backtest_parser = subparsers.add_parser("backtest", help="Trade the strategy over historical weeks")
    _add_data_args(backtest_parser)
    _add_strategy_args(backtest_parser)
    _add_cost_args(backtest_parser)
    _add_estimation_args(backtest_parser)
    backtest_parser.add_argument("--gate", action="store_true", help="Filter positions with the calibrated model")
    backtest_parser.add_argument("--gate-mode", choices=["skip", "opposite"], help="What a gated week does")
    backtest_parser.add_argument("--pc-floor", type=float, help="Smallest P(PC) a gated position needs")
    _add_output_args(backtest_parser)

    optimize_parser = subparsers.add_parser("optimize", help="Exhaustive (U, D, TS, PC) search")
    _add_data_args(optimize_parser)
    _add_cost_args(optimize_parser)
    optimize_parser.add_argument("--grid", help="Grid, e.g. u=10:60,d=10:60,ts=40:70,pc=0:15 (pc over TS)")
    optimize_parser.add_argument("--exit-priority", choices=["pc_first", "ts_first", "nearest_open"])
    optimize_parser.add_argument("--workers", type=int, help="Worker threads")
    _add_output_args(optimize_parser)

    walkforward_parser = subparsers.add_parser("walkforward", help="Fit on past periods, trade the next one")
    _add_data_args(walkforward_parser)
    _add_cost_args(walkforward_parser)
    walkforward_parser.add_argument("--grid", help="Parameter grid")
    walkforward_parser.add_argument("--exit-priority", choices=["pc_first", "ts_first", "nearest_open"])
    walkforward_parser.add_argument("--lookback", help="Periods per fit, comma separated, 'expanding' for all")
    walkforward_parser.add_argument("--period-weeks", type=int, help="Weeks per period")
    walkforward_parser.add_argument("--partial", action="store_true",
                                    help="Also fit before the full lookback is available")
    walkforward_parser.add_argument("--cumulative", action="store_true",
                                    help="Emit the weekly out-of-sample P&L instead of the summary")
    walkforward_parser.add_argument("--workers", type=int, help="Worker threads")
    _add_output_args(walkforward_parser)

    pcreport_parser = subparsers.add_parser("pcreport", help="Actual vs predicted profit-call frequency")
    _add_data_args(pcreport_parser)
    _add_strategy_args(pcreport_parser)
    _add_cost_args(pcreport_parser)
    pcreport_parser.add_argument("--scheme", action="append", dest="schemes",
                                 help="Estimation scheme, repeat to compare (default rolling:22 and expanding)")
    pcreport_parser.add_argument("--sampling", choices=["hourly", "daily"], help="Calibration sampling")
    pcreport_parser.add_argument("--side", choices=["long", "short"], help="Restrict to one side")
    pcreport_parser.add_argument("--predictions", action="store_true",
                                 help="Emit the per-week predictions instead of the summary")
    _add_output_args(pcreport_parser)

    design_parser = subparsers.add_parser("design", help="Model-driven TS and PC for the coming week")
    _add_model_args(design_parser)
    _add_data_args(design_parser)
    _add_estimation_args(design_parser)
    design_parser.add_argument("--u", type=int, help="Short trigger (pips)")
    design_parser.add_argument("--d", type=int, help="Long trigger (pips)")
    design_parser.add_argument("--zero", type=float, help="Zero level (default: last close)")
    design_parser.add_argument("--ts-range", default="40:70:5", help="Trailing stops to try, lo:hi[:step]")
    design_parser.add_argument("--pc-range", default="0:15:5", help="PC offsets over TS to try, lo:hi[:step]")
    design_parser.add_argument("--min-pc", type=float, default=0.40, help="Smallest acceptable P(PC)")
    _add_output_args(design_parser)

    return parser.parse_args(argv)


def check_global_arguments(args: Namespace) -> tuple[bool, str, bool]:
    """
    Check and validate global command-line arguments.
    @param args: Parsed command-line arguments
    @return: (is_valid, config_path, verbose)
    """
    # Check and print global arguments
    if args.verbose:
        print("Verbose mode is enabled", file=sys.stderr)
        print(f"Using configuration file: {args.config}", file=sys.stderr)
        print(f"Command: {args.command}", file=sys.stderr)

    # Expandiere ~ zu Home-Verzeichnis
    config_path = expanduser(args.config)

    if args.command is None:
        return False, config_path, args.verbose

    return True, config_path, args.verbose
