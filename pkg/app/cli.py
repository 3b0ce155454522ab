"""
Command-line interface

    python -m app <command> [options]

Every command writes its result to stdout (JSON, or CSV for tables) and plot
data files to --out-dir. Failures print the error JSON on stdout and exit with
2 (usage), 3 (data validation) or 4 (numerical failure).
"""
import argparse
import sys
from collections import Counter
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from pydantic import ValidationError

from app import __version__
from app.core.config import Settings, settings
from app.core.errors import DataValidationError, DomainError, NumericalError, PrecipError
from app.core.logger import logger
from app.core.responses import dump_json
from app.schemas.abtest import ExtremityClass
from app.schemas.extremes import Representation
from app.schemas.fit import Metric
from app.services import abtest, dispatch, extremes, gnbfit, pipeline, trend


class _Parser(argparse.ArgumentParser):
    """Reports usage errors as DomainError so they share the JSON error path"""

    def error(self, message: str):
        raise DomainError(message, details={"usage": self.format_usage().strip()})


# ============================================================================
# HELPERS
# ============================================================================

def _floats(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _emit_json(content) -> None:
    sys.stdout.write(dump_json(content, pretty=True).decode() + "\n")


def _emit_text(text: str) -> None:
    sys.stdout.write(text)


def _load_periods(args: argparse.Namespace, cfg: Settings) -> pipeline.WetPeriodColumns:
    series = pipeline.parse_daily_csv(args.input, cfg)
    periods = pipeline.segment_wet_periods(series, cfg.WET_THRESHOLD_MM)
    if not periods:
        raise DataValidationError(f"no wet periods above {cfg.WET_THRESHOLD_MM} mm in {args.input}")
    return pipeline.wet_period_columns(periods)


def _out_path(args: argparse.Namespace, name: str) -> Path:
    return Path(args.out_dir) / name


# ============================================================================
# COMMANDS
# ============================================================================

def run_fit_duration(args: argparse.Namespace, cfg: Settings) -> None:
    columns = _load_periods(args, cfg)
    h = gnbfit.build_histogram(columns.durations)
    metric = Metric(args.metric or cfg.FIT_METRIC)

    nb = gnbfit.fit_nb(h, config=cfg)
    if args.fixed_r == "nb":
        fixed_r: Optional[float] = nb.params.r
    else:
        fixed_r = float(args.fixed_r) if args.fixed_r is not None else None
    gnb = gnbfit.fit_gnb(h, fixed_r=fixed_r, metric=metric, config=cfg)

    rows = gnbfit.histogram_vs_pmf(h, gnb.params)
    nb_pmf = gnbfit.duration_pmf(len(rows), nb.params)
    path = pipeline.write_csv(
        _out_path(args, "duration_fit.csv"),
        ("k", "frequency", "pmf_gnb", "pmf_nb"),
        ((row["k"], row["frequency"], row["pmf"], nb_pmf[i]) for i, row in enumerate(rows)),
        cfg.CSV_DELIMITER,
    )

    _emit_json({**gnb.to_json_dict(), "n_periods": h.total, "nb": nb.to_json_dict(), "csv": path})


def run_fit_volume(args: argparse.Namespace, cfg: Settings) -> None:
    columns = _load_periods(args, cfg)
    params = abtest.fit_volume_gg(columns.totals, fixed_gamma=args.fixed_gamma)
    _emit_json({**params.model_dump(), "n_periods": len(columns.totals)})


def run_fit_extreme(args: argparse.Namespace, cfg: Settings) -> None:
    columns = _load_periods(args, cfg)
    fit = extremes.fit_extreme(columns.maxima, config=cfg)
    _emit_json({
        **fit.params.model_dump(by_alias=True),
        "distance": fit.distance,
        "alpha_hill": fit.alpha_hill,
        "n_periods": fit.n,
    })


def run_trend(args: argparse.Namespace, cfg: Settings) -> None:
    series = pipeline.parse_daily_csv(args.input, cfg)
    volumes = trend.nonzero_volumes(series.precip_mm)
    fit = trend.estimate_trend(volumes, args.m, config=cfg)
    beta = args.beta if args.beta is not None else fit.beta_hat

    averages = trend.cumulative_average_series(volumes, beta)
    path = pipeline.write_csv(
        _out_path(args, "cumulative_average.csv"),
        ("k", "value"),
        enumerate(averages, start=1),
        cfg.CSV_DELIMITER,
    )
    _emit_json({**fit.to_json_dict(), "series_beta": beta, "csv": path})


def run_scan(args: argparse.Namespace, cfg: Settings) -> None:
    columns = _load_periods(args, cfg)
    window = args.window or cfg.SCAN_WINDOW
    alpha_level = args.alpha or cfg.SCAN_ALPHA

    gamma = 1.0 if args.classic else args.gamma
    r = args.r
    if r is None or gamma is None:
        fitted = abtest.fit_volume_gg(columns.totals, fixed_gamma=gamma)
        r = fitted.r if r is None else r
        gamma = fitted.gamma if gamma is None else gamma

    votes = abtest.moving_window_scan(columns.totals, window, r, gamma, alpha_level, workers=cfg.WORKERS)
    path = pipeline.write_csv(
        _out_path(args, "scan.csv"),
        ("period_index", "start_date", "total_volume_mm", "class", "votes", "windows_containing"),
        (
            (v.index, columns.start_dates[v.index], columns.totals[v.index], v.extremity, v.votes, v.windows)
            for v in votes
        ),
        cfg.CSV_DELIMITER,
    )

    counts = Counter(v.extremity for v in votes)
    _emit_json({
        "window": window,
        "alpha": alpha_level,
        "r": r,
        "gamma": gamma,
        "classic": args.classic,
        "critical_value": abtest.critical_value(float(alpha_level), float(r), int(window)),
        "n_periods": len(votes),
        "counts": {c.value: counts.get(c, 0) for c in ExtremityClass},
        "csv": path,
    })


def run_dist(args: argparse.Namespace, cfg: Settings) -> None:
    params = dispatch.make_params(args.family, args.params)
    if args.points is None:
        raise DomainError(f"--{dispatch.argument_name(args.family, args.op)} is required")
    pairs = dispatch.evaluate(args.family, args.op, params, args.points, config=cfg)

    if len(pairs) == 1:
        _emit_json(pairs[0][1])
        return
    _emit_text(pipeline.format_csv((dispatch.argument_name(args.family, args.op), args.op), pairs, cfg.CSV_DELIMITER))


def run_simulate(args: argparse.Namespace, cfg: Settings) -> None:
    params = dispatch.make_params(args.family, args.params)
    draws = dispatch.sample(args.family, params, args.n, args.seed, args.representation)
    _emit_text(pipeline.format_csv(("index", "value"), enumerate(draws.tolist()), cfg.CSV_DELIMITER))


def run_thresholds(args: argparse.Namespace, cfg: Settings) -> None:
    params = dispatch.make_params("extreme", args.params)
    _emit_json([
        {"level": level, "threshold": extremes.abnormal_daily_threshold(params, level, rel_tol=cfg.QUAD_REL_TOL)}
        for level in args.levels
    ])


COMMANDS: Dict[str, Callable[[argparse.Namespace, Settings], None]] = {
    "fit-duration": run_fit_duration,
    "fit-volume": run_fit_volume,
    "fit-extreme": run_fit_extreme,
    "trend": run_trend,
    "scan": run_scan,
    "dist": run_dist,
    "simulate": run_simulate,
    "thresholds": run_thresholds,
}


# ============================================================================
# PARSER
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON config file with UPPER_CASE setting keys")
    common.add_argument("--out-dir", default=".", help="Directory for CSV outputs (default: current directory)")
    common.add_argument("--workers", type=int, default=None, help="Thread pool size")
    common.add_argument("--wet-threshold", type=float, default=None, help="Wet-day threshold in mm")

    parser = _Parser(prog="python -m app", description="Precipitation GG/GNB statistics")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-duration", parents=[common], help="NB and GNB fits of wet-period durations")
    p.add_argument("--input", required=True)
    p.add_argument("--fixed-r", default=None, help="Fix r at a value, or 'nb' to take it from the NB fit")
    p.add_argument("--metric", choices=[m.value for m in Metric], default=None)

    p = sub.add_parser("fit-volume", parents=[common], help="GG maximum-likelihood fit of wet-period totals")
    p.add_argument("--input", required=True)
    p.add_argument("--fixed-gamma", type=float, default=None)

    p = sub.add_parser("fit-extreme", parents=[common], help="Limit-law fit of wet-period daily maxima")
    p.add_argument("--input", required=True)

    p = sub.add_parser("trend", parents=[common], help="Stability parameters of cumulative precipitation")
    p.add_argument("--input", required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--beta", type=float, default=None, help="Exponent for the cumulative-average series")

    p = sub.add_parser("scan", parents=[common], help="Moving-window abnormality scan of wet-period totals")
    p.add_argument("--input", required=True)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--classic", action="store_true", help="Classical SR test (gamma = 1)")

    p = sub.add_parser("dist", parents=[common], help="Evaluate a distribution")
    p.add_argument("--family", choices=list(dispatch.PARAM_NAMES), required=True)
    p.add_argument("--op", required=True)
    p.add_argument("--params", type=_floats, required=True, help="Comma-separated parameters in family order")
    p.add_argument("--x", "--k", "--q", "--delta", dest="points", type=_floats, default=None)

    p = sub.add_parser("simulate", parents=[common], help="Seeded samples from a distribution")
    p.add_argument("--family", choices=list(dispatch.PARAM_NAMES), required=True)
    p.add_argument("--params", type=_floats, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--representation", choices=[r.value for r in Representation], default=None)

    p = sub.add_parser("thresholds", parents=[common], help="Abnormal daily-maximum thresholds")
    p.add_argument("--params", type=_floats, required=True, help="r,alpha,gamma,lambda")
    p.add_argument("--levels", type=_floats, default=[0.1, 0.05, 0.01])

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = settings.with_overrides(args.config, WORKERS=args.workers, WET_THRESHOLD_MM=args.wet_threshold)
        logger.info(f"Command {args.command} started")
        COMMANDS[args.command](args, cfg)
        logger.info(f"Command {args.command} finished")
        return 0

    except PrecipError as e:
        logger.error(f"{type(e).__name__}: {e.message}")
        _emit_json(e.to_dict())
        return e.exit_code

    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        _emit_json({"error": "ValidationError", "message": "invalid configuration", "details": {"errors": e.errors(include_url=False, include_context=False)}})
        return DomainError.exit_code

    except (FileNotFoundError, ValueError) as e:
        logger.error(f"Invalid input: {e}")
        _emit_json({"error": type(e).__name__, "message": str(e), "details": {}})
        return DomainError.exit_code

    except Exception as e:
        logger.exception(f"Command failed: {e}")
        _emit_json({"error": type(e).__name__, "message": str(e), "details": {}})
        return NumericalError.exit_code
