"""Command-line front end.

Entry point: python -m fininfo.cli <subcommand> [options]   (or the ``fininfo`` script)

Subcommands:
  entropy    Rolling k-NN differential entropy of log returns (--prices)
  kl         Rolling histogram KL vs the preceding window, z-scores and regime flags
  nmi        Rolling NMI between r_t and its lagged past
  te         Rolling transfer entropy source -> target (--source, --target)
  var        Entropy-adjusted VaR: one value (--kl --mu --sigma) or a series (--prices)
  signals    NMI momentum signals (--prices)
  diversify  Simplex search on the diversification functional (repeated --asset)
  synth      Seeded synthetic series (--kind)
  backtest   One-step-ahead backtest of a signals file (--prices --signals)

Input files are CSV (``date,price`` or the emitted ``timestamp,value``) or JSON
records. Results go to stdout or --output as CSV with 9 significant digits or
JSON (--format json). Progress and errors go to stderr with a [fininfo] prefix.

Analysis parameters default to AnalysisConfig and can be overridden through
FININFO_* environment variables, then by flags (--window, --knn-k, ...).

Exit codes:
  0  success
  1  unexpected error
  2  usage error
  3  invalid parameters or input values
  4  unreadable input file
  5  not enough data for the requested windows
  6  estimation failure
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections.abc import Callable, Sequence
from functools import reduce
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from fininfo.config import AnalysisConfig, RollingSpec
from fininfo.errors import FinInfoError, UsageError
from fininfo.estimators import SampleMatrix
from fininfo.finance import (
    PortfolioWeights,
    SignalSeries,
    VarAdjustmentInputs,
    backtest_signals,
    entropy_adjusted_var,
    entropy_adjusted_var_series,
    optimize_diversification,
    signals_from_nmi,
    var_multiplier,
)
from fininfo.io import load_prices, load_returns, load_series, write_record, write_table
from fininfo.oracles import GeneratorSpec, generate
from fininfo.rolling import (
    efficiency_fraction,
    rolling_entropy,
    rolling_kl,
    rolling_nmi,
    rolling_transfer_entropy,
    standardize_and_flag,
)
from fininfo.series import ReturnSeries, WindowDiagnostic

logger = logging.getLogger(__name__)

Result = pd.DataFrame | pd.Series | dict[str, Any]

# AnalysisConfig fields settable from the command line.
_CONFIG_FLAGS: dict[str, type] = {
    "window": int,
    "knn_k": int,
    "jitter_sigma": float,
    "bins": int,
    "smoothing": float,
    "lag": int,
    "theta_nmi": float,
    "theta_kl": float,
    "beta": float,
    "stride": int,
    "seed": int,
    "workers": int,
}


def _err(message: str) -> None:
    print(f"[fininfo] {message}", file=sys.stderr)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _returns(args: argparse.Namespace) -> ReturnSeries:
    if not args.prices:
        raise UsageError(f"{args.command} needs --prices FILE")
    return load_returns(args.prices, args.format_in, strict=args.strict)


def _cmd_entropy(cfg: AnalysisConfig, args: argparse.Namespace) -> Result:
    r = _returns(args)
    return rolling_entropy(r, cfg.rolling(), cfg.knn(), workers=cfg.workers).rename("value")


def _kl_spec(cfg: AnalysisConfig, args: argparse.Namespace) -> RollingSpec:
    spec = cfg.rolling()
    return spec.non_overlapping() if args.non_overlapping else spec


def _cmd_kl(cfg: AnalysisConfig, args: argparse.Namespace) -> Result:
    r = _returns(args)
    kl = rolling_kl(
        r, _kl_spec(cfg, args), bins=cfg.bins, smoothing=cfg.smoothing, workers=cfg.workers
    )
    regime = standardize_and_flag(
        kl, mu=args.mu, sigma=args.sigma, threshold=cfg.theta_kl, expanding=args.expanding
    )
    if regime.flag.any():
        logger.info("%d regime flags, first at %s", int(regime.flag.sum()), regime.flagged[0])
    return regime.to_frame()


def _nmi_series(cfg: AnalysisConfig, args: argparse.Namespace, r: ReturnSeries) -> pd.Series:
    diagnostics: list[WindowDiagnostic] = []
    spec = cfg.rolling(past_len_target=args.past_len)
    nmi = rolling_nmi(r, spec, cfg.knn(), workers=cfg.workers, diagnostics=diagnostics)
    if diagnostics:
        logger.warning(
            "%d window(s) had a non-positive marginal entropy, first at %s",
            len(diagnostics),
            diagnostics[0].timestamp,
        )
    logger.info(
        "NMI below %.3g in %.1f%% of windows",
        cfg.theta_nmi,
        100 * efficiency_fraction(nmi, cfg.theta_nmi),
    )
    return nmi


def _cmd_nmi(cfg: AnalysisConfig, args: argparse.Namespace) -> Result:
    return _nmi_series(cfg, args, _returns(args)).rename("value")


def _cmd_te(cfg: AnalysisConfig, args: argparse.Namespace) -> Result:
    if not (args.source and args.target):
        raise UsageError("te needs --source FILE and --target FILE")
    x = load_returns(args.source, args.format_in, strict=args.strict, column=args.source_column)
    y = load_returns(args.target, args.format_in, strict=args.strict, column=args.target_column)
    spec = cfg.rolling(past_len_target=args.past_len_target, past_len_source=args.past_len_source)
    knn = cfg.knn()
    diagnostics: list[WindowDiagnostic] = []
    forward = rolling_transfer_entropy(
        x, y, spec, knn, workers=cfg.workers, diagnostics=diagnostics
    )
    for d in diagnostics:
        logger.info("%s: %s", d.timestamp, d.reason)
    frame = forward.rename("value").to_frame()
    if args.both:
        reverse_spec = cfg.rolling(
            past_len_target=args.past_len_source, past_len_source=args.past_len_target
        )
        frame["reverse"] = rolling_transfer_entropy(y, x, reverse_spec, knn, workers=cfg.workers)
    return frame


def _cmd_var(cfg: AnalysisConfig, args: argparse.Namespace) -> Result:
    if args.prices:
        r = load_returns(args.prices, args.format_in, strict=args.strict)
        return entropy_adjusted_var_series(
            r,
            args.base_var,
            _kl_spec(cfg, args),
            bins=cfg.bins,
            smoothing=cfg.smoothing,
            beta=cfg.beta,
            threshold=cfg.theta_kl,
            workers=cfg.workers,
        )
    if args.kl is None or args.mu is None or args.sigma is None:
        raise UsageError("var needs --kl, --mu and --sigma (or --prices FILE)")
    inp = VarAdjustmentInputs(
        base_var=args.base_var,
        kl_now=args.kl,
        mu_kl=args.mu,
        sigma_kl=args.sigma,
        beta=cfg.beta,
    )
    return {"adjusted_var": entropy_adjusted_var(inp), "multiplier": var_multiplier(inp)}


def _cmd_signals(cfg: AnalysisConfig, args: argparse.Namespace) -> Result:
    r = _returns(args)
    nmi = _nmi_series(cfg, args, r)
    signals = signals_from_nmi(nmi, r, cfg.theta_nmi)
    return pd.DataFrame(
        {"value": nmi.to_numpy(), "signal": signals.signals}, index=signals.timestamps
    )


def _asset_labels(paths: Sequence[str]) -> list[str]:
    """File stems, or paths under the files' common parent when stems repeat."""
    resolved = [Path(p).resolve() for p in paths]
    if len(set(resolved)) != len(resolved):
        raise UsageError("the same --asset file was given more than once")
    stems = [p.stem for p in resolved]
    if len(set(stems)) == len(stems):
        return stems
    root = Path(os.path.commonpath(resolved))
    relative = [p.relative_to(root) for p in resolved]
    labels = [r.with_suffix("").as_posix() for r in relative]
    if len(set(labels)) == len(labels):
        return labels
    return [r.as_posix() for r in relative]


def _cmd_diversify(cfg: AnalysisConfig, args: argparse.Namespace) -> Result:
    paths = args.asset or []
    if len(paths) < 2:
        raise UsageError("diversify needs at least two --asset FILE")
    labels = _asset_labels(paths)
    series = [load_returns(p, args.format_in, strict=args.strict) for p in paths]
    common = reduce(lambda a, b: a.intersection(b), (s.timestamps for s in series))
    dropped = max(1.0 - len(common) / len(s) for s in series)
    if dropped > 0.10:
        logger.warning("asset alignment dropped %.1f%% of rows", 100 * dropped)
    assets = SampleMatrix(
        np.column_stack([s.to_series().reindex(common).to_numpy() for s in series])
    )
    initial = PortfolioWeights.normalized(args.initial) if args.initial else None
    result = optimize_diversification(
        assets, args.sense, cfg.knn(), args.budget, initial, workers=cfg.workers
    )
    record: dict[str, Any] = {"objective": result.objective, "evaluations": result.evaluations}
    for label, w in zip(labels, result.weights.weights, strict=True):
        record[f"weight_{label}"] = float(w)
    return record


def _cmd_synth(cfg: AnalysisConfig, args: argparse.Namespace) -> Result:
    params = {
        name: getattr(args, name)
        for name in (
            "sigma", "low", "high", "rho", "phi", "coupling",
            "sigma_eps", "sigma_pre", "sigma_post", "switch",
        )
        if getattr(args, name) is not None
    }
    spec = GeneratorSpec(kind=args.kind, n=args.n, seed=cfg.seed, **params)
    out = generate(spec)
    if isinstance(out, tuple):
        x, y = out
        return pd.DataFrame({"x": x.values, "y": y.values}, index=x.timestamps)
    return out.to_series("value")


def _cmd_backtest(cfg: AnalysisConfig, args: argparse.Namespace) -> Result:
    if not (args.prices and args.signals):
        raise UsageError("backtest needs --prices FILE and --signals FILE")
    prices = load_prices(args.prices, args.format_in, strict=args.strict)
    table = load_series(args.signals, args.format_in)
    if "signal" not in table.columns:
        raise UsageError(f"{args.signals}: no 'signal' column")
    summary = backtest_signals(
        prices, SignalSeries.from_series(table["signal"]), cost_per_trade=args.cost
    )
    if args.pnl:
        return summary.pnl.rename("value")
    return summary.as_dict()


COMMANDS: dict[str, Callable[[AnalysisConfig, argparse.Namespace], Result]] = {
    "entropy": _cmd_entropy,
    "kl": _cmd_kl,
    "nmi": _cmd_nmi,
    "te": _cmd_te,
    "var": _cmd_var,
    "signals": _cmd_signals,
    "diversify": _cmd_diversify,
    "synth": _cmd_synth,
    "backtest": _cmd_backtest,
}


def run_subcommand(name: str, config: AnalysisConfig, inputs: argparse.Namespace) -> Result:
    """Run one subcommand and return its output table or one-row record.

    Raises:
        UsageError: unknown subcommand or missing inputs.
        FinInfoError: any library failure, carrying its exit code.
    """
    try:
        handler = COMMANDS[name]
    except KeyError:
        raise UsageError(f"unknown subcommand {name!r}") from None
    return handler(config, inputs)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    io = common.add_argument_group("input/output")
    io.add_argument("--format", choices=["csv", "json"], default="csv", help="Output format")
    io.add_argument(
        "--input-format",
        dest="format_in",
        choices=["csv", "json"],
        default="csv",
        help="Input file format",
    )
    io.add_argument("--output", "-o", type=Path, help="Write results here instead of stdout")
    io.add_argument(
        "--plot-data", action="store_true", help="Emit long timestamp,series,value rows"
    )
    io.add_argument("--strict", action="store_true", help="Reject unsorted input files")
    io.add_argument("-v", "--verbose", action="count", default=0, help="-v INFO, -vv DEBUG")

    params = common.add_argument_group("analysis parameters (override FININFO_* variables)")
    for name, kind in _CONFIG_FLAGS.items():
        params.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind, default=None)
    params.add_argument("--metric", choices=["chebyshev", "euclidean"], default=None)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="fininfo", description="Information-theoretic analytics for return series"
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common], help=help_text, description=help_text)

    p = add("entropy", "Rolling differential entropy")
    p.add_argument("--prices", help="Price or return file")

    p = add("kl", "Rolling KL divergence with regime flags")
    p.add_argument("--prices", help="Price or return file")
    p.add_argument("--mu", type=float, help="Baseline KL mean (default: full sample)")
    p.add_argument("--sigma", type=float, help="Baseline KL std (default: full sample)")
    p.add_argument("--expanding", action="store_true", help="Expanding-window baseline")
    p.add_argument("--non-overlapping", action="store_true", help="Stride = window")

    for name, text in (
        ("nmi", "Rolling NMI against lagged returns"),
        ("signals", "NMI momentum signals"),
    ):
        p = add(name, text)
        p.add_argument("--prices", help="Price or return file")
        p.add_argument("--past-len", type=int, default=1, help="Lagged block length k")

    p = add("te", "Rolling transfer entropy source -> target")
    p.add_argument("--source", help="Source (X) price or return file")
    p.add_argument("--target", help="Target (Y) price or return file")
    p.add_argument("--source-column", help="Column to read from the source file")
    p.add_argument("--target-column", help="Column to read from the target file")
    p.add_argument("--past-len-target", type=int, default=1)
    p.add_argument("--past-len-source", type=int, default=1)
    p.add_argument("--both", action="store_true", help="Also emit target -> source as 'reverse'")

    p = add("var", "Entropy-adjusted VaR")
    p.add_argument("--prices", help="Compute a VaR series from rolling KL")
    p.add_argument("--kl", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--base-var", type=float, default=1.0)
    p.add_argument("--non-overlapping", action="store_true", help="Stride = window")

    p = add("diversify", "Optimize the diversification functional over the simplex")
    p.add_argument("--asset", action="append", help="Asset price or return file (repeat)")
    p.add_argument("--sense", choices=["minimize", "maximize"], default="minimize")
    p.add_argument("--budget", type=int, default=64, help="Objective evaluations")
    p.add_argument("--initial", type=float, nargs="+", help="Starting weights")

    p = add("synth", "Generate a seeded synthetic series")
    p.add_argument(
        "--kind",
        required=True,
        choices=[
            "iid_gaussian", "iid_uniform", "correlated_gaussian_pair",
            "ar1", "coupled_lag_pair", "variance_switch",
        ],
    )
    p.add_argument("--n", type=int, default=2016)
    for name in ("sigma", "low", "high", "rho", "phi", "coupling", "sigma-eps",
                 "sigma-pre", "sigma-post"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--switch", type=int)

    p = add("backtest", "Backtest a signals file")
    p.add_argument("--prices", help="Price file")
    p.add_argument("--signals", help="Output of the signals subcommand")
    p.add_argument("--cost", type=float, default=0.0, help="Cost per unit position change")
    p.add_argument("--pnl", action="store_true", help="Emit per-period PnL instead of a summary")
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(
        level=level,
        format="[fininfo] %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def main(argv: Sequence[str] | None = None) -> None:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)

    overrides = {name: getattr(args, name) for name in _CONFIG_FLAGS}
    overrides["metric"] = args.metric
    try:
        config = AnalysisConfig.from_env(**overrides)
        logger.debug("config: %s", config.model_dump())
        result = run_subcommand(args.command, config, args)
        if isinstance(result, dict):
            write_record(result, args.output, args.format)
        else:
            write_table(result, args.output, args.format, plot_data=args.plot_data)
    except FinInfoError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        sys.exit(exc.exit_code)
    except Exception as exc:
        _err(f"unexpected error: {exc!r}")
        sys.exit(1)
    sys.exit(0)


if __name__ == "__main__":
    main()
