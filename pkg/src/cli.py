#!/usr/bin/env python
"""
Command-line interface for the private trading bot simulator.

    python src/cli.py --seed 7 --out out train --candles data/candles.csv --top 5
    python src/cli.py simulate --candles data/candles.csv --params 20.6.14.14 --rounds 1000
    python src/cli.py report --manifest out/manifest_train.json

Every command writes a run manifest listing its settings, input digests and
output digests. `report --manifest` replays the command and compares outputs
(writing no manifest of its own).
"""

import argparse
import json
import sys
import tempfile
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from pydantic import BaseModel, ValidationError

sys.path.insert(0, str(Path(__file__).parent))

from config.bot_config import (  # noqa: E402
    DEFAULT_PERIOD_SECONDS,
    EXIT_BAD_ARGS,
    EXIT_BAD_DATA,
    EXIT_INTERNAL,
    EXIT_OK,
    RunSettings,
    load_config_file,
)
from services.chain_sim import GasSchedule, LatencyModel, PhaseLatency  # noqa: E402
from services.market_data import (  # noqa: E402
    PriceSeries,
    load_candles,
    resample,
    select_periods,
    split_periods,
    synthetic_series,
    write_candles,
)
from services.orchestrator import EpochConfig, run_epoch, write_full_trace, write_public_trace  # noqa: E402
from services.strategy import ParamConfig, parse_config  # noqa: E402
from services.training import (  # noqa: E402
    RankingMethod,
    RankingReport,
    evaluate,
    frequency_study,
    frequency_table,
    train,
)
from utils.errors import DataError  # noqa: E402
from utils.file_utils import file_sha256, write_csv, write_json  # noqa: E402
from utils.logger_config import get_logger, setup_logging  # noqa: E402

logger = get_logger("cli")

REPORT_COLUMNS = ["config", "max", "min", "mean", "stddev"]


class UsageError(Exception):
    """Bad command-line usage detected after parsing"""


class RunManifest(BaseModel):
    command: str
    args: Dict[str, Any]
    settings: Dict[str, Any]
    inputs: Dict[str, str]
    outputs: Dict[str, str]
    seed: int


def _periods_arg(value: str) -> List[int]:
    try:
        periods = [int(p) for p in value.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"periods must be comma-separated seconds, got {value!r}")
    if not periods or any(p <= 0 for p in periods):
        raise argparse.ArgumentTypeError(f"periods must be positive seconds, got {value!r}")
    return periods


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trading-bot", description="Private on-chain trading bot simulator")
    parser.add_argument("--seed", type=int, default=None, help="Seed for every random stream")
    parser.add_argument("--config", default=None, help="YAML or JSON run configuration file")
    parser.add_argument("--out", default="out", help="Output directory")
    parser.add_argument("--show-config", action="store_true", help="Print the merged settings and exit")
    sub = parser.add_subparsers(dest="command")

    def candles(p, required=True):
        p.add_argument("--candles", required=required, help="Candle CSV (timestamp,open,high,low,close,volume)")
        p.add_argument("--pair", default=None, help="Asset pair label, e.g. ETH:USDC")
        p.add_argument("--input-period", type=int, default=DEFAULT_PERIOD_SECONDS,
                       help="Candle spacing of the input file in seconds")
        p.add_argument("--period", type=int, default=None, help="Trading period in seconds")

    def training(p):
        p.add_argument("--stride", type=int, default=None, help="Window selection stride in seconds")
        p.add_argument("--top", type=int, default=None, help="Number of configurations to keep")
        p.add_argument("--fees-bps", type=int, default=None)
        p.add_argument("--initial-cents", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("ingest", help="Validate a candle file (or generate a synthetic one) and write it normalised")
    candles(p, required=False)
    p.add_argument("--synthetic", type=int, default=None, metavar="N", help="Generate N seeded hourly candles")

    p = sub.add_parser("periods", help="Select losing 30-day windows and split them")
    candles(p)
    p.add_argument("--stride", type=int, default=None)

    p = sub.add_parser("train", help="Grid-search and rank parameter configurations")
    candles(p)
    training(p)
    p.add_argument("--method", choices=["sharpe", "avg", "both"], default="both")

    p = sub.add_parser("evaluate", help="Backtest ranked configurations over the testing windows")
    candles(p)
    training(p)
    p.add_argument("--ranking", required=True, help="Ranking JSON written by train")

    p = sub.add_parser("frequency", help="Repeat training and testing at several trading periods")
    candles(p)
    training(p)
    p.add_argument("--periods", type=_periods_arg, required=True, help="e.g. 60,600,3600")
    p.add_argument("--method", choices=["sharpe", "avg"], default=None)

    p = sub.add_parser("simulate", help="Run an epoch of on-chain trade rounds")
    candles(p)
    p.add_argument("--params", default=None, help="Configuration label N.D.U.L")
    p.add_argument("--ranking", default=None, help="Use the top configuration of a ranking JSON")
    p.add_argument("--rounds", type=int, default=None)
    p.add_argument("--users", type=int, default=None)
    p.add_argument("--deposit", type=float, default=None, help="Deposit per user in dollars")
    p.add_argument("--slippage-bps", type=int, default=None)
    p.add_argument("--gas-price-gwei", type=float, default=None)
    p.add_argument("--eth-usd", type=float, default=None)
    p.add_argument("--no-jitter", action="store_true", help="Pin verifier gas to its mean")
    p.add_argument("--latency-family", choices=["lognormal", "uniform"], default=None)

    p = sub.add_parser("report", help="Replay a manifest or summarise an epoch report")
    p.add_argument("--manifest", default=None, help="Manifest to replay and check")
    p.add_argument("--epoch", default=None, help="Epoch report JSON to summarise")
    return parser


def resolve_settings(args: argparse.Namespace) -> RunSettings:
    file_data = load_config_file(args.config) if args.config else {}
    deposit = getattr(args, "deposit", None)
    method = getattr(args, "method", None)
    overrides = {
        "seed": args.seed,
        "pair": getattr(args, "pair", None),
        "period_seconds": getattr(args, "period", None),
        "stride_seconds": getattr(args, "stride", None),
        "method": method if method in ("sharpe", "avg") else None,
        "top": getattr(args, "top", None),
        "fees_bps": getattr(args, "fees_bps", None),
        "initial_cents": getattr(args, "initial_cents", None),
        "workers": getattr(args, "workers", None),
        "rounds": getattr(args, "rounds", None),
        "users": getattr(args, "users", None),
        "deposit_cents": int(round(deposit * 100)) if deposit is not None else None,
        "slippage_bps": getattr(args, "slippage_bps", None),
        "gas_price_gwei": getattr(args, "gas_price_gwei", None),
        "eth_usd": getattr(args, "eth_usd", None),
        "jitter": False if getattr(args, "no_jitter", False) else None,
        "latency_family": getattr(args, "latency_family", None),
    }
    return RunSettings.resolve(file_data, overrides)


def _load_series(args, settings: RunSettings) -> PriceSeries:
    series = load_candles(args.candles, settings.pair, args.input_period)
    if settings.period_seconds != series.period_seconds:
        series = resample(series, settings.period_seconds)
    return series


def _write_report(report: RankingReport, out: Path, stem: str) -> List[Path]:
    return [
        write_csv(report.table(), out / f"{stem}.csv", columns=REPORT_COLUMNS),
        write_json(report.model_dump(mode="json"), out / f"{stem}.json"),
    ]


def _windows(series: PriceSeries, settings: RunSettings):
    return split_periods(select_periods(series, settings.stride_seconds))


def cmd_ingest(args, settings: RunSettings, out: Path) -> List[Path]:
    if args.synthetic is not None:
        series = synthetic_series(settings.seed, args.synthetic, pair=settings.pair)
    elif args.candles:
        series = _load_series(args, settings)
    else:
        raise UsageError("ingest needs --candles or --synthetic")
    summary = {
        "pair": series.pair,
        "period_seconds": series.period_seconds,
        "candles": len(series),
        "first_timestamp": series.first_timestamp,
        "last_timestamp": series.last_timestamp,
    }
    return [write_candles(series, out / "candles.csv"), write_json(summary, out / "ingest.json")]


def cmd_periods(args, settings: RunSettings, out: Path) -> List[Path]:
    series = _load_series(args, settings)
    train_windows, test_windows = _windows(series, settings)
    data = {
        "period_seconds": series.period_seconds,
        "train": [w.model_dump(mode="json") for w in train_windows],
        "test": [w.model_dump(mode="json") for w in test_windows],
    }
    return [write_json(data, out / "periods.json")]


def cmd_train(args, settings: RunSettings, out: Path) -> List[Path]:
    series = _load_series(args, settings)
    train_windows, _ = _windows(series, settings)
    methods = ["avg", "sharpe"] if args.method == "both" else [args.method]
    outputs = []
    for m in methods:
        report = train(series, train_windows, RankingMethod(m), settings.top,
                       fees_bps=settings.fees_bps, initial=settings.initial_cents, workers=settings.workers)
        outputs += _write_report(report, out, f"training_{m}")
    return outputs


def cmd_evaluate(args, settings: RunSettings, out: Path) -> List[Path]:
    series = _load_series(args, settings)
    _, test_windows = _windows(series, settings)
    ranking = RankingReport.model_validate_json(Path(args.ranking).read_text(encoding="utf-8"))
    report = evaluate(ranking, series, test_windows, settings.fees_bps, settings.initial_cents, settings.workers)
    return _write_report(report, out, f"testing_{ranking.method.value}")


def cmd_frequency(args, settings: RunSettings, out: Path) -> List[Path]:
    series = load_candles(args.candles, settings.pair, args.input_period)
    reports = frequency_study(series, args.periods, settings.top, RankingMethod(settings.method),
                              settings.stride_seconds, settings.fees_bps, settings.initial_cents, settings.workers)
    outputs = []
    for period, report in reports:
        outputs += _write_report(report, out, f"frequency_{period}")
    outputs.append(write_csv(frequency_table(reports), out / "frequency_combined.csv",
                             columns=["period"] + REPORT_COLUMNS))
    return outputs


def _epoch_config(args, settings: RunSettings) -> EpochConfig:
    if args.params:
        config = parse_config(args.params)
    elif args.ranking:
        ranking = RankingReport.model_validate_json(Path(args.ranking).read_text(encoding="utf-8"))
        config = ranking.rows[0].config
    else:
        raise UsageError("simulate needs --params or --ranking")
    return EpochConfig(
        config=config,
        period_seconds=settings.period_seconds,
        rounds=settings.rounds,
        users=settings.users,
        deposit_cents=settings.deposit_cents,
        gas=GasSchedule(
            public_params_gas=settings.public_params_gas,
            verifier_gas_mean=settings.verifier_gas_mean,
            gas_price_gwei=settings.gas_price_gwei,
            eth_usd=settings.eth_usd,
            jitter_pct=settings.jitter_pct if settings.jitter else 0.0,
        ),
        latency=LatencyModel(
            family=settings.latency_family,
            phases={k: PhaseLatency(**v) for k, v in settings.latency_phases.items()},
        ),
        slippage_bps=settings.slippage_bps,
        seed=settings.seed,
    )


def cmd_simulate(args, settings: RunSettings, out: Path) -> List[Path]:
    epoch = _epoch_config(args, settings)
    series = load_candles(args.candles, settings.pair, args.input_period)
    outcome = run_epoch(series, epoch)
    samples = [
        {"round": t.round_id, "phase": phase, "seconds": seconds}
        for t in outcome.traces for phase, seconds in t.latencies.items()
    ]
    report = outcome.report
    return [
        write_json(report.model_dump(mode="json", exclude={"settlement": {"rows"}}), out / "epoch_report.json"),
        write_csv([r.model_dump() for r in report.settlement.rows], out / "settlement.csv"),
        write_public_trace(outcome.traces, out / "trace.jsonl"),
        write_full_trace(outcome.traces, out / "trace_full.jsonl"),
        outcome.ledger.export_csv(out / "ledger.csv"),
        write_csv(samples, out / "latency_samples.csv", columns=["round", "phase", "seconds"]),
    ]


def _replay(manifest_path: Path) -> int:
    manifest = RunManifest.model_validate_json(manifest_path.read_text(encoding="utf-8"))
    for path, digest in manifest.inputs.items():
        if file_sha256(path) != digest:
            print(f"Input changed since the run: {path}")
            return EXIT_BAD_DATA
    with tempfile.TemporaryDirectory() as tmp:
        args = argparse.Namespace(**{**manifest.args, "out": tmp})
        settings = RunSettings(**manifest.settings)
        produced = COMMANDS[manifest.command](args, settings, Path(tmp))
        replayed = {p.name: file_sha256(p) for p in produced}
    mismatched = [name for name, digest in manifest.outputs.items() if replayed.get(name) != digest]
    if mismatched:
        print(f"Outputs differ from the manifest: {', '.join(sorted(mismatched))}")
        return EXIT_BAD_DATA
    print(f"Replayed {manifest.command}: {len(manifest.outputs)} outputs identical")
    return EXIT_OK


def cmd_report(args, settings: RunSettings, out: Path) -> List[Path]:
    if args.epoch:
        data = json.loads(Path(args.epoch).read_text(encoding="utf-8"))
        lines = [
            f"config {data['config']}  rounds {data['rounds']}  trades {data['executed_trades']}",
            f"pool {data['initial_pool'] / 100:,.2f} -> {data['final_pool'] / 100:,.2f} USD "
            f"({data['pool_return_pct']:+.2f}%)",
            f"gas {data['total_gas']:,} = {data['gas_usd']:,.2f} USD "
            f"({data['gas_cents_per_user'] / 100:.2f} USD per user)",
        ]
        for phase, s in data["latency"].items():
            lines.append(f"  {phase:<17} mean {s['mean']:8.2f}s  min {s['min']:7.2f}s  max {s['max']:8.2f}s")
        print("\n".join(lines))
        out.mkdir(parents=True, exist_ok=True)
        summary = out / "epoch_summary.txt"
        summary.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return [summary]
    raise UsageError("report needs --manifest or --epoch")


COMMANDS: Dict[str, Callable[..., List[Path]]] = {
    "ingest": cmd_ingest,
    "periods": cmd_periods,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "frequency": cmd_frequency,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def _input_paths(args) -> List[str]:
    candidates = (getattr(args, "candles", None), getattr(args, "ranking", None),
                  getattr(args, "epoch", None), args.config)
    return [p for p in candidates if p]


def write_manifest(args, settings: RunSettings, outputs: List[Path], out: Path) -> Path:
    recorded = {k: v for k, v in vars(args).items() if k not in ("out", "show_config")}
    manifest = RunManifest(
        command=args.command,
        args=recorded,
        settings=settings.model_dump(mode="json"),
        inputs={p: file_sha256(p) for p in _input_paths(args)},
        outputs={p.name: file_sha256(p) for p in outputs},
        seed=settings.seed,
    )
    return write_json(manifest.model_dump(mode="json"), out / f"manifest_{args.command}.json")


def main(argv: Optional[List[str]] = None) -> int:
    setup_logging({"file": {"enabled": False}})
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_BAD_ARGS

    try:
        settings = resolve_settings(args)
    except (ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_ARGS

    if args.show_config:
        print(json.dumps(settings.model_dump(mode="json"), sort_keys=True, indent=2))
        return EXIT_OK
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_BAD_ARGS

    try:
        if args.command == "report" and args.manifest:
            return _replay(Path(args.manifest))
        out = Path(args.out)
        outputs = COMMANDS[args.command](args, settings, out)
        if outputs:
            outputs.append(write_manifest(args, settings, outputs, out))
        for path in outputs:
            print(path)
        return EXIT_OK
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_ARGS
    except (DataError, ValidationError, FileNotFoundError) as e:
        logger.error(f"{args.command} failed on input data: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_DATA
    except Exception as e:
        logger.critical(f"{args.command} failed: {e}", exc_info=True)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
