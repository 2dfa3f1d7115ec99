"""Command-line entry points for the whole pipeline.

Subcommands: ingest, signals, consensus, backtest, reflect, report, serve.
All artifacts land under --out; every command exits 0 on success and nonzero
with a diagnostic on stderr otherwise.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import date, datetime
from pathlib import Path

from .backtest import BacktestConfig, Portfolio, run_backtest
from .baselines import BASELINE_NAMES, BaselineStrategy
from .config import AppConfig, ConfigError, load_config
from .market_data import MarketDataError, load_price_series
from .memory import LONG_REFLECTION, SHORT_REFLECTION, MemoryBank, reflect
from .metrics import preference_region, stage_convergence
from .orchestration import DomainReport, OrchestrationError, credibility_summarize
from .pipeline import run_agent_backtest, traces_from_decisions
from .providers import ProviderSpec, make_provider
from .signals import summary_table
from .synthetic import write_series_csv
from .utils import dump_json


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_series(args, app: AppConfig):
    end = args.end_date or date.today()
    return load_price_series(args.csv, args.ticker, end, args.lookback or app.max_lookback)


def _load_series_for_range(args, app: AppConfig):
    """Series for range commands: anchored at the range end, with enough
    lookback that every horizon window is covered at the range start."""
    end = args.end_date or args.end or date.today()
    lookback = args.lookback
    if lookback is None:
        span = (end - args.start).days if args.start else 0
        lookback = span + app.max_lookback
    return load_price_series(args.csv, args.ticker, end, lookback)


def cmd_ingest(args, app: AppConfig) -> int:
    series = _load_series(args, app)
    out = _out_dir(args)
    path = write_series_csv(series, out / f"{series.ticker}_series.csv")
    dump_json(
        {"ticker": series.ticker, "bars": len(series),
         "first": series.first_date.isoformat(), "last": series.last_date.isoformat()},
        out / f"{series.ticker}_series_meta.json",
    )
    print(f"ingested {len(series)} bars -> {path}")
    return 0


def cmd_signals(args, app: AppConfig) -> int:
    series = _load_series(args, app)
    summary = summary_table(series, Portfolio(cash=app.backtest.initial_cash), app.signals)
    out = _out_dir(args)
    stem = f"{series.ticker}_{summary.as_of.isoformat()}_signals"
    dump_json(summary.to_record(), out / f"{stem}.json")
    (out / f"{stem}.txt").write_text(summary.to_text())
    print(summary.to_text())
    return 0


def cmd_consensus(args, app: AppConfig) -> int:
    bundle = json.loads(Path(args.reports).read_text())
    if not isinstance(bundle, list) or not bundle:
        print("report bundle must be a non-empty JSON list", file=sys.stderr)
        return 1
    reports = [
        DomainReport(
            report_id=i + 1,
            provider_id=item.get("provider_id", f"report-{i + 1}"),
            domain=item["domain"],
            body=item["body"],
            as_of=datetime.fromisoformat(item["as_of"]),
        )
        for i, item in enumerate(bundle)
    ]
    cutoff = datetime.fromisoformat(args.cutoff)
    summary = credibility_summarize(reports, app.consensus, cutoff)
    out = _out_dir(args)
    dump_json(summary.to_record(), out / "evidence.json")
    print(
        f"{len(summary.high_confidence)} high-confidence group(s), "
        f"{len(summary.low_confidence)} low-confidence, "
        f"{len(summary.leakage_flags)} leakage flag(s) -> {out / 'evidence.json'}"
    )
    return 0


def _write_values_csv(path: Path, dates, values) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "value"])
        for d, v in zip(dates, values):
            writer.writerow([d.isoformat(), f"{v:.6f}"])


def _write_convergence_csv(path: Path, label: str, fractions: dict[str, float]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["agent", "stage", "fraction"])
        for stage, frac in fractions.items():
            writer.writerow([label, stage, f"{frac:.6f}"])


def cmd_backtest(args, app: AppConfig) -> int:
    series = _load_series_for_range(args, app)
    start = args.start or series.first_date
    end = args.end or series.last_date
    out = _out_dir(args) / f"{series.ticker}_{args.strategy}"
    out.mkdir(parents=True, exist_ok=True)

    if args.strategy == "agent":
        bank = MemoryBank(
            ticker=series.ticker,
            snapshot_path=out / "bank.jsonl",
            slope_window=app.reflection.slope_window,
            sharpe_window_mode=app.reflection.sharpe_window_mode,
        )
        result, strategy, bank = run_agent_backtest(series, app, start, end, bank=bank)
        (out / "archive.jsonl").write_text(
            "".join(json.dumps(a.to_record(), sort_keys=True) + "\n" for a in strategy.archive)
        )
        traces = traces_from_decisions(result.decisions)
        if traces:
            _write_convergence_csv(
                out / "convergence.csv", "agent", stage_convergence(traces)
            )
    else:
        strategy = BaselineStrategy(args.strategy)
        config = BacktestConfig(
            initial_cash=args.cash or app.backtest.initial_cash,
            allocation=args.allocation or "full",
            fee_rate=app.backtest.fee_rate,
            start=start,
            end=end,
            ticker=series.ticker,
        )
        result = run_backtest(strategy, series, config, metrics_config=app.metrics)

    dump_json(result.to_record(), out / "result.json")
    if result.metrics:
        dump_json(result.metrics.to_record(), out / "metrics.json")
    (out / "trade_log.jsonl").write_text("\n".join(result.trade_log_lines()) + "\n")
    _write_values_csv(out / "values.csv", result.dates, result.values)
    if result.metrics:
        print(
            f"{series.ticker} {args.strategy}: CR {result.metrics.cum_return_pct:+.2f}% | "
            f"MDD {result.metrics.max_drawdown_pct:.2f}% | "
            f"sharpe {result.metrics.sharpe if result.metrics.sharpe is not None else 'n/a'}"
        )
    print(f"artifacts -> {out}")
    return 0


def cmd_prepare_sim(args, app: AppConfig) -> int:
    from .simdata import write_sim_bundles

    series = _load_series_for_range(args, app)
    start = args.start or series.first_date
    end = args.end or series.last_date
    out = write_sim_bundles(series, start, end, Path(args.out) / "sim", seed=app.seed)
    n = len(list(out.glob("day_*.json")))
    print(f"wrote {n} decision-stripped day bundle(s) -> {out}")
    return 0


def cmd_reflect(args, app: AppConfig) -> int:
    bank = MemoryBank.load_snapshot(args.bank)
    config = {"short": SHORT_REFLECTION, "long": LONG_REFLECTION}[args.set]
    out = _out_dir(args)
    provider = make_provider(
        ProviderSpec(provider_id="reflection", endpoint="mock://reflection"), app.seed
    )
    (out / f"reflection_{args.set}_prompt.txt").write_text(bank.reflection_prompt(config))
    reflection = reflect(bank, config, provider)
    if reflection is None:
        print("reflection skipped (provider failure)", file=sys.stderr)
        return 1
    dump_json(reflection.to_record(), out / f"reflection_{args.set}.json")
    print(reflection.text)
    return 0


def cmd_report(args, app: AppConfig) -> int:
    out = _out_dir(args)
    rows = []
    convergence_rows = []
    for result_dir in args.results:
        result_path = Path(result_dir) / "result.json"
        if not result_path.is_file():
            print(f"skipping {result_dir}: no result.json", file=sys.stderr)
            continue
        rec = json.loads(result_path.read_text())
        label = f"{rec['ticker']}/{rec['strategy']}"
        m = rec.get("metrics")
        if m:
            rows.append((label, m))
        traces = [
            d for d in rec.get("decisions", []) if d.get("stage_trace")
        ]
        if traces:
            from .metrics import StageTrace

            stage_traces = [
                StageTrace(
                    stages=tuple((s, a) for s, a in d["stage_trace"]),
                    final_action=d["action"],
                    excluded=bool(d.get("error_flag")),
                )
                for d in traces
            ]
            try:
                fractions = stage_convergence(stage_traces)
            except ValueError:
                fractions = {}
            for stage, frac in fractions.items():
                convergence_rows.append((label, stage, frac))

    with (out / "risk_return.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["agent", "cum_return_pct", "annualized_return_pct",
                         "sharpe", "volatility", "max_drawdown_pct"])
        for label, m in rows:
            writer.writerow([
                label, f"{m['cum_return_pct']:.4f}", f"{m['annualized_return_pct']:.4f}",
                "n/a" if m["sharpe"] is None else f"{m['sharpe']:.4f}",
                f"{m['volatility']:.6f}", f"{m['max_drawdown_pct']:.4f}",
            ])

    with (out / "convergence.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["agent", "stage", "fraction"])
        for label, stage, frac in convergence_rows:
            writer.writerow([label, stage, f"{frac:.6f}"])

    region = app.preference_region
    if region is not None and rows:
        with (out / "preference.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["agent", "distance", "inside"])
            for label, m in rows:
                dist, inside = preference_region(
                    (m["max_drawdown_pct"], m["cum_return_pct"]), region
                )
                writer.writerow([label, f"{dist:.6f}", str(inside).lower()])

    print(f"report -> {out} ({len(rows)} agent(s), "
          f"{len(convergence_rows)} convergence row(s))")
    return 0


def cmd_serve(args, app: AppConfig) -> int:
    from .service import serve

    serve(
        storage_root=args.storage or app.service.storage_dir,
        host=args.host or app.service.host,
        port=args.port or app.service.port,
        cors_origin=app.service.cors_origin,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quorumtrade")
    parser.add_argument("--config", help="declarative YAML config file")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_series_flags(p):
        p.add_argument("--csv", required=True, help="OHLCV CSV with the standard header")
        p.add_argument("--ticker", required=True)
        p.add_argument("--end-date", type=date.fromisoformat, default=None)
        p.add_argument("--lookback", type=int, default=None)
        p.add_argument("--out", default="out")

    p = sub.add_parser("ingest", help="load, normalize, and cache a price series")
    add_series_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("signals", help="emit the temporal signal summary")
    add_series_flags(p)
    p.set_defaults(func=cmd_signals)

    p = sub.add_parser("consensus", help="score a report bundle")
    p.add_argument("--reports", required=True, help="JSON list of {domain, body, as_of}")
    p.add_argument("--cutoff", required=True, help="decision cutoff timestamp (ISO)")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_consensus)

    p = sub.add_parser("backtest", help="run a strategy over a date range")
    add_series_flags(p)
    p.add_argument("--strategy", required=True, choices=list(BASELINE_NAMES) + ["agent"])
    p.add_argument("--start", type=date.fromisoformat, default=None)
    p.add_argument("--end", type=date.fromisoformat, default=None)
    p.add_argument("--cash", type=float, default=None)
    p.add_argument("--allocation", choices=["full", "partial"], default=None)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("prepare-sim", help="emit decision-stripped stage payloads for the human simulation")
    add_series_flags(p)
    p.add_argument("--start", type=date.fromisoformat, default=None)
    p.add_argument("--end", type=date.fromisoformat, default=None)
    p.set_defaults(func=cmd_prepare_sim)

    p = sub.add_parser("reflect", help="generate a reflection from a bank snapshot")
    p.add_argument("--bank", required=True, help="memory bank snapshot (jsonl)")
    p.add_argument("--set", required=True, choices=["short", "long"])
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_reflect)

    p = sub.add_parser("report", help="risk-return table, convergence curves, preference distances")
    p.add_argument("--results", nargs="+", required=True, help="backtest output dirs")
    p.add_argument("--out", default="report")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="start the session-persistence service")
    p.add_argument("--storage", default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        app = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args, app)
    except (MarketDataError, OrchestrationError, ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
