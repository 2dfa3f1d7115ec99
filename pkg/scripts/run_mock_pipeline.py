#!/usr/bin/env python3
"""Full offline experiment: agent pipeline vs rule baselines on synthetic data.

Runs the mock-provider agent and all five baselines over the same synthetic
tickers, then prints a risk-return table and the agent's stage-convergence
curve. Everything is seed-deterministic; rerunning reproduces the numbers.

Usage:
    python scripts/run_mock_pipeline.py [--seed 13] [--days 60] [--out out/demo]
"""

import argparse
import json
from datetime import date
from pathlib import Path

from quorumtrade.backtest import BacktestConfig, run_backtest
from quorumtrade.baselines import BASELINE_NAMES, BaselineStrategy
from quorumtrade.config import AppConfig
from quorumtrade.metrics import stage_convergence
from quorumtrade.pipeline import run_agent_backtest, traces_from_decisions
from quorumtrade.synthetic import make_synthetic_series

TICKERS = ("ALFA", "BRVO", "CHLO")


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=13)
    parser.add_argument("--days", type=int, default=60)
    parser.add_argument("--out", default="out/demo")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    app = AppConfig(seed=args.seed)

    rows = []
    convergence = {}
    for i, ticker in enumerate(TICKERS):
        series = make_synthetic_series(ticker, date(2023, 1, 1), 430 + args.days,
                                       seed=args.seed + i)
        start, end = series.bars[-args.days].date, series.last_date

        result, strategy, bank = run_agent_backtest(series, app, start, end)
        rows.append((ticker, "agent", result.metrics))
        convergence[ticker] = stage_convergence(traces_from_decisions(result.decisions))
        (out / f"{ticker}_agent_result.json").write_text(
            json.dumps(result.to_record(), sort_keys=True, indent=2)
        )

        for name in BASELINE_NAMES:
            config = BacktestConfig(initial_cash=app.backtest.initial_cash,
                                    allocation="full", start=start, end=end, ticker=ticker)
            res = run_backtest(BaselineStrategy(name), series, config)
            rows.append((ticker, name, res.metrics))

    print(f"\n{'ticker':<7}{'strategy':<14}{'CR%':>9}{'AR%':>10}{'MDD%':>8}{'sharpe':>9}")
    for ticker, name, m in rows:
        sharpe = "n/a" if m.sharpe is None else f"{m.sharpe:.3f}"
        print(f"{ticker:<7}{name:<14}{m.cum_return_pct:>9.2f}{m.annualized_return_pct:>10.2f}"
              f"{m.max_drawdown_pct:>8.2f}{sharpe:>9}")

    print("\nagent stage convergence (fraction of days matching the final action):")
    stages = list(next(iter(convergence.values())))
    print("ticker  " + "  ".join(f"{s:>6}" for s in stages))
    for ticker, curve in convergence.items():
        print(f"{ticker:<7} " + "  ".join(f"{curve[s]:>6.2f}" for s in stages))
    print(f"\nartifacts -> {out}")


if __name__ == "__main__":
    main()
