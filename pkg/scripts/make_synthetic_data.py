#!/usr/bin/env python3
"""Generate synthetic OHLCV CSVs (plus sim payload bundles) for demo runs.

Usage:
    python scripts/make_synthetic_data.py [--out data] [--seed 13] [--days 490]
"""

import argparse
from datetime import date
from pathlib import Path

from quorumtrade.simdata import write_sim_bundles
from quorumtrade.synthetic import make_synthetic_series, write_series_csv

TICKERS = {"ALFA": 0.0006, "BRVO": 0.0002, "CHLO": -0.0002}


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="data")
    parser.add_argument("--seed", type=int, default=13)
    parser.add_argument("--days", type=int, default=490)
    parser.add_argument("--sim-days", type=int, default=10,
                        help="trailing days to package as human-sim bundles")
    args = parser.parse_args()

    out = Path(args.out)
    for i, (ticker, drift) in enumerate(TICKERS.items()):
        series = make_synthetic_series(
            ticker, date(2023, 1, 1), args.days, seed=args.seed + i, drift=drift
        )
        path = write_series_csv(series, out / f"{ticker}.csv")
        sim_start = series.bars[-args.sim_days].date
        sim_dir = write_sim_bundles(series, sim_start, series.last_date, out / "sim",
                                    seed=args.seed)
        print(f"{ticker}: {len(series)} bars -> {path}; sim bundles -> {sim_dir}")


if __name__ == "__main__":
    main()
