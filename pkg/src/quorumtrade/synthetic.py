"""Seeded synthetic market data and info feeds for offline runs and tests.

Bars are generated on consecutive calendar days so every day-count horizon
lines up exactly with a bar; this keeps backfill behavior easy to reason about
in fixtures. Real CSV feeds with weekend gaps work through the same loader,
they just leave some horizon fields unfilled where no bar exists.
"""

from __future__ import annotations

import csv
from datetime import date, datetime, time, timedelta
from pathlib import Path

from .market_data import InfoItem, PriceBar, PriceSeries
from .utils import stable_rng


def make_synthetic_series(
    ticker: str,
    start: date,
    n_days: int,
    seed: int = 7,
    start_price: float = 100.0,
    drift: float = 0.0004,
    vol: float = 0.015,
) -> PriceSeries:
    """Geometric random-walk OHLCV bars on consecutive calendar days."""
    rng = stable_rng("series", ticker, seed)
    bars = []
    close = start_price
    for i in range(n_days):
        day = start + timedelta(days=i)
        open_ = close
        close = max(1.0, close * (1.0 + drift + vol * float(rng.standard_normal())))
        spread = abs(float(rng.normal(0, vol / 2)))
        high = max(open_, close) * (1.0 + spread)
        low = min(open_, close) * (1.0 - spread)
        volume = int(rng.integers(50_000, 500_000))
        bars.append(PriceBar(date=day, open=open_, high=high, low=low, close=close, volume=volume))
    return PriceSeries(ticker=ticker, bars=tuple(bars))


def write_series_csv(series: PriceSeries, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "open", "high", "low", "close", "volume"])
        for b in series.bars:
            writer.writerow(
                [b.date.isoformat(), f"{b.open:.4f}", f"{b.high:.4f}",
                 f"{b.low:.4f}", f"{b.close:.4f}", b.volume]
            )
    return path


def make_info_items(
    ticker: str, day: date, domain: str, cutoff: datetime, seed: int = 7
) -> list[InfoItem]:
    """2-3 deterministic items per (ticker, day, domain); occasionally one is
    dated after the cutoff so the ingestion gate has something to flag."""
    rng = stable_rng("info", ticker, day.isoformat(), domain, seed)
    n = int(rng.integers(2, 4))
    items = []
    for k in range(n):
        minutes_before = int(rng.integers(30, 240))
        items.append(
            InfoItem(
                domain=domain,
                payload=f"{domain} note {k + 1} for {ticker} on {day.isoformat()}",
                as_of=cutoff - timedelta(minutes=minutes_before),
                source=f"feed-{k + 1}",
            )
        )
    if rng.random() < 0.15:
        items.append(
            InfoItem(
                domain=domain,
                payload=f"late {domain} wire for {ticker}",
                as_of=datetime.combine(day, time(23, 30)),
                source="late-wire",
            )
        )
    return items
