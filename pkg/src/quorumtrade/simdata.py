"""Stage payload bundles for the human trading simulation.

Each trading day becomes one JSON bundle with a payload per information stage
(d0 price history, d1 fundamentals, d2 technical indicators, d3 news,
d4 sentiment). Every payload passes the decision-strip filter before being
written: no proposal, recommendation, position size, or forecast produced by
the pipeline may reach a participant, and each payload carries an explicit
``decision_stripped`` flag the UI asserts on.

Fundamentals/news/sentiment content is synthesized deterministically per
(ticker, day) so a whole study deployment is reproducible from one seed.
"""

from __future__ import annotations

import json
from datetime import date, datetime, time
from pathlib import Path

import numpy as np

from .market_data import PriceSeries
from .synthetic import make_info_items
from .utils import stable_rng

#: key fragments that mark decision-bearing content; the strip filter drops
#: any top-level key containing one of these
BANNED_KEY_FRAGMENTS = (
    "action",
    "proposal",
    "recommend",
    "position",
    "trade_pct",
    "trade_size",
    "next_day",
    "forecast",
    "decision_",
)

STAGE_ORDER = ("d0", "d1", "d2", "d3", "d4")


def strip_decisions(payload: dict) -> dict:
    """Drop decision-bearing keys and mark the payload as stripped."""
    cleaned = {
        k: v
        for k, v in payload.items()
        if not any(frag in k.lower() for frag in BANNED_KEY_FRAGMENTS)
    }
    cleaned["decision_stripped"] = True
    return cleaned


def _visible(series: PriceSeries, day: date) -> PriceSeries:
    return PriceSeries(series.ticker, tuple(b for b in series.bars if b.date <= day))


def _d0_price_history(series: PriceSeries, day: date, seed: int) -> dict:
    bars = _visible(series, day).bars[-30:]
    rng = stable_rng("index", seed)
    # a synthetic market index co-plotted with the ticker
    index = 4000.0 * np.exp(np.cumsum(rng.normal(0.0003, 0.008, size=len(series.bars))))
    by_date = {b.date: float(index[i]) for i, b in enumerate(series.bars)}
    return {
        "stage": "d0",
        "ticker": series.ticker,
        "dates": [b.date.isoformat() for b in bars],
        "closes": [round(b.close, 4) for b in bars],
        "index_closes": [round(by_date[b.date], 2) for b in bars],
    }


def _d1_fundamentals(series: PriceSeries, day: date, seed: int) -> dict:
    rng = stable_rng("fundamentals", series.ticker, seed)
    shares_outstanding = float(rng.uniform(0.5e9, 5e9))
    pe = float(stable_rng("pe", series.ticker, day.isoformat(), seed).uniform(12, 45))
    close = _visible(series, day).closes[-1]
    return {
        "stage": "d1",
        "market_cap": round(close * shares_outstanding, 2),
        "pe_ratio": round(pe, 2),
        "eps": round(close / pe, 2),
    }


def _d2_technicals(series: PriceSeries, day: date) -> dict:
    closes = _visible(series, day).closes
    return {
        "stage": "d2",
        "last_close": round(closes[-1], 4),
        "ma_10d": round(float(np.mean(closes[-10:])), 4),
        "ma_30d": round(float(np.mean(closes[-30:])), 4),
    }


def _d3_news(ticker: str, day: date, seed: int) -> dict:
    cutoff = datetime.combine(day, time(13, 0))
    items = make_info_items(ticker, day, "news", cutoff, seed)
    return {
        "stage": "d3",
        "items": [
            {
                "title": item.payload,
                "source": item.source,
                "summary": f"{item.payload} (as of {item.as_of.isoformat()})",
            }
            for item in items
            if item.as_of <= cutoff
        ],
    }


def _d4_sentiment(ticker: str, day: date, seed: int) -> dict:
    rng = stable_rng("sentiment", ticker, day.isoformat(), seed)
    total = int(rng.integers(10, 40))
    buy = int(rng.integers(0, total + 1))
    sell = int(rng.integers(0, total - buy + 1))
    return {
        "stage": "d4",
        "sentiment_score": round(float(rng.uniform(-1, 1)), 3),
        "analyst_ratings": {"buy": buy, "hold": total - buy - sell, "sell": sell},
    }


def build_day_bundle(series: PriceSeries, day: date, day_index: int, seed: int = 7) -> dict:
    """All stage payloads for one trading day, decision-stripped."""
    payloads = {
        "d0": _d0_price_history(series, day, seed),
        "d1": _d1_fundamentals(series, day, seed),
        "d2": _d2_technicals(series, day),
        "d3": _d3_news(series.ticker, day, seed),
        "d4": _d4_sentiment(series.ticker, day, seed),
    }
    return {
        "ticker": series.ticker,
        "day_index": day_index,
        "date": day.isoformat(),
        "stages": {stage: strip_decisions(payloads[stage]) for stage in STAGE_ORDER},
    }


def write_sim_bundles(
    series: PriceSeries, start: date, end: date, out_dir: str | Path, seed: int = 7
) -> Path:
    """Write one bundle per trading day plus an index file; returns the dir."""
    out = Path(out_dir) / series.ticker
    out.mkdir(parents=True, exist_ok=True)
    days = [b.date for b in series.bars if start <= b.date <= end]
    for i, day in enumerate(days, start=1):
        bundle = build_day_bundle(series, day, i, seed)
        (out / f"day_{i:03d}.json").write_text(json.dumps(bundle, sort_keys=True, indent=2))
    index = {
        "ticker": series.ticker,
        "days": len(days),
        "dates": [d.isoformat() for d in days],
        "stage_order": list(STAGE_ORDER) + ["final"],
    }
    (out / "index.json").write_text(json.dumps(index, sort_keys=True, indent=2))
    return out
