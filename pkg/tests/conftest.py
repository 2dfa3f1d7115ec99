"""Shared fixtures: deterministic series builders and claim helpers."""

from __future__ import annotations

from datetime import date, datetime, timedelta

import pytest

from quorumtrade.consensus import Claim
from quorumtrade.market_data import PriceBar, PriceSeries


def series_from_closes(
    closes,
    start: date = date(2024, 1, 1),
    ticker: str = "TEST",
    volume: int = 1000,
    spread: float = 0.0,
) -> PriceSeries:
    """Daily bars on consecutive calendar days; open = close, optional spread."""
    bars = []
    for i, c in enumerate(closes):
        c = float(c)
        bars.append(
            PriceBar(
                date=start + timedelta(days=i),
                open=c,
                high=c * (1 + spread),
                low=c * (1 - spread),
                close=c,
                volume=volume,
            )
        )
    return PriceSeries(ticker=ticker, bars=tuple(bars))


def make_claim(
    report_id: int = 1,
    subject: str = "TEST",
    predicate: str = "trend-up",
    polarity: int = 1,
    value: float | None = None,
    unit: str = "",
    as_of: datetime = datetime(2024, 3, 1, 12, 0),
    domain: str = "market",
) -> Claim:
    return Claim(
        report_id=report_id,
        domain=domain,
        subject=subject,
        predicate=predicate,
        polarity=polarity,
        value=value,
        unit=unit,
        as_of=as_of,
        text=f"{domain} | {subject} | {predicate} | {polarity:+d} | | {as_of.isoformat()}",
    )


@pytest.fixture
def flat_series() -> PriceSeries:
    """400 days at a constant price: every horizon return is exactly zero."""
    return series_from_closes([100.0] * 400, start=date(2023, 1, 1))


@pytest.fixture
def rising_series() -> PriceSeries:
    """400 days of steady geometric rise (~0.5%/day)."""
    closes = [100.0 * 1.005 ** i for i in range(400)]
    return series_from_closes(closes, start=date(2023, 1, 1))


@pytest.fixture
def falling_series() -> PriceSeries:
    closes = [100.0 * 0.995 ** i for i in range(400)]
    return series_from_closes(closes, start=date(2023, 1, 1))
