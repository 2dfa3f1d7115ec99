"""Daily backtest loop: portfolio accounting, execution, and result assembly.

Execution is whole-share with floor rounding at the day's close, no leverage
and no shorting (cash and share counts stay non-negative by construction).
A BUY or SELL that cannot move at least one share degrades to a flagged HOLD
instead of raising; a failing strategy likewise records a flagged HOLD so one
bad day never aborts a multi-week run.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from datetime import date, timedelta
from typing import Protocol

from .market_data import PriceSeries
from .memory import MemoryBank, TradeRecord
from .metrics import MetricsConfig, MetricsDigest, compute_metrics
from .orchestration import TradeDecision

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Portfolio:
    """Cash plus a single long position; no margin, no shorting."""

    cash: float
    shares: int = 0
    last_mark: float = 0.0

    def __post_init__(self):
        if self.cash < 0:
            raise ValueError(f"negative cash {self.cash}")
        if self.shares < 0:
            raise ValueError(f"negative share count {self.shares}")

    @property
    def value(self) -> float:
        return self.cash + self.shares * self.last_mark

    def marked(self, price: float) -> float:
        return self.cash + self.shares * price


@dataclass(frozen=True)
class BacktestConfig:
    initial_cash: float = 10_000.0
    allocation: str = "partial"  # "full" forces 100% sizing on non-HOLD actions
    fee_rate: float = 0.0        # fraction of traded notional
    start: date | None = None
    end: date | None = None
    ticker: str = ""

    def __post_init__(self):
        if self.initial_cash <= 0:
            raise ValueError("initial_cash must be positive")
        if self.allocation not in ("full", "partial"):
            raise ValueError(f"allocation must be full|partial, got {self.allocation!r}")


@dataclass
class BacktestResult:
    ticker: str
    strategy: str
    dates: list[date] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    records: list[TradeRecord] = field(default_factory=list)
    decisions: list[TradeDecision] = field(default_factory=list)
    metrics: MetricsDigest | None = None

    def trade_log_lines(self) -> list[str]:
        import json

        return [json.dumps(r.to_record(), sort_keys=True) for r in self.records]

    def to_record(self) -> dict:
        return {
            "ticker": self.ticker,
            "strategy": self.strategy,
            "dates": [d.isoformat() for d in self.dates],
            "values": self.values,
            "decisions": [d.to_record() for d in self.decisions],
            "metrics": self.metrics.to_record() if self.metrics else None,
        }


class Strategy(Protocol):
    name: str

    def decide(self, series: PriceSeries, portfolio: Portfolio) -> TradeDecision: ...


def execute(
    decision: TradeDecision,
    portfolio: Portfolio,
    price: float,
    day: date,
    fee_rate: float = 0.0,
) -> tuple[Portfolio, TradeRecord]:
    """Apply one decision at the given execution price.

    BUY p%% spends floor(p%% of cash / price) whole shares; SELL p%% disposes
    floor(p%% of shares). Value is conserved at the execution price up to the
    (default zero) fee. Returns the updated portfolio and the journal record
    with horizon fields untouched.
    """
    if price <= 0:
        raise ValueError(f"execution price must be positive, got {price}")
    pre_value = portfolio.marked(price)
    flags: list[str] = []
    action, pct = decision.action, decision.trade_pct
    q = 0
    if action == "BUY":
        q = math.floor((pct / 100.0) * portfolio.cash / price)
        if q < 1:
            flags.append("degraded-to-hold: cash below one share")
            action, pct, q = "HOLD", 0, 0
    elif action == "SELL":
        q = math.floor((pct / 100.0) * portfolio.shares)
        if q < 1:
            flags.append("degraded-to-hold: nothing to sell")
            action, pct, q = "HOLD", 0, 0

    if action == "BUY":
        fee = fee_rate * q * price
        new = Portfolio(cash=portfolio.cash - q * price - fee, shares=portfolio.shares + q,
                        last_mark=price)
        direction, signed_q = 1, q
    elif action == "SELL":
        fee = fee_rate * q * price
        new = Portfolio(cash=portfolio.cash + q * price - fee, shares=portfolio.shares - q,
                        last_mark=price)
        direction, signed_q = -1, -q
    else:
        new = replace(portfolio, last_mark=price)
        direction, signed_q = 0, 0

    if decision.error_flag:
        flags.append("strategy-error")
    record = TradeRecord(
        date=day,
        action=action,
        trade_pct=pct,
        shares_changed=signed_q,
        entry_price=price,
        pre_trade_value=pre_value,
        direction=direction,
        flags=flags,
    )
    return new, record


def run_backtest(
    strategy: Strategy,
    series: PriceSeries,
    config: BacktestConfig,
    bank: MemoryBank | None = None,
    metrics_config: MetricsConfig = MetricsConfig(),
) -> BacktestResult:
    """Run the daily loop over the configured date range.

    Per day: slice the series at that day (nothing later is visible), obtain a
    decision, execute at the close, mark the portfolio, journal the trade, and
    backfill the memory bank with the day as its new clock. Strategies that
    raise produce a flagged HOLD for that day. Fully deterministic for
    deterministic strategies.
    """
    start = config.start or series.first_date
    end = config.end or series.last_date
    day_bars = {b.date: b for b in series.bars}
    result = BacktestResult(ticker=config.ticker or series.ticker,
                            strategy=getattr(strategy, "name", type(strategy).__name__))
    portfolio = Portfolio(cash=config.initial_cash)
    bank = bank if bank is not None else MemoryBank(ticker=series.ticker)

    returns_by_date: dict[date, float] = {}

    def daily_return(d: date) -> float | None:
        return returns_by_date.get(d)

    current_day = start

    def price_lookup(d: date) -> float | None:
        # guard: backfill may only see prices at or before the loop's clock
        if d > current_day:
            return None
        bar = day_bars.get(d)
        return bar.close if bar else None

    d = start
    while d <= end:
        bar = day_bars.get(d)
        if bar is None:
            logger.debug("%s: no bar on %s, day skipped", series.ticker, d)
            d += timedelta(days=1)
            continue
        current_day = d
        visible = PriceSeries(series.ticker, tuple(b for b in series.bars if b.date <= d))
        try:
            decision = strategy.decide(visible, portfolio)
        except Exception as exc:  # noqa: BLE001 - strategy boundary
            logger.warning("%s %s: strategy failed (%s); holding", series.ticker, d, exc)
            decision = TradeDecision(action="HOLD", trade_pct=0, confidence=0.0,
                                     rationale=f"strategy error: {exc}", error_flag=True)
        if config.allocation == "full" and decision.action != "HOLD":
            decision = replace(decision, trade_pct=100)

        portfolio, record = execute(decision, portfolio, bar.close, d, config.fee_rate)
        bank.append_trade(record)
        value = portfolio.value
        if result.values:
            returns_by_date[d] = value / result.values[-1] - 1.0
        result.dates.append(d)
        result.values.append(value)
        result.records.append(record)
        result.decisions.append(decision)

        bank.backfill(now=d, price_lookup=price_lookup, daily_returns=daily_return)
        after_day = getattr(strategy, "after_day", None)
        if after_day is not None:
            after_day(d, bank)
        d += timedelta(days=1)

    if len(result.values) >= 2:
        result.metrics = compute_metrics(result.values, metrics_config)
    return result
