"""Rule-based baseline strategies and the indicator math behind them.

All indicator series are computed from scratch on each call (the price history
is small at daily resolution) with incremental-form EMAs, so a constant price
series yields exactly zero MACD and never fires a crossover. Baselines always
trade the full allocation; position awareness comes from the caller-maintained
``state['shares']`` entry.
"""

from __future__ import annotations

import numpy as np

from .market_data import PriceSeries
from .orchestration import TradeDecision

BASELINE_NAMES = ("buy-and-hold", "macd", "kdj-rsi", "zmr", "sma")


def sma_series(closes: list[float], n: int) -> list[float | None]:
    out: list[float | None] = [None] * len(closes)
    for i in range(n - 1, len(closes)):
        out[i] = float(np.mean(closes[i - n + 1 : i + 1]))
    return out


def ema_series(values: list[float], span: int) -> list[float]:
    """Incremental EMA (seeded with the first value); exact on constants."""
    alpha = 2.0 / (span + 1.0)
    out = [values[0]]
    for x in values[1:]:
        prev = out[-1]
        out.append(prev + alpha * (x - prev))
    return out


def macd_series(
    closes: list[float], fast: int = 12, slow: int = 26, signal: int = 9
) -> tuple[list[float], list[float]]:
    fast_e = ema_series(closes, fast)
    slow_e = ema_series(closes, slow)
    macd = [f - s for f, s in zip(fast_e, slow_e)]
    return macd, ema_series(macd, signal)


def rsi_series(closes: list[float], period: int = 14) -> list[float | None]:
    """Wilder RSI; exactly 100 when the window has no down moves."""
    out: list[float | None] = [None] * len(closes)
    if len(closes) <= period:
        return out
    deltas = [b - a for a, b in zip(closes, closes[1:])]
    gains = [max(d, 0.0) for d in deltas]
    losses = [max(-d, 0.0) for d in deltas]
    avg_gain = sum(gains[:period]) / period
    avg_loss = sum(losses[:period]) / period

    def rsi(g: float, l: float) -> float:
        if l == 0.0:
            return 100.0
        return 100.0 - 100.0 / (1.0 + g / l)

    out[period] = rsi(avg_gain, avg_loss)
    for i in range(period + 1, len(closes)):
        avg_gain = (avg_gain * (period - 1) + gains[i - 1]) / period
        avg_loss = (avg_loss * (period - 1) + losses[i - 1]) / period
        out[i] = rsi(avg_gain, avg_loss)
    return out


def kdj_series(
    series: PriceSeries, n: int = 9, k_smooth: int = 3, d_smooth: int = 3
) -> tuple[list[float], list[float], list[float]]:
    """Stochastic K/D/J with the conventional 2/3-1/3 smoothing, seeded at 50."""
    bars = series.bars
    k_vals, d_vals, j_vals = [], [], []
    k = d = 50.0
    for i in range(len(bars)):
        window = bars[max(0, i - n + 1) : i + 1]
        hh = max(b.high for b in window)
        ll = min(b.low for b in window)
        rsv = 50.0 if hh == ll else 100.0 * (bars[i].close - ll) / (hh - ll)
        k = (k_smooth - 1) / k_smooth * k + rsv / k_smooth
        d = (d_smooth - 1) / d_smooth * d + k / d_smooth
        k_vals.append(k)
        d_vals.append(d)
        j_vals.append(3 * k - 2 * d)
    return k_vals, d_vals, j_vals


def zscore_series(closes: list[float], n: int = 20) -> list[float | None]:
    out: list[float | None] = [None] * len(closes)
    for i in range(n - 1, len(closes)):
        window = closes[i - n + 1 : i + 1]
        mu = float(np.mean(window))
        sd = float(np.std(window))
        out[i] = 0.0 if sd == 0.0 else (closes[i] - mu) / sd
    return out


def _decision(action: str, pct: int, why: str) -> TradeDecision:
    return TradeDecision(
        action=action,
        trade_pct=pct if action != "HOLD" else 0,
        confidence=100.0 if action != "HOLD" else 0.0,
        rationale=why,
    )


def _crossed_up(line: list[float], ref: list[float], i: int) -> bool:
    return line[i] > ref[i] and line[i - 1] <= ref[i - 1]


def _crossed_down(line: list[float], ref: list[float], i: int) -> bool:
    return line[i] < ref[i] and line[i - 1] >= ref[i - 1]


def baseline_signal(name: str, series: PriceSeries, state: dict) -> TradeDecision:
    """Evaluate one baseline on the history up to today.

    ``state`` persists between calls; the caller keeps ``state['shares']``
    current so position-aware rules (ZMR exits, sell gating) work without the
    strategy owning portfolio state. Insufficient history yields HOLD.
    """
    closes = series.closes
    shares = state.get("shares", 0)

    if name == "buy-and-hold":
        if not state.get("bought"):
            state["bought"] = True
            return _decision("BUY", 100, "initial full allocation")
        return _decision("HOLD", 0, "holding")

    if name == "macd":
        fast, slow, sig = state.get("params", (12, 26, 9))
        if len(closes) < slow + sig:
            return _decision("HOLD", 0, "insufficient history")
        macd, signal = macd_series(closes, fast, slow, sig)
        i = len(closes) - 1
        if _crossed_up(macd, signal, i):
            return _decision("BUY", 100, "MACD crossed above signal")
        if _crossed_down(macd, signal, i):
            return _decision("SELL", 100, "MACD crossed below signal")
        return _decision("HOLD", 0, "no crossover")

    if name == "kdj-rsi":
        if len(closes) < 15:
            return _decision("HOLD", 0, "insufficient history")
        k_vals, _, _ = kdj_series(series)
        rsi = rsi_series(closes)
        k, r = k_vals[-1], rsi[-1]
        if r is None:
            return _decision("HOLD", 0, "insufficient history")
        if k >= 80 and r >= 70:
            return _decision("SELL", 100, f"overbought (K={k:.1f}, RSI={r:.1f})")
        if k <= 20 and r <= 30:
            return _decision("BUY", 100, f"oversold (K={k:.1f}, RSI={r:.1f})")
        return _decision("HOLD", 0, "no agreement")

    if name == "zmr":
        z_vals = zscore_series(closes)
        z = z_vals[-1]
        if z is None:
            return _decision("HOLD", 0, "insufficient history")
        if shares == 0 and z <= -2.0:
            return _decision("BUY", 100, f"z={z:.2f} below entry band")
        if shares > 0 and z >= 0.0:
            return _decision("SELL", 100, f"z={z:.2f} reverted to reference")
        return _decision("HOLD", 0, f"z={z:.2f} inside band")

    if name == "sma":
        short_n, long_n = state.get("params", (10, 30))
        if len(closes) < long_n + 1:
            return _decision("HOLD", 0, "insufficient history")
        short = sma_series(closes, short_n)
        long = sma_series(closes, long_n)
        i = len(closes) - 1
        if short[i - 1] is None or long[i - 1] is None:
            return _decision("HOLD", 0, "insufficient history")
        if short[i] > long[i] and short[i - 1] <= long[i - 1]:
            return _decision("BUY", 100, f"SMA{short_n} crossed above SMA{long_n}")
        if short[i] < long[i] and short[i - 1] >= long[i - 1]:
            return _decision("SELL", 100, f"SMA{short_n} crossed below SMA{long_n}")
        return _decision("HOLD", 0, "no crossover")

    raise ValueError(f"unknown baseline {name!r}; expected one of {BASELINE_NAMES}")


class BaselineStrategy:
    """Adapter giving baselines the engine's strategy interface."""

    def __init__(self, name: str, params: tuple | None = None):
        if name not in BASELINE_NAMES:
            raise ValueError(f"unknown baseline {name!r}")
        self.name = name
        self.state: dict = {}
        if params:
            self.state["params"] = params

    def decide(self, series: PriceSeries, portfolio) -> TradeDecision:
        self.state["shares"] = portfolio.shares
        return baseline_signal(self.name, series, self.state)
