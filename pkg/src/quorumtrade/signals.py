"""Deterministic price-only signal pipeline.

Produces, from a bare price series: per-horizon descriptive statistics, a
five-bucket trend label from a quadratic fit, a rule-table next-day forecast,
a thresholded trade recommendation, and a serializable summary record. Every
function here is pure; identical inputs give identical outputs, including the
serialized byte stream (floats are formatted, never repr'd, at the boundary).
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from enum import Enum
from statistics import median

import numpy as np

from .market_data import EmptyWindowError, PriceSeries, ShortWindowError, slice_window


class TrendLabel(Enum):
    STRONG_UP = "STRONG_UP"
    UP = "UP"
    SIDEWAYS = "SIDEWAYS"
    DOWN = "DOWN"
    STRONG_DOWN = "STRONG_DOWN"


def trend_sign(label: TrendLabel) -> int:
    if label in (TrendLabel.STRONG_UP, TrendLabel.UP):
        return 1
    if label in (TrendLabel.STRONG_DOWN, TrendLabel.DOWN):
        return -1
    return 0


@dataclass(frozen=True)
class SignalConfig:
    """Tunable rule parameters. Defaults are documented, not sacred."""

    # trend score = change_weight * fitted relative change
    #             + slope_weight * terminal slope projected over the window
    change_weight: float = 0.7
    slope_weight: float = 0.3
    # five-bucket label thresholds on |score|
    strong_threshold: float = 0.08
    trend_threshold: float = 0.02
    # next-day rule table
    roc_days: int = 5
    roc_trigger: float = 0.01
    vol_sample: int = 5
    vol_baseline_days: int = 90
    decision_margin: int = 1
    magnitude_cap: float = 0.02
    confidence_per_point: float = 20.0
    # recommendation blend (trend consistency, forecast confidence,
    # recent return strength, forecast magnitude)
    weight_trend: float = 0.30
    weight_forecast: float = 0.30
    weight_return: float = 0.20
    weight_magnitude: float = 0.20
    return_strength_scale: float = 0.05
    # action thresholds; sizes quantized to the human-protocol grid
    strong_action_floor: float = 75.0
    action_floor: float = 60.0
    strong_action_pct: int = 50
    action_pct: int = 25
    swing_lookback: int = 20
    view_horizons: tuple[int, ...] = (7, 28, 90, 180, 360)


DEFAULT_SIGNAL_CONFIG = SignalConfig()

_HORIZON_NAMES = {1: "1-day", 7: "1-week", 14: "2-week", 28: "1-month",
                  90: "3-month", 180: "6-month", 360: "1-year"}


def horizon_name(h: int) -> str:
    return _HORIZON_NAMES.get(h, f"{h}-day")


@dataclass(frozen=True)
class HorizonStats:
    horizon: int
    cum_return: float
    realized_vol: float
    high: float
    low: float
    current: float
    avg_volume: float
    trend: TrendLabel
    trend_score: float


@dataclass(frozen=True)
class NextDayForecast:
    direction: str  # UP | DOWN | UNCERTAIN
    expected_magnitude: float
    confidence: float
    bullish_score: int
    bearish_score: int
    rationale: str


@dataclass(frozen=True)
class SignalRecommendation:
    action: str  # BUY | SELL | HOLD
    position_pct: int
    confidence: float
    rationale: str


@dataclass(frozen=True)
class TemporalSummary:
    as_of: date
    current_price: float
    horizon_returns: dict[int, float]
    horizon_vols: dict[int, float]
    forecast: NextDayForecast
    support_level: float | None
    resistance_level: float | None
    trend_alignment: float
    proposal: SignalRecommendation

    def to_record(self) -> dict:
        """Key-ordered record with fixed float formatting (stable bytes)."""
        rec: dict = {
            "as_of": self.as_of.isoformat(),
            "current_price": f"{self.current_price:.2f}",
        }
        for h in sorted(self.horizon_returns):
            rec[f"return_{horizon_name(h)}"] = f"{self.horizon_returns[h] * 100:+.2f}%"
        for h in sorted(self.horizon_vols):
            rec[f"volatility_{horizon_name(h)}"] = f"{self.horizon_vols[h] * 100:.2f}%"
        rec["next_day_direction"] = self.forecast.direction
        rec["next_day_magnitude"] = f"{self.forecast.expected_magnitude * 100:.2f}%"
        rec["next_day_confidence"] = f"{self.forecast.confidence:.0f}"
        rec["support_level"] = "n/a" if self.support_level is None else f"{self.support_level:.2f}"
        rec["resistance_level"] = (
            "n/a" if self.resistance_level is None else f"{self.resistance_level:.2f}"
        )
        rec["trend_alignment"] = f"{self.trend_alignment:.0f}/100"
        rec["proposal_action"] = self.proposal.action
        rec["proposal_position_pct"] = str(self.proposal.position_pct)
        rec["proposal_confidence"] = f"{self.proposal.confidence:.0f}"
        return rec

    def to_text(self) -> str:
        """Human-readable summary table, one `key: value` line per field."""
        lines = ["=== temporal signals summary ==="]
        for key, val in self.to_record().items():
            lines.append(f"{key}: {val}")
        return "\n".join(lines) + "\n"


def _daily_returns(closes: list[float]) -> list[float]:
    return [b / a - 1.0 for a, b in zip(closes, closes[1:])]


def label_for_score(score: float, config: SignalConfig = DEFAULT_SIGNAL_CONFIG) -> TrendLabel:
    """Five-bucket discretization; boundaries belong to the stronger bucket."""
    mag = abs(score)
    if mag >= config.strong_threshold:
        return TrendLabel.STRONG_UP if score > 0 else TrendLabel.STRONG_DOWN
    if mag >= config.trend_threshold:
        return TrendLabel.UP if score > 0 else TrendLabel.DOWN
    return TrendLabel.SIDEWAYS


def trend_score(
    series: PriceSeries, config: SignalConfig = DEFAULT_SIGNAL_CONFIG
) -> tuple[float, TrendLabel]:
    """Scalar trend score from a quadratic least-squares fit of normalized closes.

    The score blends the fitted start-to-end relative change with the terminal
    slope projected across the window, so a perfectly linear series scores its
    total fractional change. Needs at least 3 bars.
    """
    closes = series.closes
    n = len(closes)
    if n < 3:
        raise ShortWindowError(3, n)
    y = np.asarray(closes, dtype=float) / closes[0]
    x = np.arange(n, dtype=float)
    coeffs = np.polyfit(x, y, 2)
    poly = np.poly1d(coeffs)
    fitted_start = float(poly(0.0))
    fitted_end = float(poly(float(n - 1)))
    terminal_slope = float(poly.deriv()(float(n - 1)))
    base = fitted_start if abs(fitted_start) > 1e-9 else 1.0
    score = (
        config.change_weight * (fitted_end - fitted_start) / base
        + config.slope_weight * terminal_slope * (n - 1) / base
    )
    return score, label_for_score(score, config)


def horizon_stats(
    series: PriceSeries,
    h: int,
    as_of: date | None = None,
    config: SignalConfig = DEFAULT_SIGNAL_CONFIG,
) -> HorizonStats:
    """Descriptive statistics over the bars inside the trailing h-day window.

    Needs at least 2 bars inside the window; the window is never widened to
    compensate for sparse history.
    """
    anchor = as_of or series.last_date
    win = slice_window(series, h, anchor)
    if len(win) < 2:
        raise ShortWindowError(h, len(win))
    closes = win.closes
    rets = _daily_returns(closes)
    vol = float(np.std(rets, ddof=1)) if len(rets) >= 2 else 0.0
    score, label = trend_score(win, config) if len(win) >= 3 else (0.0, TrendLabel.SIDEWAYS)
    return HorizonStats(
        horizon=h,
        cum_return=closes[-1] / closes[0] - 1.0,
        realized_vol=vol,
        high=max(b.high for b in win.bars),
        low=min(b.low for b in win.bars),
        current=closes[-1],
        avg_volume=float(np.mean([b.volume for b in win.bars])),
        trend=label,
        trend_score=score,
    )


def _trend_vote(series: PriceSeries, h: int, config: SignalConfig) -> int:
    """Trend sign over an h-day window; 0 (abstain) when history is too short."""
    try:
        win = slice_window(series, h, series.last_date)
    except EmptyWindowError:
        return 0
    if len(win) < 3:
        return 0
    _, label = trend_score(win, config)
    return trend_sign(label)


def predict_next_day(
    series: PriceSeries, config: SignalConfig = DEFAULT_SIGNAL_CONFIG
) -> NextDayForecast:
    """Rule-table next-day forecast.

    Rules (all evaluated on closes):
      +2 bullish when price is above MA5, MA10 and MA20; +2 bearish when below
      all three; +-1 for a 5-day rate of change beyond the trigger; +-1 each for
      1-week and 1-month trend agreement; -1 from the leading side when recent
      return volatility runs above its rolling median (dampening).
    """
    closes = series.closes
    if len(closes) < 20:
        raise ShortWindowError(20, len(closes))
    price = closes[-1]
    bullish = 0
    bearish = 0
    fired: list[str] = []

    mas = {k: float(np.mean(closes[-k:])) for k in (5, 10, 20)}
    if all(price > mas[k] for k in mas):
        bullish += 2
        fired.append("price above MA5/MA10/MA20 (+2 bull)")
    elif all(price < mas[k] for k in mas):
        bearish += 2
        fired.append("price below MA5/MA10/MA20 (+2 bear)")

    roc = price / closes[-(config.roc_days + 1)] - 1.0
    if roc > config.roc_trigger:
        bullish += 1
        fired.append(f"{config.roc_days}d ROC {roc * 100:+.2f}% (+1 bull)")
    elif roc < -config.roc_trigger:
        bearish += 1
        fired.append(f"{config.roc_days}d ROC {roc * 100:+.2f}% (+1 bear)")

    for h, tag in ((7, "1-week"), (28, "1-month")):
        vote = _trend_vote(series, h, config)
        if vote > 0:
            bullish += 1
            fired.append(f"{tag} trend up (+1 bull)")
        elif vote < 0:
            bearish += 1
            fired.append(f"{tag} trend down (+1 bear)")

    rets = _daily_returns(closes)[-config.vol_baseline_days:]
    k = config.vol_sample
    rolling = [float(np.std(rets[i - k + 1 : i + 1])) for i in range(k - 1, len(rets))]
    if len(rolling) >= 2 and rolling[-1] > median(rolling):
        if bullish > bearish:
            bullish -= 1
            fired.append("elevated recent volatility (-1 bull)")
        elif bearish > bullish:
            bearish -= 1
            fired.append("elevated recent volatility (-1 bear)")

    diff = bullish - bearish
    if diff >= config.decision_margin:
        direction = "UP"
    elif -diff >= config.decision_margin:
        direction = "DOWN"
    else:
        direction = "UNCERTAIN"
    magnitude = min(abs(roc) / config.roc_days, config.magnitude_cap)
    confidence = min(100.0, config.confidence_per_point * abs(diff))
    return NextDayForecast(
        direction=direction,
        expected_magnitude=magnitude,
        confidence=confidence,
        bullish_score=bullish,
        bearish_score=bearish,
        rationale="; ".join(fired) if fired else "no rules fired",
    )


def _alignment(series: PriceSeries, config: SignalConfig) -> float:
    """Share (0-100) of view horizons whose trend sign matches the majority."""
    votes = []
    for h in config.view_horizons:
        try:
            win = slice_window(series, h, series.last_date)
        except EmptyWindowError:
            continue
        if len(win) < 3:
            continue
        _, label = trend_score(win, config)
        votes.append(trend_sign(label))
    if not votes:
        return 0.0
    top = max(votes.count(s) for s in (-1, 0, 1))
    return 100.0 * top / len(votes)


def recommend(
    series: PriceSeries,
    portfolio,
    config: SignalConfig = DEFAULT_SIGNAL_CONFIG,
) -> SignalRecommendation:
    """Blend four component scores into a confidence and a sized action.

    ``portfolio`` only needs a ``shares`` attribute; with no position held the
    deterministic path never proposes SELL (no shorting).
    """
    forecast = predict_next_day(series, config)
    closes = series.closes
    roc = closes[-1] / closes[-(config.roc_days + 1)] - 1.0

    c_trend = _alignment(series, config)
    c_forecast = forecast.confidence
    c_return = min(100.0, 100.0 * abs(roc) / config.return_strength_scale)
    c_magnitude = 100.0 * forecast.expected_magnitude / config.magnitude_cap
    confidence = (
        config.weight_trend * c_trend
        + config.weight_forecast * c_forecast
        + config.weight_return * c_return
        + config.weight_magnitude * c_magnitude
    )
    confidence = max(0.0, min(100.0, confidence))

    has_position = getattr(portfolio, "shares", 0) > 0
    action = {"UP": "BUY", "DOWN": "SELL", "UNCERTAIN": "HOLD"}[forecast.direction]
    reason = forecast.rationale
    if action == "SELL" and not has_position:
        action, reason = "HOLD", "no position to sell"
    if action != "HOLD" and confidence < config.action_floor:
        action, reason = "HOLD", f"confidence {confidence:.0f} below action floor"
    if action == "HOLD":
        return SignalRecommendation(action="HOLD", position_pct=0, confidence=confidence, rationale=reason)
    pct = config.strong_action_pct if confidence >= config.strong_action_floor else config.action_pct
    return SignalRecommendation(action=action, position_pct=pct, confidence=confidence, rationale=reason)


def swing_levels(
    series: PriceSeries, current_price: float, lookback: int = 20
) -> tuple[float | None, float | None]:
    """(support, resistance) from strict swing extrema in the trailing bars.

    Support is the highest swing low at or below the current price; resistance
    the lowest swing high at or above it. Either may be None.
    """
    bars = series.bars[-lookback:]
    swing_lows = [
        bars[i].low
        for i in range(1, len(bars) - 1)
        if bars[i].low < bars[i - 1].low and bars[i].low < bars[i + 1].low
    ]
    swing_highs = [
        bars[i].high
        for i in range(1, len(bars) - 1)
        if bars[i].high > bars[i - 1].high and bars[i].high > bars[i + 1].high
    ]
    support = max((x for x in swing_lows if x <= current_price), default=None)
    resistance = min((x for x in swing_highs if x >= current_price), default=None)
    return support, resistance


def summary_table(
    series: PriceSeries,
    portfolio,
    config: SignalConfig = DEFAULT_SIGNAL_CONFIG,
) -> TemporalSummary:
    """Full pipeline output for one (ticker, date): stats, forecast, proposal."""
    as_of = series.last_date
    current = series.closes[-1]
    returns: dict[int, float] = {}
    vols: dict[int, float] = {}
    votes: list[int] = []
    for h in config.view_horizons:
        stats = horizon_stats(series, h, as_of, config)
        returns[h] = stats.cum_return
        vols[h] = stats.realized_vol
        votes.append(trend_sign(stats.trend))
    top = max(votes.count(s) for s in (-1, 0, 1))
    alignment = 100.0 * top / len(votes)
    support, resistance = swing_levels(series, current, config.swing_lookback)
    return TemporalSummary(
        as_of=as_of,
        current_price=current,
        horizon_returns=returns,
        horizon_vols=vols,
        forecast=predict_next_day(series, config),
        support_level=support,
        resistance_level=resistance,
        trend_alignment=alignment,
        proposal=recommend(series, portfolio, config),
    )
