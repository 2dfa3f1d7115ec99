"""Portfolio performance metrics and behavioral-alignment measures.

Conventions
-----------
A value series ``V_0 .. V_T`` has T daily simple returns ``R_t = V_t/V_{t-1} - 1``.
Volatility uses the sample (1/(T-1)) standard deviation; the trade-memory
module deliberately uses the population form for its horizon Sharpe, and the
two are documented against each other. A constant series has zero dispersion,
so its Sharpe is reported as an explicit undefined marker (None), never as an
infinity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class ShapeError(Exception):
    """Stage traces disagree on stage structure."""


@dataclass(frozen=True)
class MetricsConfig:
    trading_days_per_year: int = 252
    risk_free_rate: float = 0.0  # per period
    # Optional benchmark daily returns. Stored for completeness (active return
    # = portfolio return minus benchmark return) but feeds no digest field.
    benchmark: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.trading_days_per_year <= 0:
            raise ValueError("trading_days_per_year must be positive")


@dataclass(frozen=True)
class MetricsDigest:
    cum_return_pct: float
    annualized_return_pct: float
    sharpe: float | None
    volatility: float
    max_drawdown_pct: float
    mean_daily_return: float

    def to_record(self) -> dict:
        return {
            "cum_return_pct": self.cum_return_pct,
            "annualized_return_pct": self.annualized_return_pct,
            "sharpe": self.sharpe,
            "volatility": self.volatility,
            "max_drawdown_pct": self.max_drawdown_pct,
            "mean_daily_return": self.mean_daily_return,
        }


@dataclass(frozen=True)
class PreferenceRegion:
    """Elliptical level set around the human mean (MDD, CR) point.

    The axes are scaled by the human standard errors, so the normalized
    distance is dimensionless; the boundary (distance == size) counts as
    inside.
    """

    mu_mdd: float
    mu_cr: float
    sigma_mdd: float
    sigma_cr: float
    size: float = 1.0

    def __post_init__(self):
        if self.sigma_mdd <= 0 or self.sigma_cr <= 0:
            raise ValueError("region standard errors must be positive")
        if self.size <= 0:
            raise ValueError("region size must be positive")


def compute_metrics(values: Sequence[float], config: MetricsConfig = MetricsConfig()) -> MetricsDigest:
    """Compute the reporting quartet (CR, AR, SR, MDD) plus volatility.

    Parameters
    ----------
    values : sequence of float
        Daily portfolio values ``V_0 .. V_T``, all positive, length >= 2.

    Returns
    -------
    MetricsDigest
        CR and AR in percent, MDD in percent, sharpe ``None`` when the
        return dispersion is zero.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ValueError(f"need at least 2 values, got {v.size}")
    if np.any(v <= 0):
        raise ValueError("portfolio values must be positive")
    T = v.size - 1
    returns = v[1:] / v[:-1] - 1.0

    cr = (v[-1] - v[0]) / v[0] * 100.0
    ar = ((v[-1] / v[0]) ** (config.trading_days_per_year / T) - 1.0) * 100.0
    mean_ret = float(np.mean(returns))
    vol = float(np.std(returns, ddof=1)) if T >= 2 else 0.0
    sharpe = (mean_ret - config.risk_free_rate) / vol if vol > 0 else None

    peaks = np.maximum.accumulate(v)
    mdd = float(np.max((peaks - v) / peaks)) * 100.0

    return MetricsDigest(
        cum_return_pct=float(cr),
        annualized_return_pct=float(ar),
        sharpe=sharpe,
        volatility=vol,
        max_drawdown_pct=mdd,
        mean_daily_return=mean_ret,
    )


def annualized_sharpe(digest: MetricsDigest, config: MetricsConfig = MetricsConfig()) -> float | None:
    """Optional annualized form: mean return scaled by k, volatility by sqrt(k)."""
    if digest.sharpe is None:
        return None
    return digest.sharpe * float(np.sqrt(config.trading_days_per_year))


def preference_region(point: tuple[float, float], region: PreferenceRegion) -> tuple[float, bool]:
    """Normalized squared distance of an (MDD, CR) point from the human center.

    Smaller distance means stronger alignment with typical human risk-return
    behavior; membership is boundary inclusive.
    """
    mdd, cr = point
    distance = ((mdd - region.mu_mdd) / region.sigma_mdd) ** 2 + (
        (cr - region.mu_cr) / region.sigma_cr
    ) ** 2
    return distance, distance <= region.size


@dataclass(frozen=True)
class StageTrace:
    """Per-day record of provisional actions by stage plus the final action."""

    stages: tuple[tuple[str, str], ...]  # (stage_id, action) in protocol order
    final_action: str
    excluded: bool = False  # error-flagged days drop out of convergence stats


def stage_convergence(traces: Sequence[StageTrace]) -> dict[str, float]:
    """Per-stage fraction of days whose provisional action equals the final one.

    All usable traces must share the same stage-id sequence; error-flagged
    traces are excluded from the counts entirely.
    """
    usable = [t for t in traces if not t.excluded]
    if not usable:
        raise ValueError("no usable traces")
    stage_ids = tuple(s for s, _ in usable[0].stages)
    for t in usable[1:]:
        if tuple(s for s, _ in t.stages) != stage_ids:
            raise ShapeError(
                f"trace stages {[s for s, _ in t.stages]} differ from {list(stage_ids)}"
            )
    fractions: dict[str, float] = {}
    for pos, stage in enumerate(stage_ids):
        hits = sum(1 for t in usable if t.stages[pos][1] == t.final_action)
        fractions[stage] = hits / len(usable)
    return fractions
