"""Consensus-gated multi-agent trading engine and backtesting harness."""

__version__ = "0.1.0"

from .backtest import BacktestConfig, BacktestResult, Portfolio, execute, run_backtest
from .consensus import (
    Claim,
    ConsensusGroup,
    ConsensusParams,
    EvidenceSummary,
    build_consensus_groups,
    hybrid_similarity,
    normalize_claims,
    partition_evidence,
    score_group,
)
from .market_data import (
    HorizonSet,
    InfoItem,
    PriceBar,
    PriceSeries,
    gate_by_timestamp,
    load_price_series,
    window,
)
from .memory import MemoryBank, Reflection, ReflectionConfig, TradeRecord, reflect
from .metrics import (
    MetricsConfig,
    MetricsDigest,
    PreferenceRegion,
    compute_metrics,
    preference_region,
    stage_convergence,
)
from .orchestration import (
    DomainReport,
    ResearchBrief,
    TradeDecision,
    consolidate_research,
    credibility_summarize,
    decide_trade,
    fan_out_domain_reports,
)
from .signals import (
    HorizonStats,
    NextDayForecast,
    SignalRecommendation,
    TemporalSummary,
    TrendLabel,
    horizon_stats,
    predict_next_day,
    recommend,
    summary_table,
    trend_score,
)
