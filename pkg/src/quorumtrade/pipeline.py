"""End-to-end agent pipeline wired as a backtest strategy.

One decision day runs: temporal summary -> per-domain info gating -> provider
fan-out -> consensus scoring -> research consolidation (with the previous
day's reflections) -> trade decision with stage trace. After execution the
memory bank is backfilled and both reflection agents run, feeding the next
day. Everything is seed-deterministic in mock mode; two runs with the same
seed produce byte-identical logs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import date, datetime, time
from typing import Callable

from .backtest import BacktestConfig, BacktestResult, Portfolio, run_backtest
from .config import AppConfig
from .consensus import ConsensusParams, EvidenceSummary
from .market_data import InfoItem, PriceSeries, gate_by_timestamp
from .memory import (
    LONG_REFLECTION,
    SHORT_REFLECTION,
    MemoryBank,
    reflect,
)
from .metrics import StageTrace
from .orchestration import (
    DOMAINS,
    DecisionError,
    DomainContext,
    TradeDecision,
    consolidate_research,
    credibility_summarize,
    decide_trade,
    fan_out_domain_reports,
    merge_evidence,
)
from .providers import ChatProvider, ProviderSpec, make_provider
from .signals import SignalConfig, summary_table
from .synthetic import make_info_items

logger = logging.getLogger(__name__)

#: info_feed(ticker, day, domain, cutoff) -> items (may include future-dated ones)
InfoFeed = Callable[[str, date, str, datetime], list[InfoItem]]


@dataclass
class DayArchive:
    """One (ticker, date) decision record for the archive."""

    ticker: str
    day: date
    narrative: str
    evidence: dict
    decision: dict
    provenance: list[str]
    flagged_items: list[str]

    def to_record(self) -> dict:
        return {
            "ticker": self.ticker,
            "date": self.day.isoformat(),
            "narrative": self.narrative,
            "evidence": self.evidence,
            "decision": self.decision,
            "provenance": self.provenance,
            "flagged_items": self.flagged_items,
        }


@dataclass
class AgentStrategy:
    """Full mock-provider pipeline behind the engine's strategy interface."""

    ticker: str
    bank: MemoryBank
    roster: tuple[ProviderSpec, ...]
    seed: int = 7
    consensus_params: ConsensusParams = field(default_factory=ConsensusParams)
    signal_config: SignalConfig = field(default_factory=SignalConfig)
    cutoff_hour: int = 13
    info_feed: InfoFeed | None = None
    trader: ChatProvider | None = None
    name: str = "agent"

    def __post_init__(self):
        self.providers = {
            spec.provider_id: make_provider(spec, self.seed) for spec in self.roster
        }
        self.reflection_provider = make_provider(
            ProviderSpec(provider_id="reflection", endpoint="mock://reflection"), self.seed
        )
        self.archive: list[DayArchive] = []
        feed = self.info_feed
        if feed is None:
            feed = lambda tkr, day, domain, cutoff: make_info_items(
                tkr, day, domain, cutoff, self.seed
            )
        self._feed = feed

    def decide(self, series: PriceSeries, portfolio: Portfolio) -> TradeDecision:
        day = series.last_date
        cutoff = datetime.combine(day, time(self.cutoff_hour, 0))
        temporal = summary_table(series, portfolio, self.signal_config)

        summaries: list[EvidenceSummary] = []
        provenance: list[str] = []
        flagged_ids: list[str] = []
        for domain in DOMAINS:
            items = self._feed(self.ticker, day, domain, cutoff)
            admitted, flagged = gate_by_timestamp(items, cutoff)
            provenance.extend(i.item_id for i in admitted)
            flagged_ids.extend(i.item_id for i in flagged)
            ctx = DomainContext(
                ticker=self.ticker,
                day=day,
                cutoff=cutoff,
                domain=domain,
                items=tuple(admitted),
                temporal=temporal,
            )
            reports = fan_out_domain_reports(domain, ctx, list(self.roster), self.providers)
            summaries.append(credibility_summarize(reports, self.consensus_params, cutoff))
        evidence = merge_evidence(summaries)

        reflections = tuple(
            r
            for r in (
                self.bank.latest_reflection(SHORT_REFLECTION.name),
                self.bank.latest_reflection(LONG_REFLECTION.name),
            )
            if r is not None
        )
        brief = consolidate_research(evidence, temporal, reflections, tuple(provenance))
        try:
            decision = decide_trade(brief, portfolio, self.trader)
        except DecisionError as exc:
            logger.warning("%s %s: %s", self.ticker, day, exc)
            decision = TradeDecision(
                action="HOLD", trade_pct=0, confidence=0.0,
                rationale=str(exc), error_flag=True,
            )
        self.archive.append(
            DayArchive(
                ticker=self.ticker,
                day=day,
                narrative=brief.narrative,
                evidence=evidence.to_record(),
                decision=decision.to_record(),
                provenance=provenance,
                flagged_items=flagged_ids,
            )
        )
        return decision

    def after_day(self, day: date, bank: MemoryBank) -> None:
        for config in (SHORT_REFLECTION, LONG_REFLECTION):
            reflect(bank, config, self.reflection_provider)


def traces_from_decisions(decisions: list[TradeDecision]) -> list[StageTrace]:
    """Convergence-ready traces; error-flagged days are marked excluded."""
    return [
        StageTrace(stages=d.stage_trace, final_action=d.action, excluded=d.error_flag)
        for d in decisions
        if d.stage_trace
    ]


def run_agent_backtest(
    series: PriceSeries,
    app: AppConfig,
    start: date,
    end: date,
    bank: MemoryBank | None = None,
    info_feed: InfoFeed | None = None,
    trader: ChatProvider | None = None,
) -> tuple[BacktestResult, AgentStrategy, MemoryBank]:
    """Run the agent pipeline over [start, end] with the app configuration."""
    bank = bank if bank is not None else MemoryBank(
        ticker=series.ticker,
        slope_window=app.reflection.slope_window,
        sharpe_window_mode=app.reflection.sharpe_window_mode,
    )
    strategy = AgentStrategy(
        ticker=series.ticker,
        bank=bank,
        roster=tuple(app.roster),
        seed=app.seed,
        consensus_params=app.consensus,
        signal_config=app.signals,
        cutoff_hour=app.cutoff_hour,
        info_feed=info_feed,
        trader=trader,
    )
    config = BacktestConfig(
        initial_cash=app.backtest.initial_cash,
        allocation=app.backtest.allocation,
        fee_rate=app.backtest.fee_rate,
        start=start,
        end=end,
        ticker=series.ticker,
    )
    result = run_backtest(strategy, series, config, bank=bank, metrics_config=app.metrics)
    return result, strategy, bank
