"""Multi-agent decision layer: fan-out, credibility scoring, research, trading.

Domain analysis fans out across a roster of providers (bounded concurrency,
deterministic roster-order aggregation), the consensus path scores the
resulting reports, a researcher consolidates everything into a fixed-order
narrative, and the trader turns it into the day's action. Each intermediate
stage leaves a provisional action in the stage trace, mirroring the ordering
of the human protocol (d0 temporal, d1 fundamentals, d2 market, d3 news,
d4 sentiment, final), so stage-convergence statistics are directly comparable.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date, datetime

from .consensus import (
    ConsensusParams,
    Embedder,
    EvidenceSummary,
    GroupDigest,
    build_consensus_groups,
    embed_claims,
    normalize_claims,
    pairwise_similarities,
    partition_evidence,
    score_group,
)
from .market_data import InfoItem
from .memory import Reflection
from .providers import ChatProvider, ProviderRequest, ProviderSpec
from .signals import TemporalSummary

logger = logging.getLogger(__name__)

TRADE_PCT_GRID = (0, 25, 50, 75, 100)
STAGE_IDS = ("d0", "d1", "d2", "d3", "d4", "final")
STAGE_DOMAINS = (
    ("d1", "fundamentals"),
    ("d2", "market"),
    ("d3", "news"),
    ("d4", "sentiment"),
)
DOMAINS = tuple(domain for _, domain in STAGE_DOMAINS)

FAN_OUT_WORKERS = 4


class OrchestrationError(Exception):
    pass


class DecisionError(Exception):
    pass


@dataclass(frozen=True)
class DomainReport:
    report_id: int
    provider_id: str
    domain: str
    body: str
    as_of: datetime

    def __post_init__(self):
        if not self.body.strip():
            raise ValueError(f"report {self.report_id} has an empty body")


@dataclass(frozen=True)
class DomainContext:
    """Timestamp-gated inputs for one (ticker, date, domain) fan-out."""

    ticker: str
    day: date
    cutoff: datetime
    domain: str
    items: tuple[InfoItem, ...]
    temporal: TemporalSummary


@dataclass(frozen=True)
class ResearchBrief:
    evidence: EvidenceSummary
    temporal: TemporalSummary
    reflections: tuple[Reflection, ...]
    narrative: str
    provenance: tuple[str, ...] = ()  # admitted info-item ids


@dataclass(frozen=True)
class TradeDecision:
    action: str
    trade_pct: int
    confidence: float
    rationale: str
    stage_trace: tuple[tuple[str, str], ...] = ()
    error_flag: bool = False

    def __post_init__(self):
        if self.action not in ("BUY", "SELL", "HOLD"):
            raise ValueError(f"invalid action {self.action!r}")
        if self.trade_pct not in TRADE_PCT_GRID:
            raise ValueError(f"trade_pct {self.trade_pct} not on {TRADE_PCT_GRID}")
        if self.action == "HOLD" and self.trade_pct != 0:
            raise ValueError("HOLD requires trade_pct 0")

    def to_record(self) -> dict:
        return {
            "action": self.action,
            "trade_pct": self.trade_pct,
            "confidence": round(self.confidence, 4),
            "rationale": self.rationale,
            "stage_trace": [list(s) for s in self.stage_trace],
            "error_flag": self.error_flag,
        }


def _context_header(ctx: DomainContext) -> str:
    f = ctx.temporal.forecast
    p = ctx.temporal.proposal
    return (
        f"context: ticker={ctx.ticker} date={ctx.day.isoformat()} domain={ctx.domain}"
        f" cutoff={ctx.cutoff.isoformat()} direction={f.direction}"
        f" week_return={ctx.temporal.horizon_returns.get(7, 0.0):+.6f}"
        f" proposal={p.action} proposal_pct={p.position_pct}"
        f" proposal_confidence={p.confidence:.0f}"
    )


def build_analysis_request(ctx: DomainContext) -> ProviderRequest:
    items_text = "\n".join(
        f"- [{i.source} @ {i.as_of.isoformat()}] {i.payload}" for i in ctx.items
    )
    user = "\n".join(
        [
            _context_header(ctx),
            "",
            ctx.temporal.to_text(),
            f"admitted {ctx.domain} items:",
            items_text or "(none)",
            "",
            "List point-by-point claims, one per line, as:",
            "domain | subject | predicate | polarity | [value unit] | timestamp",
        ]
    )
    system = (
        f"You are a {ctx.domain} analyst. Report only facts supported by the "
        "supplied context; never include trade recommendations."
    )
    return ProviderRequest(system=system, user=user, schema_id="claim-bullets")


def fan_out_domain_reports(
    domain: str,
    ctx: DomainContext,
    roster: list[ProviderSpec],
    providers: dict[str, ChatProvider],
) -> list[DomainReport]:
    """Query every provider concurrently; aggregate in roster order.

    Failed providers are logged and skipped; report ids are assigned 1..N over
    the successful reports only, so the support ratio downstream counts the
    reports that actually exist.
    """
    if not roster:
        raise OrchestrationError("empty provider roster")
    request = build_analysis_request(ctx)
    bodies: list[str | None] = [None] * len(roster)

    def run(slot: int) -> None:
        spec = roster[slot]
        try:
            bodies[slot] = providers[spec.provider_id].complete(request)
        except Exception as exc:  # noqa: BLE001 - provider boundary
            logger.warning("provider %s failed for %s/%s: %s",
                           spec.provider_id, ctx.ticker, domain, exc)

    with ThreadPoolExecutor(max_workers=min(FAN_OUT_WORKERS, len(roster))) as pool:
        list(pool.map(run, range(len(roster))))

    reports: list[DomainReport] = []
    for slot, body in enumerate(bodies):
        if body is None:
            continue
        reports.append(
            DomainReport(
                report_id=len(reports) + 1,
                provider_id=roster[slot].provider_id,
                domain=domain,
                body=body,
                as_of=ctx.cutoff,
            )
        )
    if not reports:
        raise OrchestrationError(f"all providers failed for {ctx.ticker}/{domain}")
    return reports


def credibility_summarize(
    reports: list[DomainReport],
    params: ConsensusParams,
    cutoff: datetime,
    embedder: Embedder | None = None,
) -> EvidenceSummary:
    """Run the full consensus path over a batch of same-domain reports."""
    if not reports:
        raise OrchestrationError("credibility scoring requires at least one report")
    claims = []
    for report in reports:
        claims.extend(normalize_claims(report.body, report.report_id, report.domain))
    if not claims:
        return EvidenceSummary(high_confidence=(), low_confidence=(), leakage_flags=())
    embeddings = embed_claims(claims, embedder)
    sims = pairwise_similarities(claims, embeddings, params)
    groups = build_consensus_groups(claims, sims, params)
    scored = [score_group(g, len(reports), sims, params) for g in groups]
    return partition_evidence(scored, claims, cutoff, params)


def merge_evidence(summaries: list[EvidenceSummary]) -> EvidenceSummary:
    """Combine per-domain summaries, offsetting claim indices to stay unique."""
    high: list[GroupDigest] = []
    low: list[GroupDigest] = []
    leakage: list[int] = []
    offset = 0
    for summary in summaries:
        digests = list(summary.high_confidence) + list(summary.low_confidence)
        for digest in digests:
            shifted = GroupDigest(
                signal=digest.signal,
                domain=digest.domain,
                sources=digest.sources,
                consistency=digest.consistency,
                confidence=digest.confidence,
                polarity=digest.polarity,
                members=tuple(m + offset for m in digest.members),
                demotions=digest.demotions,
            )
            (low if digest.demotions else high).append(shifted)
        leakage.extend(i + offset for i in summary.leakage_flags)
        offset += sum(len(d.members) for d in digests)
    order = lambda d: (-d.confidence, d.members[0] if d.members else 0)
    return EvidenceSummary(
        high_confidence=tuple(sorted(high, key=order)),
        low_confidence=tuple(sorted(low, key=order)),
        leakage_flags=tuple(sorted(leakage)),
    )


def _digest_line(d: GroupDigest) -> str:
    note = f" ({', '.join(d.demotions)})" if d.demotions else ""
    return (
        f"- [{d.domain}] {d.signal} ({d.polarity:+d}) | consistency {d.consistency:.2f}"
        f" | confidence {d.confidence:.2f} | reports {list(d.sources)}{note}"
    )


def consolidate_research(
    evidence: EvidenceSummary,
    temporal: TemporalSummary,
    reflections: tuple[Reflection, ...] = (),
    provenance: tuple[str, ...] = (),
) -> ResearchBrief:
    """Compose the researcher narrative in fixed section order.

    Order: temporal summary, high-confidence evidence, reflections (omitted
    when empty), low-confidence caveats. Identical inputs give identical text.
    """
    parts = ["## temporal summary", temporal.to_text().rstrip(), ""]
    parts.append("## high-confidence evidence")
    if evidence.high_confidence:
        parts.extend(_digest_line(d) for d in evidence.high_confidence)
    else:
        parts.append("(none)")
    parts.append("")
    if reflections:
        parts.append("## reflections")
        for refl in reflections:
            parts.append(f"[{refl.config_name}] {refl.text.rstrip()}")
        parts.append("")
    parts.append("## low-confidence caveats")
    if evidence.low_confidence:
        parts.extend(_digest_line(d) for d in evidence.low_confidence)
    else:
        parts.append("(none)")
    if evidence.leakage_flags:
        parts.append(f"leakage audit: {len(evidence.leakage_flags)} claim(s) flagged past cutoff")
    narrative = "\n".join(parts) + "\n"
    return ResearchBrief(
        evidence=evidence,
        temporal=temporal,
        reflections=tuple(reflections),
        narrative=narrative,
        provenance=tuple(provenance),
    )


def _contradicts(action: str, digests: list[GroupDigest]) -> bool:
    if action == "BUY":
        return any(d.polarity == -1 for d in digests)
    if action == "SELL":
        return any(d.polarity == 1 for d in digests)
    return False


def _policy_decision(brief: ResearchBrief) -> tuple[str, tuple[tuple[str, str], ...]]:
    """Deterministic trader policy plus the per-stage provisional actions.

    Follow the temporal proposal unless high-confidence evidence of opposite
    polarity has been seen by that stage, in which case hold.
    """
    proposal = brief.temporal.proposal
    trace: list[tuple[str, str]] = [("d0", proposal.action)]
    seen: list[str] = []
    action = proposal.action
    for stage, domain in STAGE_DOMAINS:
        seen.append(domain)
        digests = [d for d in brief.evidence.high_confidence if d.domain in seen]
        action = "HOLD" if _contradicts(proposal.action, digests) else proposal.action
        trace.append((stage, action))
    trace.append(("final", action))
    return action, tuple(trace)


def _validate_trader_output(text: str) -> dict:
    data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError("output must be a flat JSON object")
    missing = {"action", "trade_pct", "confidence", "rationale"} - set(data)
    if missing:
        raise ValueError(f"missing fields: {sorted(missing)}")
    if data["action"] not in ("BUY", "SELL", "HOLD"):
        raise ValueError(f"invalid action {data['action']!r}")
    if int(data["trade_pct"]) not in TRADE_PCT_GRID:
        raise ValueError(f"trade_pct {data['trade_pct']} not on grid")
    if not 0 <= float(data["confidence"]) <= 100:
        raise ValueError("confidence out of [0, 100]")
    return data


def decide_trade(
    brief: ResearchBrief,
    portfolio,
    trader: ChatProvider | None = None,
) -> TradeDecision:
    """Produce the final action, with the stage trace attached.

    In mock mode (no trader provider) the deterministic policy applies. With a
    provider, the structured-output contract gets one repair retry before a
    DecisionError is raised; the backtest loop downgrades that to HOLD with an
    error flag rather than aborting a run.
    """
    proposal = brief.temporal.proposal
    final_action, trace = _policy_decision(brief)

    if trader is None:
        pct = proposal.position_pct if final_action == proposal.action else 0
        if final_action == "HOLD":
            pct = 0
        rationale = (
            "followed temporal proposal"
            if final_action == proposal.action
            else "high-confidence evidence contradicts the proposal; holding"
        )
        return TradeDecision(
            action=final_action,
            trade_pct=pct,
            confidence=proposal.confidence,
            rationale=rationale,
            stage_trace=trace,
        )

    request = ProviderRequest(
        system="You are the trader. Reply with exactly one JSON object with "
        "fields action, trade_pct, confidence, rationale.",
        user=f"context: proposal={proposal.action} proposal_pct={proposal.position_pct} "
        f"proposal_confidence={proposal.confidence:.0f}\n\n{brief.narrative}",
        schema_id="trade-decision",
    )
    last_err = None
    for attempt in range(2):  # one repair retry
        try:
            raw = trader.complete(request)
            data = _validate_trader_output(raw)
            pct = int(data["trade_pct"]) if data["action"] != "HOLD" else 0
            trace = trace[:-1] + (("final", data["action"]),)
            return TradeDecision(
                action=data["action"],
                trade_pct=pct,
                confidence=float(data["confidence"]),
                rationale=str(data["rationale"]),
                stage_trace=trace,
            )
        except Exception as exc:  # noqa: BLE001 - contract boundary
            last_err = exc
            logger.warning("trader output invalid (attempt %d): %s", attempt + 1, exc)
            request = ProviderRequest(
                system=request.system,
                user=request.user + f"\n\nYour previous output was invalid ({exc}). "
                "Reply with exactly one JSON object.",
                schema_id=request.schema_id,
            )
    raise DecisionError(f"trader failed the structured-output contract: {last_err}")
