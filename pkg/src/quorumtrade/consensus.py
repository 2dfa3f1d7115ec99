"""Selective consensus over atomic claims from independent reports.

Reports are normalized into schema claims, embedded, and connected into a
cross-report similarity graph. Connected components become consensus groups,
scored by how many reports corroborate them (support) and how tightly their
members agree (cohesion). Groups are then partitioned into high and low
confidence evidence, with leakage and polarity-conflict audits applied before
any threshold is consulted.

The default embedder hashes the normalized (subject, predicate, polarity)
schema into a fixed-dimension unit vector, which makes the whole path
deterministic and offline. Any ``text -> unit vector`` provider can replace it.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, replace
from datetime import datetime
from typing import Callable, Protocol

import numpy as np

logger = logging.getLogger(__name__)


class ExtractionError(Exception):
    def __init__(self, report_id: int, message: str):
        super().__init__(f"report {report_id}: {message}")
        self.report_id = report_id


@dataclass(frozen=True)
class Claim:
    """One atomic, schema-normalized assertion."""

    report_id: int
    domain: str
    subject: str
    predicate: str
    polarity: int  # -1 | 0 | +1
    value: float | None
    unit: str
    as_of: datetime
    text: str

    def __post_init__(self):
        if self.polarity not in (-1, 0, 1):
            raise ValueError(f"polarity must be -1/0/+1, got {self.polarity}")
        if self.value is not None and not math.isfinite(self.value):
            raise ValueError(f"claim value must be finite, got {self.value}")


@dataclass(frozen=True, eq=False)
class ClaimEmbedding:
    claim_id: int
    vector: np.ndarray

    def __post_init__(self):
        norm = float(np.linalg.norm(self.vector))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"embedding for claim {self.claim_id} not unit norm ({norm})")


@dataclass(frozen=True)
class ConsensusParams:
    """Weights and thresholds for the consensus path (all config-surfaced)."""

    semantic_weight: float = 0.6      # blend weight on embedding cosine
    numeric_scale: float = 1.0        # decay scale for numeric agreement
    edge_threshold: float = 0.75      # min similarity for a cross-report edge
    support_weight: float = 0.5       # blend weight on support vs cohesion
    high_conf_threshold: float = 0.6  # min consensus score for promotion

    def __post_init__(self):
        if not 0.0 <= self.semantic_weight <= 1.0:
            raise ValueError("semantic_weight must be in [0, 1]")
        if self.numeric_scale <= 0:
            raise ValueError("numeric_scale must be positive")
        if not 0.0 <= self.support_weight <= 1.0:
            raise ValueError("support_weight must be in [0, 1]")


@dataclass(frozen=True)
class ConsensusGroup:
    """A connected component of the cross-report claim graph."""

    members: tuple[int, ...]      # global claim indices, ascending
    report_ids: tuple[int, ...]   # distinct contributing reports
    supp: float | None = None
    coh: float | None = None
    score: float | None = None
    high_confidence: bool | None = None


@dataclass(frozen=True)
class GroupDigest:
    """Evidence-facing view of one scored group."""

    signal: str
    domain: str
    sources: tuple[int, ...]
    consistency: float   # support ratio
    confidence: float    # consensus score
    polarity: int        # majority polarity of members
    members: tuple[int, ...]
    demotions: tuple[str, ...]

    def to_record(self) -> dict:
        return {
            "signal": self.signal,
            "domain": self.domain,
            "sources": list(self.sources),
            "consistency": round(self.consistency, 6),
            "confidence": round(self.confidence, 6),
            "polarity": self.polarity,
            "members": list(self.members),
            "demotions": list(self.demotions),
        }


@dataclass(frozen=True)
class EvidenceSummary:
    high_confidence: tuple[GroupDigest, ...]
    low_confidence: tuple[GroupDigest, ...]
    leakage_flags: tuple[int, ...]  # claim indices dated past the cutoff

    def to_record(self) -> dict:
        return {
            "high_confidence": [d.to_record() for d in self.high_confidence],
            "low_confidence": [d.to_record() for d in self.low_confidence],
            "leakage_flags": list(self.leakage_flags),
        }


# --------------------------------------------------------------------------
# claim extraction

#: An extractor maps report text to raw claim dicts with keys
#: subject, predicate, polarity, value, unit, as_of, text (domain optional).
ClaimExtractor = Callable[[str], list[dict]]


def parse_claim_grammar(text: str) -> list[dict]:
    """Parse the deterministic bullet grammar, one claim per line:

        domain | subject | predicate | polarity | [value unit] | timestamp

    Blank lines and lines starting with ``#`` are skipped; malformed lines
    raise ValueError so the caller can log and reject them individually.
    """
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split("|")]
        if len(fields) != 6:
            raise ValueError(f"line {lineno}: expected 6 '|' fields, got {len(fields)}")
        domain, subject, predicate, pol_s, value_s, ts_s = fields
        polarity = int(pol_s)
        value, unit = None, ""
        if value_s:
            parts = value_s.split(None, 1)
            value = float(parts[0])
            unit = parts[1].strip() if len(parts) > 1 else ""
        out.append(
            {
                "domain": domain,
                "subject": subject,
                "predicate": predicate,
                "polarity": polarity,
                "value": value,
                "unit": unit,
                "as_of": datetime.fromisoformat(ts_s),
                "text": line,
            }
        )
    return out


def _parse_lines_individually(text: str) -> tuple[list[dict], list[tuple[int, str, str]]]:
    """Grammar parse that collects bad lines instead of failing the report."""
    good: list[dict] = []
    bad: list[tuple[int, str, str]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            good.extend(parse_claim_grammar(stripped))
        except (ValueError, TypeError) as exc:
            bad.append((lineno, stripped, str(exc)))
    return good, bad


def normalize_claims(
    report: str,
    report_id: int,
    domain: str,
    extractor: ClaimExtractor | None = None,
) -> list[Claim]:
    """Extract schema claims from one report body.

    With the default (grammar) extractor, invalid lines are logged and
    rejected individually. A custom extractor that raises fails the whole
    report with ExtractionError. Claims inherit the report's id and domain.
    """
    if not report.strip():
        raise ExtractionError(report_id, "empty report body")
    if extractor is None:
        raw, rejected = _parse_lines_individually(report)
        for lineno, line, why in rejected:
            logger.warning("report %d line %d rejected (%s): %s", report_id, lineno, why, line)
    else:
        try:
            raw = extractor(report)
        except Exception as exc:
            raise ExtractionError(report_id, f"extractor failed: {exc}") from exc

    claims: list[Claim] = []
    for item in raw:
        try:
            claim = Claim(
                report_id=report_id,
                domain=domain,
                subject=item["subject"],
                predicate=item["predicate"],
                polarity=int(item["polarity"]),
                value=item.get("value"),
                unit=item.get("unit", ""),
                as_of=item["as_of"],
                text=item.get("text", ""),
            )
        except (KeyError, ValueError, TypeError) as exc:
            logger.warning("report %d claim rejected (%s): %r", report_id, exc, item)
            continue
        if item.get("domain") and item["domain"] != domain:
            logger.warning(
                "report %d claim domain %r differs from report domain %r",
                report_id, item["domain"], domain,
            )
        claims.append(claim)
    return claims


# --------------------------------------------------------------------------
# embeddings

class Embedder(Protocol):
    dim: int

    def embed(self, claim: Claim) -> np.ndarray: ...


class HashEmbedder:
    """Deterministic offline embedder over the claim schema.

    Identical (subject, predicate, polarity) triples map to identical unit
    vectors, so schema-equal claims from different reports get cosine 1.
    """

    def __init__(self, dim: int = 64):
        self.dim = dim

    def embed(self, claim: Claim) -> np.ndarray:
        vec = np.zeros(self.dim)
        tokens = (
            claim.subject.strip().lower(),
            claim.predicate.strip().lower(),
            f"polarity:{claim.polarity}",
        )
        for token in tokens:
            seed = int.from_bytes(hashlib.sha256(token.encode()).digest()[:8], "big")
            vec += np.random.default_rng(seed).standard_normal(self.dim)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:  # all-zero is unreachable for gaussian draws, but stay total
            vec[0] = 1.0
            norm = 1.0
        return vec / norm


def embed_claims(claims: list[Claim], embedder: Embedder | None = None) -> list[ClaimEmbedding]:
    embedder = embedder or HashEmbedder()
    return [ClaimEmbedding(i, embedder.embed(c)) for i, c in enumerate(claims)]


# --------------------------------------------------------------------------
# similarity and grouping

def hybrid_similarity(
    c1: Claim,
    e1: np.ndarray,
    c2: Claim,
    e2: np.ndarray,
    params: ConsensusParams,
) -> float:
    """Blend of embedding cosine and numeric agreement.

    The numeric term only participates when BOTH claims carry values with
    matching unit tags; otherwise the semantic term stands alone (a missing
    value is not evidence of disagreement).
    """
    s_sem = float(np.dot(e1, e2))
    if c1.value is not None and c2.value is not None and c1.unit == c2.unit:
        s_num = math.exp(-abs(c1.value - c2.value) / params.numeric_scale)
        return params.semantic_weight * s_sem + (1.0 - params.semantic_weight) * s_num
    return s_sem


def pairwise_similarities(
    claims: list[Claim],
    embeddings: list[ClaimEmbedding],
    params: ConsensusParams,
) -> np.ndarray:
    """Full symmetric similarity matrix (diagonal is 1)."""
    n = len(claims)
    sims = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            s = hybrid_similarity(claims[i], embeddings[i].vector, claims[j], embeddings[j].vector, params)
            sims[i, j] = sims[j, i] = s
    return sims


def build_consensus_groups(
    claims: list[Claim],
    sims: np.ndarray,
    params: ConsensusParams,
) -> list[ConsensusGroup]:
    """Connected components of the thresholded cross-report graph.

    Edges only connect claims from *different* reports with similarity at or
    above the edge threshold; singletons are kept as their own groups. Groups
    are ordered by their smallest member index.
    """
    n = len(claims)
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            if claims[i].report_id != claims[j].report_id and sims[i, j] >= params.edge_threshold:
                ra, rb = find(i), find(j)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)

    components: dict[int, list[int]] = {}
    for i in range(n):
        components.setdefault(find(i), []).append(i)
    groups = []
    for root in sorted(components):
        members = tuple(sorted(components[root]))
        reports = tuple(sorted({claims[i].report_id for i in members}))
        groups.append(ConsensusGroup(members=members, report_ids=reports))
    return groups


def score_group(
    group: ConsensusGroup,
    n_reports: int,
    sims: np.ndarray,
    params: ConsensusParams,
) -> ConsensusGroup:
    """Attach support ratio, cohesion, and the blended consensus score.

    Cohesion averages over ALL member pairs (same-report pairs included);
    singleton groups get cohesion 0 by convention, encoding "uncorroborated".
    """
    if not group.members:
        raise ValueError("cannot score an empty group")
    supp = len(group.report_ids) / n_reports
    k = len(group.members)
    if k == 1:
        coh = 0.0
    else:
        total = 0.0
        for a in range(k):
            for b in range(a + 1, k):
                total += float(sims[group.members[a], group.members[b]])
        coh = 2.0 * total / (k * (k - 1))
    score = params.support_weight * supp + (1.0 - params.support_weight) * coh
    return replace(
        group,
        supp=supp,
        coh=coh,
        score=score,
        high_confidence=score >= params.high_conf_threshold,
    )


def partition_evidence(
    groups: list[ConsensusGroup],
    claims: list[Claim],
    cutoff: datetime,
    params: ConsensusParams,
) -> EvidenceSummary:
    """Split scored groups into high/low confidence evidence digests.

    Demotion rules, applied in order and all recorded: any member claim dated
    past the cutoff (leakage) demotes the whole group; a group containing both
    +1 and -1 polarities demotes; otherwise the consensus-score threshold
    decides. Every input claim lands in exactly one digest.
    """
    leakage: list[int] = []
    high: list[GroupDigest] = []
    low: list[GroupDigest] = []
    for group in groups:
        if group.score is None:
            raise ValueError("partition_evidence requires scored groups")
        members = [claims[i] for i in group.members]
        leaked = [i for i in group.members if claims[i].as_of > cutoff]
        leakage.extend(leaked)
        demotions = []
        if leaked:
            demotions.append("leakage")
        polarities = {c.polarity for c in members}
        if 1 in polarities and -1 in polarities:
            demotions.append("polarity-conflict")
        if not demotions and not group.high_confidence:
            demotions.append("below-threshold")
        rep = members[0]
        pol_sum = sum(c.polarity for c in members)
        digest = GroupDigest(
            signal=f"{rep.subject} {rep.predicate}",
            domain=rep.domain,
            sources=group.report_ids,
            consistency=group.supp,
            confidence=group.score,
            polarity=(pol_sum > 0) - (pol_sum < 0),
            members=group.members,
            demotions=tuple(demotions),
        )
        (low if demotions else high).append(digest)
    order = lambda d: (-d.confidence, d.members[0])
    return EvidenceSummary(
        high_confidence=tuple(sorted(high, key=order)),
        low_confidence=tuple(sorted(low, key=order)),
        leakage_flags=tuple(sorted(leakage)),
    )
