import math
from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quorumtrade.consensus import (
    ConsensusParams,
    ExtractionError,
    HashEmbedder,
    build_consensus_groups,
    embed_claims,
    hybrid_similarity,
    normalize_claims,
    pairwise_similarities,
    parse_claim_grammar,
    partition_evidence,
    score_group,
)
from quorumtrade.utils import stable_rng

from conftest import make_claim

CUTOFF = datetime(2024, 3, 1, 13, 0)
PARAMS = ConsensusParams()


def basis(i: int, dim: int = 8) -> np.ndarray:
    v = np.zeros(dim)
    v[i] = 1.0
    return v


class TestGrammar:
    def test_plain_bullet(self):
        claims = normalize_claims(
            "market | AAPL | 10d-MA-above-30d-MA | +1 | | 2024-03-01",
            report_id=1,
            domain="market",
        )
        assert len(claims) == 1
        c = claims[0]
        assert (c.subject, c.predicate, c.polarity) == ("AAPL", "10d-MA-above-30d-MA", 1)
        assert c.value is None

    def test_value_with_unit(self):
        claims = normalize_claims(
            "fundamentals | AAPL | quarterly-eps | +1 | 1.85 EPS | 2024-03-01",
            report_id=2,
            domain="fundamentals",
        )
        assert claims[0].value == pytest.approx(1.85)
        assert claims[0].unit == "EPS"

    def test_three_bullets_round_trip(self):
        body = "\n".join(
            [
                "market | AAPL | trend-up | +1 | | 2024-03-01",
                "market | AAPL | vol-7d | 0 | 1.45 pct | 2024-03-01",
                "market | SPX | index-above-ma | +1 | | 2024-03-01T09:30:00",
            ]
        )
        claims = normalize_claims(body, report_id=1, domain="market")
        assert len(claims) == 3
        # parse -> print -> parse oracle
        reprinted = "\n".join(
            f"{c.domain} | {c.subject} | {c.predicate} | {c.polarity:+d} | "
            f"{'' if c.value is None else f'{c.value} {c.unit}'.strip()} | {c.as_of.isoformat()}"
            for c in claims
        )
        again = normalize_claims(reprinted, report_id=1, domain="market")
        assert [(c.subject, c.predicate, c.polarity, c.value, c.unit, c.as_of) for c in claims] == [
            (c.subject, c.predicate, c.polarity, c.value, c.unit, c.as_of) for c in again
        ]

    def test_bad_line_logged_not_fatal(self, caplog):
        body = "market | AAPL | trend-up | +1 | | 2024-03-01\nnot a claim line\n"
        with caplog.at_level("WARNING"):
            claims = normalize_claims(body, report_id=3, domain="market")
        assert len(claims) == 1
        assert any("rejected" in r.message for r in caplog.records)

    def test_empty_report_raises(self):
        with pytest.raises(ExtractionError):
            normalize_claims("   ", report_id=1, domain="market")

    def test_failing_extractor_wraps_report_id(self):
        def boom(_text):
            raise RuntimeError("provider exploded")

        with pytest.raises(ExtractionError) as exc:
            normalize_claims("anything", report_id=9, domain="news", extractor=boom)
        assert exc.value.report_id == 9

    def test_grammar_rejects_wrong_field_count(self):
        with pytest.raises(ValueError):
            parse_claim_grammar("a | b | c | +1 | 2024-03-01")


class TestHybridSimilarity:
    def test_identity(self):
        c = make_claim(value=1.85, unit="EPS")
        e = basis(0)
        for lam in (0.0, 0.3, 1.0):
            params = ConsensusParams(semantic_weight=lam)
            assert hybrid_similarity(c, e, c, e, params) == pytest.approx(1.0, abs=1e-12)

    def test_numeric_decay_at_one_scale(self):
        params = ConsensusParams(semantic_weight=0.0, numeric_scale=2.0)
        c1 = make_claim(report_id=1, value=10.0, unit="pct")
        c2 = make_claim(report_id=2, value=12.0, unit="pct")
        s = hybrid_similarity(c1, basis(0), c2, basis(0), params)
        assert abs(s - math.exp(-1.0)) < 1e-12

    def test_orthogonal_vectors_no_values(self):
        c1, c2 = make_claim(report_id=1), make_claim(report_id=2)
        assert hybrid_similarity(c1, basis(0), c2, basis(1), PARAMS) == 0.0

    def test_lambda_endpoints_bitwise(self):
        c1 = make_claim(report_id=1, value=3.0, unit="pct")
        c2 = make_claim(report_id=2, value=4.5, unit="pct")
        e1, e2 = basis(0), (basis(0) + basis(1)) / np.sqrt(2)
        s_sem = float(np.dot(e1, e2))
        s_num = math.exp(-1.5 / PARAMS.numeric_scale)
        assert hybrid_similarity(c1, e1, c2, e2, ConsensusParams(semantic_weight=1.0)) == s_sem
        assert hybrid_similarity(c1, e1, c2, e2, ConsensusParams(semantic_weight=0.0)) == s_num

    def test_unit_mismatch_falls_back_to_semantic(self):
        c1 = make_claim(report_id=1, value=3.0, unit="pct")
        c2 = make_claim(report_id=2, value=3.0, unit="usd")
        e1, e2 = basis(0), basis(0)
        assert hybrid_similarity(c1, e1, c2, e2, ConsensusParams(semantic_weight=0.25)) == 1.0

    def test_missing_value_falls_back_to_semantic(self):
        c1 = make_claim(report_id=1, value=3.0, unit="pct")
        c2 = make_claim(report_id=2)
        assert hybrid_similarity(c1, basis(0), c2, basis(0), PARAMS) == 1.0

    def test_numeric_agreement_strictly_decreasing(self):
        params = ConsensusParams(semantic_weight=0.0)
        e = basis(0)
        gaps = [0.0, 0.5, 1.0, 2.0, 5.0]
        sims = [
            hybrid_similarity(
                make_claim(report_id=1, value=0.0, unit="x"),
                e,
                make_claim(report_id=2, value=g, unit="x"),
                e,
                params,
            )
            for g in gaps
        ]
        assert all(a > b for a, b in zip(sims, sims[1:]))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        v1 = rng.standard_normal(8)
        v2 = rng.standard_normal(8)
        v1, v2 = v1 / np.linalg.norm(v1), v2 / np.linalg.norm(v2)
        has_val = rng.random() < 0.5
        c1 = make_claim(report_id=1, value=float(rng.normal()) if has_val else None, unit="u")
        c2 = make_claim(report_id=2, value=float(rng.normal()) if has_val else None, unit="u")
        assert hybrid_similarity(c1, v1, c2, v2, PARAMS) == hybrid_similarity(
            c2, v2, c1, v1, PARAMS
        )


class TestEmbedder:
    def test_unit_norm_and_determinism(self):
        emb = HashEmbedder()
        c = make_claim()
        v1, v2 = emb.embed(c), emb.embed(c)
        assert np.allclose(v1, v2)
        assert abs(np.linalg.norm(v1) - 1.0) < 1e-9

    def test_schema_equal_claims_cosine_one(self):
        emb = HashEmbedder()
        a = emb.embed(make_claim(report_id=1))
        b = emb.embed(make_claim(report_id=2))  # same schema, different report
        assert float(np.dot(a, b)) == pytest.approx(1.0, abs=1e-12)

    def test_different_predicates_not_aligned(self):
        emb = HashEmbedder()
        a = emb.embed(make_claim(predicate="trend-up"))
        b = emb.embed(make_claim(predicate="eps-beat"))
        assert float(np.dot(a, b)) < 0.75


def brute_force_components(n, edges):
    """Oracle: repeated flood fill over the explicit edge list."""
    adj = {i: set() for i in range(n)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen, comps = set(), []
    for i in range(n):
        if i in seen:
            continue
        stack, comp = [i], set()
        while stack:
            u = stack.pop()
            if u in comp:
                continue
            comp.add(u)
            stack.extend(adj[u] - comp)
        seen |= comp
        comps.append(tuple(sorted(comp)))
    return sorted(comps)


class TestGrouping:
    def test_complete_agreement_single_group(self):
        claims = [make_claim(report_id=i) for i in (1, 2, 3)]
        embeddings = embed_claims(claims)
        sims = pairwise_similarities(claims, embeddings, PARAMS)
        groups = build_consensus_groups(claims, sims, PARAMS)
        assert len(groups) == 1
        assert groups[0].members == (0, 1, 2)
        assert groups[0].report_ids == (1, 2, 3)

    def test_all_disagree_singletons(self):
        claims = [
            make_claim(report_id=i, predicate=f"view-{i}") for i in (1, 2, 3)
        ]
        embeddings = embed_claims(claims)
        sims = pairwise_similarities(claims, embeddings, PARAMS)
        groups = build_consensus_groups(claims, sims, PARAMS)
        assert [g.members for g in groups] == [(0,), (1,), (2,)]

    def test_same_report_claims_never_linked(self):
        claims = [make_claim(report_id=1), make_claim(report_id=1)]
        embeddings = embed_claims(claims)
        sims = pairwise_similarities(claims, embeddings, PARAMS)
        groups = build_consensus_groups(claims, sims, PARAMS)
        assert len(groups) == 2  # cosine 1 but same report: no edge

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n_reports = int(rng.integers(1, 6))
        claims = []
        for rep in range(1, n_reports + 1):
            for _ in range(int(rng.integers(1, 7))):
                claims.append(make_claim(report_id=rep, predicate=f"p{rng.integers(0, 4)}"))
        n = len(claims)
        sims = np.eye(n)
        for i in range(n):
            for j in range(i + 1, n):
                sims[i, j] = sims[j, i] = float(rng.uniform(-1, 1))
        groups = build_consensus_groups(claims, sims, PARAMS)
        edges = [
            (i, j)
            for i in range(n)
            for j in range(i + 1, n)
            if claims[i].report_id != claims[j].report_id
            and sims[i, j] >= PARAMS.edge_threshold
        ]
        assert sorted(g.members for g in groups) == brute_force_components(n, edges)


class TestScoring:
    def test_support_ratio(self):
        group = build_and_score([1, 2], n_reports=3)
        assert group.supp == pytest.approx(2 / 3, abs=1e-15)

    def test_singleton_convention(self):
        claims = [make_claim(report_id=1)]
        sims = np.eye(1)
        groups = build_consensus_groups(claims, sims, PARAMS)
        scored = score_group(groups[0], 4, sims, ConsensusParams(support_weight=0.5))
        assert scored.supp == 0.25
        assert scored.coh == 0.0
        assert scored.score == pytest.approx(0.125, abs=1e-15)  # 0.25 * alpha

    def test_three_member_hand_sum(self):
        claims = [make_claim(report_id=i) for i in (1, 2, 3)]
        sims = np.array(
            [
                [1.0, 0.9, 0.8],
                [0.9, 1.0, 0.7],
                [0.8, 0.7, 1.0],
            ]
        )
        groups = build_consensus_groups(claims, sims, PARAMS)
        assert len(groups) == 1
        scored = score_group(groups[0], 3, sims, ConsensusParams(support_weight=0.5))
        assert scored.coh == pytest.approx(0.8, abs=1e-12)
        assert scored.supp == 1.0
        assert scored.score == pytest.approx(0.9, abs=1e-12)

    def test_relabeling_invariance(self):
        claims = [
            make_claim(report_id=rep, predicate=f"p{k}")
            for rep in (1, 2, 3)
            for k in range(2)
        ]
        embeddings = embed_claims(claims)
        sims = pairwise_similarities(claims, embeddings, PARAMS)
        groups = [
            score_group(g, 3, sims, PARAMS)
            for g in build_consensus_groups(claims, sims, PARAMS)
        ]
        perm = {1: 3, 2: 1, 3: 2}
        relabeled = [
            make_claim(report_id=perm[c.report_id], predicate=c.predicate) for c in claims
        ]
        embeddings2 = embed_claims(relabeled)
        sims2 = pairwise_similarities(relabeled, embeddings2, PARAMS)
        groups2 = [
            score_group(g, 3, sims2, PARAMS)
            for g in build_consensus_groups(relabeled, sims2, PARAMS)
        ]
        key = lambda g: (round(g.supp, 9), round(g.coh, 9), round(g.score, 9), len(g.members))
        assert sorted(map(key, groups)) == sorted(map(key, groups2))


def build_and_score(report_ids, n_reports, predicate="trend-up"):
    claims = [make_claim(report_id=r, predicate=predicate) for r in report_ids]
    embeddings = embed_claims(claims)
    sims = pairwise_similarities(claims, embeddings, PARAMS)
    groups = build_consensus_groups(claims, sims, PARAMS)
    assert len(groups) == 1
    return score_group(groups[0], n_reports, sims, PARAMS)


class TestPartition:
    def scored_fixture(self, claims, n_reports):
        embeddings = embed_claims(claims)
        sims = pairwise_similarities(claims, embeddings, PARAMS)
        groups = build_consensus_groups(claims, sims, PARAMS)
        return [score_group(g, n_reports, sims, PARAMS) for g in groups], claims

    def test_high_confidence_promotion(self):
        claims = [make_claim(report_id=i) for i in (1, 2, 3)]
        groups, claims = self.scored_fixture(claims, 3)
        summary = partition_evidence(groups, claims, CUTOFF, PARAMS)
        assert len(summary.high_confidence) == 1
        assert summary.low_confidence == ()

    def test_future_claim_demotes_despite_score(self):
        claims = [
            make_claim(report_id=1),
            make_claim(report_id=2),
            make_claim(report_id=3, as_of=CUTOFF + timedelta(hours=2)),
        ]
        groups, claims = self.scored_fixture(claims, 3)
        summary = partition_evidence(groups, claims, CUTOFF, PARAMS)
        assert summary.high_confidence == ()
        assert summary.low_confidence[0].demotions == ("leakage",)
        assert summary.leakage_flags == (2,)

    def test_polarity_conflict_demotes(self):
        claims = [
            make_claim(report_id=1, polarity=1),
            make_claim(report_id=2, polarity=1),
            make_claim(report_id=3, polarity=-1),
        ]
        # force them into one group via an explicit similarity matrix
        sims = np.full((3, 3), 0.9)
        np.fill_diagonal(sims, 1.0)
        groups = build_consensus_groups(claims, sims, PARAMS)
        scored = [score_group(g, 3, sims, PARAMS) for g in groups]
        summary = partition_evidence(scored, claims, CUTOFF, PARAMS)
        assert summary.high_confidence == ()
        assert "polarity-conflict" in summary.low_confidence[0].demotions

    def test_five_group_fixture_matches_rule_replay_oracle(self):
        rng = stable_rng("partition-fixture")
        claims = []
        for rep in (1, 2, 3, 4):
            for k in range(3):
                future = rng.random() < 0.2
                claims.append(
                    make_claim(
                        report_id=rep,
                        predicate=f"p{k}",
                        polarity=int(rng.choice([-1, 0, 1])),
                        as_of=CUTOFF + timedelta(hours=3 if future else -3),
                    )
                )
        groups, claims = self.scored_fixture(claims, 4)
        summary = partition_evidence(groups, claims, CUTOFF, PARAMS)

        # oracle: replay the three rules independently per group
        for digest_list, expect_high in ((summary.high_confidence, True),
                                         (summary.low_confidence, False)):
            for digest in digest_list:
                members = [claims[i] for i in digest.members]
                leaked = any(c.as_of > CUTOFF for c in members)
                pols = {c.polarity for c in members}
                conflict = 1 in pols and -1 in pols
                promoted = (
                    not leaked and not conflict and digest.confidence >= PARAMS.high_conf_threshold
                )
                assert promoted == expect_high

        # exhaustive partition: every claim in exactly one digest
        all_members = [
            m
            for d in summary.high_confidence + summary.low_confidence
            for m in d.members
        ]
        assert sorted(all_members) == list(range(len(claims)))

    def test_digests_sorted_by_confidence(self):
        claims = [make_claim(report_id=i) for i in (1, 2)] + [
            make_claim(report_id=i, predicate="other") for i in (1, 2, 3)
        ]
        groups, claims = self.scored_fixture(claims, 3)
        summary = partition_evidence(groups, claims, CUTOFF, PARAMS)
        confs = [d.confidence for d in summary.high_confidence]
        assert confs == sorted(confs, reverse=True)


class TestScoreRanges:
    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_supp_coh_score_ranges(self, seed):
        rng = np.random.default_rng(seed)
        n_reports = int(rng.integers(1, 5))
        claims = [
            make_claim(report_id=rep, predicate=f"p{rng.integers(0, 3)}")
            for rep in range(1, n_reports + 1)
            for _ in range(int(rng.integers(1, 4)))
        ]
        embeddings = embed_claims(claims)
        sims = pairwise_similarities(claims, embeddings, PARAMS)
        for g in build_consensus_groups(claims, sims, PARAMS):
            scored = score_group(g, n_reports, sims, PARAMS)
            assert 0 < scored.supp <= 1
            assert -1.0 - 1e-9 <= scored.coh <= 1.0 + 1e-9
            assert min(0.0, scored.coh) - 1e-9 <= scored.score <= 1.0 + 1e-9
