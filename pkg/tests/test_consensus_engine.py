# tests/test_consensus_engine.py
import random
from itertools import combinations

import pytest
from hypothesis import given, settings, strategies

from conftest import random_round
from modules.consensus.engine import (
    ConsensusGroup, EngineStats, enumerate_candidate_groups, get_engine, group_power,
    is_consensus_group, is_viable, viable_groups_naive, viable_groups_pruned,
)
from modules.protocol.errors import SizeBelowTwo, UnknownAgent
from modules.protocol.types import REJECT, Accept, ProtocolParams, ResolvedRound, RosterEntry


def _reference(round_data):
    """定義どおりの総当たり: (ビッド, メンバー, パワー) の集合"""
    powers = round_data.power_map()
    found = set()
    for bid in round_data.bid_table:
        for size in range(2, len(round_data.agents) + 1):
            for members in combinations(round_data.agents, size):
                votes = [round_data.votes[(a, bid)] for a in members]
                if not all(v.accept for v in votes):
                    continue
                power = sum(powers[a] for a in members)
                if all(v.c_min <= power <= v.c_max for v in votes):
                    found.add((bid, members, power))
    return found


def _triples(groups):
    return {(g.bid, g.members, g.power) for g in groups}


class TestCandidateGroups:
    @pytest.mark.parametrize("n", range(2, 13))
    def test_count_is_two_to_the_n_minus_n_minus_one(self, n):
        roster = [(f"a{i}", 1) for i in range(n)]
        assert sum(1 for _ in enumerate_candidate_groups(roster)) == 2 ** n - n - 1

    def test_order_is_size_then_roster_lexicographic(self):
        roster = [("x", 1), ("y", 1), ("z", 1)]
        assert list(enumerate_candidate_groups(roster)) == [
            ("x", "y"), ("x", "z"), ("y", "z"), ("x", "y", "z"),
        ]


class TestGroupPredicates:
    def test_size_below_two(self):
        with pytest.raises(SizeBelowTwo):
            is_consensus_group(("A1",), "b1", {("A1", "b1"): Accept(1, 1)})

    def test_reject_breaks_consensus(self, s3_round):
        assert is_consensus_group(("A1", "A2"), "b1", s3_round.votes)
        assert not is_consensus_group(("A1", "A3"), "b1", s3_round.votes)

    def test_group_power(self, s3_round):
        assert group_power(("A1", "A2", "A3"), s3_round) == 4
        assert group_power(("A2",), [("A2", 1)]) == 1
        with pytest.raises(UnknownAgent):
            group_power(("A9",), s3_round)

    def test_viability_oracle(self):
        rng = random.Random(20240101)
        for _ in range(10_000):
            n = rng.randint(2, 6)
            powers = {f"a{i}": rng.randint(1, 4) for i in range(n)}
            members = tuple(sorted(rng.sample(sorted(powers), rng.randint(2, n))))
            power = sum(powers[a] for a in members)
            votes = {}
            for agent in members:
                lo = rng.randint(0, power + 2)
                votes[(agent, "b")] = Accept(lo, rng.randint(lo, power + 3))
            expected = all(votes[(a, "b")].c_min <= power <= votes[(a, "b")].c_max for a in members)
            assert is_viable(ConsensusGroup("b", members, power), votes) == expected


class TestS3Round:
    def test_viability_is_not_monotone(self, s3_round):
        # b2 は全員 Accept だが A1 の窓は (2,2)
        votes = s3_round.votes
        for members in [("A2", "A3"), ("A1", "A2"), ("A1", "A3"), ("A1", "A2", "A3")]:
            assert is_consensus_group(members, "b2", votes)
        assert is_viable(ConsensusGroup("b2", ("A2", "A3"), 2), votes)
        assert not is_viable(ConsensusGroup("b2", ("A1", "A2"), 3), votes)
        assert not is_viable(ConsensusGroup("b2", ("A1", "A2", "A3"), 4), votes)

    @settings(max_examples=200, deadline=None)
    @given(strategies.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_consensus_groups_are_downward_closed(self, seed):
        round_data = random_round(random.Random(seed), max_agents=6, max_bids=3)
        for bid in round_data.bid_table:
            for members in enumerate_candidate_groups(round_data.roster):
                if not is_consensus_group(members, bid, round_data.votes):
                    continue
                for size in range(2, len(members)):
                    for subset in combinations(members, size):
                        assert is_consensus_group(subset, bid, round_data.votes)

    @pytest.mark.parametrize("engine", ["naive", "pruned"])
    def test_viable_groups(self, s3_round, engine):
        groups = get_engine(engine)(s3_round)
        assert [(g.bid, g.members, g.power) for g in groups] == [
            ("b1", ("A1", "A2"), 3),
            ("b2", ("A2", "A3"), 2),
        ]
        assert groups[0].windows == {"A1": (2, 4), "A2": (3, 4)}

    def test_pruned_skips_rejected_supersets(self, s3_round):
        naive_stats, pruned_stats = EngineStats(), EngineStats()
        viable_groups_naive(s3_round, naive_stats)
        viable_groups_pruned(s3_round, pruned_stats)
        assert naive_stats.tested == 2 * 4
        assert pruned_stats.tested < naive_stats.tested


class TestEngineEquivalence:
    def test_random_instances(self):
        rng = random.Random(7)
        for _ in range(500):
            round_data = random_round(rng)
            naive = viable_groups_naive(round_data)
            pruned = viable_groups_pruned(round_data)
            assert [g.key for g in naive] == [g.key for g in pruned]
            assert _triples(naive) == _reference(round_data)
            assert all(g.power >= round_data.p_min for g in naive)

    @settings(max_examples=100, deadline=None)
    @given(strategies.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_engines_agree_on_generated_rounds(self, seed):
        round_data = random_round(random.Random(seed), max_agents=7, max_bids=3)
        assert [g.key for g in viable_groups_naive(round_data)] == \
            [g.key for g in viable_groups_pruned(round_data)]

    def test_bid_with_one_acceptor_tests_nothing(self):
        roster = (RosterEntry("a", 1), RosterEntry("b", 1), RosterEntry("c", 1))
        votes = {("a", "x"): Accept(1, 3), ("b", "x"): REJECT, ("c", "x"): REJECT}
        round_data = ResolvedRound(ProtocolParams(p_min=1), 1, roster, ("x",), votes)
        stats = EngineStats()
        assert viable_groups_pruned(round_data, stats) == []
        assert stats.tested == 0

    def test_window_cap_prunes_supersets(self):
        # 全員 Accept(2,2) なら3人以上の集合は作らない
        roster = tuple(RosterEntry(f"a{i}", 1) for i in range(6))
        votes = {(e.agent, "x"): Accept(2, 2) for e in roster}
        round_data = ResolvedRound(ProtocolParams(p_min=2), 1, roster, ("x",), votes)
        stats = EngineStats()
        groups = viable_groups_pruned(round_data, stats)
        assert len(groups) == 15
        assert stats.tested == 15 + 20
        assert stats.pruned == 20


def test_unknown_engine():
    with pytest.raises(ValueError):
        get_engine("quantum")


def test_engine_accepts_callable():
    assert get_engine(viable_groups_naive) is viable_groups_naive
