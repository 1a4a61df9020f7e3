# tests/test_agents.py
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies

from modules.agents import (
    AgentView, PreferenceProfile, RandomStrategy, RoundScript, ScriptedStrategy,
    UtilityThresholdStrategy, WindowRule, build_strategy,
)
from modules.protocol.errors import ScriptExhausted
from modules.protocol.negotiation import validate_optin, validate_vote
from modules.protocol.types import REJECT, Accept, BidAnnouncement, VoteAnnouncement
from modules.utils.rng_utils import derive_seed


def _view(agent="A1", p_min=2, p_max=4, table=("b1", "b2"), space=("b1", "b2"), **kwargs):
    return AgentView(agent_id=agent, power=1, round_index=kwargs.pop("round_index", 1),
                     p_min=p_min, p_max=p_max, bid_space=space, bid_table=table, **kwargs)


class TestWindowRule:
    @pytest.mark.parametrize("rule, p_min, p_max, window", [
        (WindowRule.full_range(), 2, 4, (2, 4)),
        (WindowRule.majority_floor(), 2, 4, (3, 4)),
        (WindowRule.majority_floor(), 2, 5, (3, 5)),
        (WindowRule.majority_floor(), 4, 5, (4, 5)),
        (WindowRule.fixed_window(Fraction(1, 2), Fraction(7, 10)), 51, 100, (51, 70)),
        (WindowRule.fixed_window(0, Fraction(1, 3)), 2, 6, (2, 2)),
        (WindowRule.fixed_window(Fraction(9, 10), 1), 1, 5, (5, 5)),
    ])
    def test_windows(self, rule, p_min, p_max, window):
        assert rule.window(p_min, p_max) == window

    @given(strategies.integers(min_value=1, max_value=50), strategies.integers(min_value=0, max_value=50),
           strategies.fractions(min_value=0, max_value=1), strategies.fractions(min_value=0, max_value=1))
    def test_fixed_window_is_always_a_legal_vote(self, p_min, extra, a, b):
        lo, hi = min(a, b), max(a, b)
        p_max = p_min + extra
        c_min, c_max = WindowRule.fixed_window(lo, hi).window(p_min, p_max)
        assert validate_vote(Accept(c_min, c_max), p_min, p_max) is None

    def test_invalid_rules(self):
        with pytest.raises(ValueError):
            WindowRule("widest")
        with pytest.raises(ValueError):
            WindowRule.fixed_window(Fraction(3, 4), Fraction(1, 4))


class TestScripted:
    def test_replays_the_script(self):
        script = RoundScript(bid="b1", votes={"b1": Accept(2, 4), "b2": REJECT},
                             optin={"b1": Accept(3, 4), "b2": REJECT})
        strategy = ScriptedStrategy("A1", {1: script})
        assert strategy.on_bid_request(_view()).bid == "b1"
        assert strategy.on_vote_request(_view()).votes == {"b1": Accept(2, 4), "b2": REJECT}
        assert strategy.on_optin_request(_view()).votes["b1"] == Accept(3, 4)

    def test_unused_entries(self):
        script = {1: RoundScript(bid="b1", votes={"b1": Accept(2, 4), "b2": REJECT}), 2: RoundScript(bid="b2")}
        strategy = ScriptedStrategy("A1", script)
        strategy.on_bid_request(_view())
        assert strategy.unused_entries() == [(1, "votes"), (2, "bid")]
        strategy.on_vote_request(_view())
        assert strategy.unused_entries() == [(2, "bid")]

    def test_missing_entry_raises(self):
        strategy = ScriptedStrategy("A1", {1: RoundScript(bid="b1")})
        with pytest.raises(ScriptExhausted) as info:
            strategy.on_vote_request(_view())
        assert info.value.request == "votes"
        with pytest.raises(ScriptExhausted):
            strategy.on_bid_request(_view(round_index=2))


class TestUtility:
    def _strategy(self, window=WindowRule.full_range()):
        profile = PreferenceProfile({"b1": Fraction(9, 10), "b2": Fraction(3, 10)}, Fraction(1, 2), window)
        return UtilityThresholdStrategy(profile)

    def test_bids_the_best_bid(self):
        assert self._strategy().on_bid_request(_view()).bid == "b1"

    def test_votes_by_reservation(self):
        votes = self._strategy().on_vote_request(_view()).votes
        assert votes == {"b1": Accept(2, 4), "b2": REJECT}

    def test_majority_window(self):
        votes = self._strategy(WindowRule.majority_floor()).on_vote_request(_view()).votes
        assert votes["b1"] == Accept(3, 4)

    def test_optin_flips_when_acceptors_reach_the_floor(self):
        bids = BidAnnouncement((("A1", "b1", 1), ("A2", "b2", 1), ("A3", "b2", 2)))
        votes = VoteAnnouncement((
            ("A1", (("b1", Accept(2, 4)), ("b2", REJECT))),
            ("A2", (("b1", REJECT), ("b2", Accept(2, 4)))),
            ("A3", (("b1", REJECT), ("b2", Accept(3, 4)))),
        ))
        view = _view(bid_announcement=bids, vote_announcement=votes)
        optin = self._strategy().on_optin_request(view).votes
        assert optin["b1"] == Accept(2, 4)
        assert optin["b2"] == Accept(2, 4)
        for bid, vote in optin.items():
            assert validate_optin(votes.votes_of("A1")[bid], vote, 2, 4) is None

    def test_optin_keeps_reject_without_support(self):
        bids = BidAnnouncement((("A1", "b1", 1), ("A2", "b2", 1)))
        votes = VoteAnnouncement((
            ("A1", (("b1", Accept(2, 2)), ("b2", REJECT))),
            ("A2", (("b1", REJECT), ("b2", REJECT))),
        ))
        optin = self._strategy().on_optin_request(_view(p_max=2, bid_announcement=bids,
                                                        vote_announcement=votes)).votes
        assert optin == {"b1": Accept(2, 2), "b2": REJECT}


class TestRandom:
    def test_actions_are_always_legal(self):
        rng = random.Random(3)
        for trial in range(10_000):
            p_min = rng.randint(1, 6)
            p_max = p_min + rng.randint(0, 8)
            table = tuple(f"b{i}" for i in range(rng.randint(1, 4)))
            strategy = RandomStrategy(trial, rng.random())
            view = _view(p_min=p_min, p_max=p_max, table=table, space=table)
            assert strategy.on_bid_request(view).bid in table
            votes = strategy.on_vote_request(view).votes
            assert set(votes) == set(table)
            for vote in votes.values():
                assert validate_vote(vote, p_min, p_max) is None
            announcement = VoteAnnouncement((("A1", tuple((b, votes[b]) for b in table)),))
            optin = strategy.on_optin_request(
                _view(p_min=p_min, p_max=p_max, table=table, space=table, vote_announcement=announcement)).votes
            for bid in table:
                assert validate_optin(votes[bid], optin[bid], p_min, p_max) is None

    def test_same_seed_same_actions(self):
        first, second = RandomStrategy(42), RandomStrategy(42)
        for _ in range(20):
            assert first.on_bid_request(_view()) == second.on_bid_request(_view())
            assert first.on_vote_request(_view()) == second.on_vote_request(_view())

    def test_requires_bid_space(self):
        with pytest.raises(ValueError):
            RandomStrategy(1).on_bid_request(_view(space=()))


class TestFactory:
    def test_random_seed_is_derived_from_run_seed(self):
        strategy = build_strategy("F6", "random", {"seed": None}, run_seed=9)
        assert strategy.seed == derive_seed(9, "agent", "F6")
        assert build_strategy("F6", "random", {"seed": 5}, run_seed=9).seed == 5

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            build_strategy("A1", "oracle", {})

    def test_kinds(self):
        assert isinstance(build_strategy("A1", "scripted", {"rounds": {}}), ScriptedStrategy)
        assert isinstance(build_strategy("A1", "utility", {}), UtilityThresholdStrategy)
