# tests/test_protocol_core.py
import copy

import pytest

from conftest import S3_ROSTER, S3_VOTES
from modules.protocol.errors import (
    AlreadyBid, AlreadyVoted, DuplicateAgent, EmptyRoster, InvalidThresholds, MissingBids,
    MissingVotes, NegotiationFinished, NotResolved, OptInViolation, PMinExceedsPMax,
    SingleAgent, UnknownAgent, UnknownBid, ViolationKind, WrongPhase, ZeroPower,
)
from modules.protocol.negotiation import new_negotiation, validate_vote
from modules.protocol.types import (
    REJECT, Accept, BidAnnouncement, Phase, ProtocolParams, TerminationPolicy,
)


def _bidding_done(params):
    state = new_negotiation(S3_ROSTER, params)
    for agent, bid in (("A1", "b1"), ("A2", "b2"), ("A3", "b1")):
        state.submit_bid(agent, bid)
    state.close_bidding()
    return state


def _voting_done(params):
    state = _bidding_done(params)
    for (agent, bid), vote in S3_VOTES.items():
        state.submit_vote(agent, bid, vote)
    state.close_voting()
    return state


class TestNewNegotiation:
    def test_s3_initial_state(self, s3_params):
        state = new_negotiation(S3_ROSTER, s3_params)
        assert state.round_index == 1
        assert state.phase == Phase.BIDDING
        assert state.p_max == 4
        assert state.agents == ("A1", "A2", "A3")
        assert not state.finished

    @pytest.mark.parametrize("roster, params, error", [
        ([], ProtocolParams(p_min=1), EmptyRoster),
        ([("A1", 3)], ProtocolParams(p_min=1), SingleAgent),
        ([("A1", 1), ("A2", 0)], ProtocolParams(p_min=1), ZeroPower),
        ([("A1", 1), ("A1", 2)], ProtocolParams(p_min=1), DuplicateAgent),
        ([("A1", 1), ("A2", 1)], ProtocolParams(p_min=3), PMinExceedsPMax),
    ])
    def test_invalid_roster(self, roster, params, error):
        with pytest.raises(error):
            new_negotiation(roster, params)

    def test_p_min_equal_to_p_max_is_allowed(self):
        state = new_negotiation([("A1", 1), ("A2", 2)], ProtocolParams(p_min=3))
        assert state.can_reach_consensus()

    @pytest.mark.parametrize("kwargs", [
        {"p_min": 0},
        {"p_min": 1, "max_rounds": 0},
        {"p_min": 1, "rng_seed": -1},
        {"p_min": 1, "rng_seed": 2 ** 64},
    ])
    def test_params_validation(self, kwargs):
        with pytest.raises(ValueError):
            ProtocolParams(**kwargs)

    @pytest.mark.parametrize("text, policy", [
        ("one", TerminationPolicy.LARGEST_ONLY),
        ("LargestOnly", TerminationPolicy.LARGEST_ONLY),
        ("2", TerminationPolicy.REPEATED_EXTRACTION),
        ("RepeatedExtraction", TerminationPolicy.REPEATED_EXTRACTION),
    ])
    def test_policy_aliases(self, text, policy):
        assert TerminationPolicy.parse(text) is policy

    def test_unknown_policy(self):
        with pytest.raises(ValueError):
            TerminationPolicy.parse("three")


class TestBidding:
    def test_bid_table_deduplicates_in_first_seen_order(self, s3_params):
        state = _bidding_done(s3_params)
        assert state.bid_table == ["b1", "b2"]
        assert state.phase == Phase.VOTING
        assert state.bid_announcement() == BidAnnouncement((("A1", "b1", 2), ("A2", "b2", 1), ("A3", "b1", 1)))

    def test_second_bid_rejected_without_change(self, s3_params):
        state = new_negotiation(S3_ROSTER, s3_params)
        state.submit_bid("A1", "b1")
        before = copy.deepcopy(state)
        with pytest.raises(AlreadyBid):
            state.submit_bid("A1", "b2")
        assert state == before

    def test_unknown_agent(self, s3_params):
        state = new_negotiation(S3_ROSTER, s3_params)
        with pytest.raises(UnknownAgent):
            state.submit_bid("Z9", "b1")

    def test_close_with_missing_bids(self, s3_params):
        state = new_negotiation(S3_ROSTER, s3_params)
        state.submit_bid("A1", "b1")
        with pytest.raises(MissingBids) as info:
            state.close_bidding()
        assert info.value.agents == ("A2", "A3")
        assert state.phase == Phase.BIDDING

    def test_vote_during_bidding_is_wrong_phase(self, s3_params):
        state = new_negotiation(S3_ROSTER, s3_params)
        before = copy.deepcopy(state)
        with pytest.raises(WrongPhase):
            state.submit_vote("A1", "b1", Accept(2, 4))
        assert state == before

    def test_check_bid_does_not_record(self, s3_params):
        state = new_negotiation(S3_ROSTER, s3_params)
        state.check_bid("A1", "b1")
        assert state.current_bids == {}

    def test_drop_agent_recomputes_p_max(self, s3_params):
        state = new_negotiation(S3_ROSTER, s3_params)
        state.submit_bid("A1", "b1")
        state.drop_agent("A1")
        assert state.p_max == 2
        assert state.agents == ("A2", "A3")
        assert state.current_bids == {}


class TestVoting:
    @pytest.mark.parametrize("vote, kind", [
        (Accept(1, 3), ViolationKind.C_MIN_BELOW_P_MIN),
        (Accept(3, 2), ViolationKind.C_MAX_BELOW_C_MIN),
        (Accept(2, 5), ViolationKind.C_MAX_ABOVE_P_MAX),
    ])
    def test_invalid_thresholds(self, s3_params, vote, kind):
        state = _bidding_done(s3_params)
        with pytest.raises(InvalidThresholds) as info:
            state.submit_vote("A1", "b1", vote)
        assert info.value.kind == kind
        assert state.votes == {}

    def test_reject_is_always_valid(self):
        assert validate_vote(REJECT, 5, 5) is None

    def test_unknown_bid(self, s3_params):
        state = _bidding_done(s3_params)
        with pytest.raises(UnknownBid):
            state.submit_vote("A1", "b9", REJECT)

    def test_duplicate_vote(self, s3_params):
        state = _bidding_done(s3_params)
        state.submit_vote("A1", "b1", REJECT)
        with pytest.raises(AlreadyVoted):
            state.submit_vote("A1", "b1", Accept(2, 4))
        assert state.votes[("A1", "b1")] == REJECT

    def test_close_with_missing_votes(self, s3_params):
        state = _bidding_done(s3_params)
        state.submit_vote("A1", "b1", REJECT)
        with pytest.raises(MissingVotes) as info:
            state.close_voting()
        assert ("A1", "b2") in info.value.pairs
        assert state.phase == Phase.VOTING

    def test_vote_announcement_covers_every_pair(self, s3_params):
        state = _bidding_done(s3_params)
        for (agent, bid), vote in S3_VOTES.items():
            state.submit_vote(agent, bid, vote)
        announcement = state.close_voting()
        assert announcement.triple_count() == 3 * 2
        assert announcement.acceptors("b1") == ("A1", "A2")
        assert announcement.votes_of("A3") == {"b1": REJECT, "b2": Accept(2, 4)}


class TestOptIn:
    def test_reject_after_accept(self, s3_params):
        state = _voting_done(s3_params)
        with pytest.raises(OptInViolation) as info:
            state.submit_optin("A1", "b1", REJECT)
        assert info.value.kind == ViolationKind.REJECT_AFTER_ACCEPT
        assert state.optin_votes == {}

    def test_c_min_reduced(self, s3_params):
        state = _voting_done(s3_params)
        with pytest.raises(OptInViolation) as info:
            state.submit_optin("A2", "b1", Accept(2, 4))
        assert info.value.kind == ViolationKind.C_MIN_REDUCED

    def test_reject_may_switch_to_accept(self, s3_params):
        state = _voting_done(s3_params)
        state.submit_optin("A3", "b1", Accept(2, 4))
        assert state.optin_votes[("A3", "b1")] == Accept(2, 4)

    def test_tightening_is_allowed(self, s3_params):
        state = _voting_done(s3_params)
        state.submit_optin("A1", "b1", Accept(3, 3))
        assert state.optin_votes[("A1", "b1")] == Accept(3, 3)

    def test_close_requires_every_pair(self, s3_params):
        state = _voting_done(s3_params)
        state.submit_optin("A1", "b1", Accept(2, 4))
        with pytest.raises(MissingVotes):
            state.close_optin()

    def test_resolved_round_uses_optin_votes(self, s3_state):
        with pytest.raises(NotResolved):
            s3_state.resolved_round()
        s3_state.close_optin()
        round_data = s3_state.resolved_round()
        assert round_data.p_max == 4
        assert round_data.votes == S3_VOTES
        assert round_data.bid_table == ("b1", "b2")


class TestTermination:
    def test_operations_after_terminate(self, s3_params):
        state = new_negotiation(S3_ROSTER, s3_params)
        state.terminate("deadline")
        assert state.finished
        assert state.termination_reason == "deadline"
        with pytest.raises(NegotiationFinished):
            state.submit_bid("A1", "b1")
        with pytest.raises(NegotiationFinished):
            state.terminate("deadline")

    def test_start_next_round_keeps_listed_agents(self, s3_state):
        s3_state.close_optin()
        s3_state.start_next_round(["A2", "A3"])
        assert s3_state.round_index == 2
        assert s3_state.phase == Phase.BIDDING
        assert s3_state.agents == ("A2", "A3")
        assert s3_state.bid_table == []
        assert s3_state.votes == {}
