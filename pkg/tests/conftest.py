# tests/conftest.py
import os
import random
import sys

import pytest

# プロジェクトルートをPythonパスに追加
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from modules.protocol.negotiation import new_negotiation
from modules.protocol.types import (
    Accept, ProtocolParams, REJECT, ResolvedRound, RosterEntry, TerminationPolicy,
)

SCENARIO_DIR = os.path.join(project_root, 'config', 'scenarios')
SESSION_DIR = os.path.join(project_root, 'config', 'sessions')
GOLDEN_DIR = os.path.join(os.path.dirname(__file__), 'golden')

S3_ROSTER = [("A1", 2), ("A2", 1), ("A3", 1)]
S3_VOTES = {
    ("A1", "b1"): Accept(2, 4), ("A1", "b2"): Accept(2, 2),
    ("A2", "b1"): Accept(3, 4), ("A2", "b2"): Accept(2, 4),
    ("A3", "b1"): REJECT, ("A3", "b2"): Accept(2, 4),
}


def scenario_path(name: str) -> str:
    return os.path.join(SCENARIO_DIR, f"{name}.scenario")


def random_round(rng: random.Random, max_agents: int = 8, max_bids: int = 5,
                 max_power: int = 4, accept_probability: float = 0.7) -> ResolvedRound:
    """ランダムな確定ラウンド（窓は [p_min, p_max] の中から引く）"""
    n = rng.randint(2, max_agents)
    roster = tuple(RosterEntry(f"a{i}", rng.randint(1, max_power)) for i in range(n))
    p_max = sum(entry.power for entry in roster)
    p_min = rng.randint(1, p_max)
    bid_table = tuple(f"b{j}" for j in range(rng.randint(1, max_bids)))
    votes = {}
    for entry in roster:
        for bid in bid_table:
            if rng.random() < accept_probability:
                c_min = rng.randint(p_min, p_max)
                votes[(entry.agent, bid)] = Accept(c_min, rng.randint(c_min, p_max))
            else:
                votes[(entry.agent, bid)] = REJECT
    params = ProtocolParams(p_min=p_min, max_rounds=3,
                            termination_policy=TerminationPolicy.REPEATED_EXTRACTION,
                            rng_seed=rng.randrange(2 ** 32))
    return ResolvedRound(params, 1, roster, bid_table, votes, dict(votes))


@pytest.fixture
def s3_params():
    return ProtocolParams(p_min=2)


@pytest.fixture
def s3_round(s3_params):
    roster = tuple(RosterEntry(agent, power) for agent, power in S3_ROSTER)
    return ResolvedRound(s3_params, 1, roster, ("b1", "b2"), dict(S3_VOTES), dict(S3_VOTES))


@pytest.fixture
def s3_state(s3_params):
    """S3 の投票をオプトインまで済ませた状態（Resolved 直前）"""
    state = new_negotiation(S3_ROSTER, s3_params)
    for agent, bid in (("A1", "b1"), ("A2", "b2"), ("A3", "b1")):
        state.submit_bid(agent, bid)
    state.close_bidding()
    for (agent, bid), vote in S3_VOTES.items():
        state.submit_vote(agent, bid, vote)
    state.close_voting()
    for (agent, bid), vote in S3_VOTES.items():
        state.submit_optin(agent, bid, vote)
    return state


@pytest.fixture
def s3_scenario_path():
    return scenario_path("s3")


@pytest.fixture
def scenario_paths():
    return sorted(
        os.path.join(SCENARIO_DIR, name)
        for name in os.listdir(SCENARIO_DIR) if name.endswith('.scenario')
    )
