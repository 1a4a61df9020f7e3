# modules/agents/random_strategy.py
import random

from modules.protocol.types import REJECT, Accept
from .base_strategy import BaseStrategy
from .views import AgentView, CastOptIn, CastVotes, PlaceBid


class RandomStrategy(BaseStrategy):
    """
    シード付き乱数で合法な行動をランダムに選ぶ戦略

    窓は常に有効範囲から引くので、投票・オプトインの制約に違反しない。
    """

    kind = "random"

    def __init__(self, seed: int, accept_probability: float = 0.5):
        self.seed = seed
        self.accept_probability = accept_probability
        self.rng = random.Random(seed)

    def _window(self, low: int, p_max: int) -> Accept:
        c_min = self.rng.randint(low, p_max)
        return Accept(c_min, self.rng.randint(c_min, p_max))

    def on_bid_request(self, view: AgentView) -> PlaceBid:
        if not view.bid_space:
            raise ValueError(f"ランダム戦略にはビッド空間が必要です: {view.agent_id}")
        return PlaceBid(self.rng.choice(view.bid_space))

    def on_vote_request(self, view: AgentView) -> CastVotes:
        votes = {}
        for bid in view.bid_table:
            if self.rng.random() < self.accept_probability:
                votes[bid] = self._window(view.p_min, view.p_max)
            else:
                votes[bid] = REJECT
        return CastVotes(votes)

    def on_optin_request(self, view: AgentView) -> CastOptIn:
        prior = view.own_votes()
        votes = {}
        for bid in view.bid_table:
            previous = prior.get(bid, REJECT)
            if previous.accept:
                # c'_min は [前回の c_min, p_max] から
                votes[bid] = self._window(previous.c_min, view.p_max)
            elif self.rng.random() < self.accept_probability:
                votes[bid] = self._window(view.p_min, view.p_max)
            else:
                votes[bid] = REJECT
        return CastOptIn(votes)

    def describe(self) -> str:
        return f"random(seed={self.seed})"
