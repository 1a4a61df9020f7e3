# modules/agents/scripted.py
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from modules.protocol.errors import ScriptExhausted
from modules.protocol.types import Bid, Vote
from modules.utils.logger_utils import get_logger
from .base_strategy import BaseStrategy
from .views import AgentView, CastOptIn, CastVotes, PlaceBid

logger = get_logger(__name__)


@dataclass(frozen=True)
class RoundScript:
    """1ラウンド分の台本"""
    bid: Optional[Bid] = None
    votes: Optional[Dict[Bid, Vote]] = None
    optin: Optional[Dict[Bid, Vote]] = None


class ScriptedStrategy(BaseStrategy):
    """台本どおりに行動する戦略（テスト・シナリオ再現用）"""

    kind = "scripted"

    def __init__(self, agent_id: str, rounds: Dict[int, RoundScript]):
        """
        Args:
            agent_id: エラーメッセージ用のエージェントID
            rounds: ラウンド番号 -> RoundScript
        """
        self.agent_id = agent_id
        self.rounds = dict(rounds)
        self.requested = set()

    def _entry(self, view: AgentView, request: str):
        self.requested.add((view.round_index, request))
        script = self.rounds.get(view.round_index)
        value = getattr(script, request) if script else None
        if value is None:
            logger.error(f"台本切れ: {self.agent_id} {request} ラウンド{view.round_index}")
            raise ScriptExhausted(self.agent_id, request, view.round_index)
        return value

    def on_bid_request(self, view: AgentView) -> PlaceBid:
        return PlaceBid(self._entry(view, "bid"))

    def on_vote_request(self, view: AgentView) -> CastVotes:
        return CastVotes(dict(self._entry(view, "votes")))

    def on_optin_request(self, view: AgentView) -> CastOptIn:
        return CastOptIn(dict(self._entry(view, "optin")))

    def unused_entries(self) -> List[Tuple[int, str]]:
        """台本にあるのに一度も要求されなかった (ラウンド, 項目)"""
        unused = []
        for round_index in sorted(self.rounds):
            script = self.rounds[round_index]
            for request in ("bid", "votes", "optin"):
                if getattr(script, request) is not None and (round_index, request) not in self.requested:
                    unused.append((round_index, request))
        return unused
