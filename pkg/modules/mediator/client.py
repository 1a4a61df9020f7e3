# modules/mediator/client.py
"""
リモートエージェント（任意の BaseStrategy をワイヤープロトコルで動かす）
"""
import asyncio
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from modules.agents.base_strategy import BaseStrategy
from modules.agents.views import AgentView
from modules.protocol.types import AgentId, Bid, BidAnnouncement, VoteAnnouncement
from modules.simulation.trace import (
    bid_announcement_from_payload, vote_announcement_from_payload, vote_to_dict,
)
from modules.utils.logger_utils import get_logger
from .wire import PROTOCOL_VERSION, WireFormatError, WireMessage

logger = get_logger(__name__)


@dataclass
class ClientResult:
    """クライアントが受け取った結果とエラー"""
    results: List[Dict[str, Any]] = field(default_factory=list)
    errors: List[Dict[str, Any]] = field(default_factory=list)
    registered: bool = False

    @property
    def final(self) -> Optional[Dict[str, Any]]:
        return self.results[-1] if self.results else None


class RemoteAgentClient:
    """メディエーターに接続し、要求が来るたびに戦略を呼び出して応答するクライアント"""

    def __init__(self, strategy: BaseStrategy, agent_id: str, token: str, session_id: str,
                 bid_space: Tuple[Bid, ...] = ()):
        self.strategy = strategy
        self.agent_id = AgentId(agent_id)
        self.token = token
        self.session_id = session_id
        self.bid_space = tuple(bid_space)
        self.power = 0
        self.bid_announcement: Optional[BidAnnouncement] = None
        self.vote_announcement: Optional[VoteAnnouncement] = None
        self.outcome = ClientResult()
        self.finished = False

    def _message(self, kind: str, **fields) -> WireMessage:
        return WireMessage(kind, {"session": self.session_id, "agent": self.agent_id,
                                  "token": self.token, **fields})

    def register_message(self) -> WireMessage:
        return self._message("register", protocol_version=PROTOCOL_VERSION)

    def _view(self, message: WireMessage, **announcements) -> AgentView:
        return AgentView(
            agent_id=self.agent_id,
            power=message.get("power", self.power),
            round_index=message.get("round", 1),
            p_min=message.get("p_min"),
            p_max=message.get("p_max"),
            bid_space=self.bid_space,
            bid_table=tuple(message.get("bid_table", ())),
            **announcements,
        )

    def _votes_message(self, kind: str, votes: Dict[Bid, Any], table) -> WireMessage:
        return self._message(kind, votes=[{"bid": bid, "vote": vote_to_dict(votes[bid])}
                                          for bid in table if bid in votes])

    def handle(self, message: WireMessage) -> List[WireMessage]:
        """
        サーバーからのメッセージ1件を処理し、返信すべきメッセージを返す
        """
        kind = message.type
        if kind == "registered":
            self.power = message.get("power", 0)
            self.outcome.registered = True
            if not self.bid_space:
                self.bid_space = tuple(message.get("bid_space", ()))
        elif kind == "bid_request":
            self.power = message.get("power", self.power)
            self.bid_announcement = None
            self.vote_announcement = None
            if message.get("bid_space") and not self.bid_space:
                self.bid_space = tuple(message.get("bid_space"))
            action = self.strategy.on_bid_request(self._view(message))
            return [self._message("bid", bid=action.bid)]
        elif kind == "bid_announcement":
            self.bid_announcement = bid_announcement_from_payload(message.fields)
        elif kind == "vote_request":
            view = self._view(message, bid_announcement=self.bid_announcement)
            action = self.strategy.on_vote_request(view)
            return [self._votes_message("vote", action.votes, view.bid_table)]
        elif kind == "vote_announcement":
            self.vote_announcement = vote_announcement_from_payload(message.fields)
        elif kind == "optin_request":
            view = self._view(message, bid_announcement=self.bid_announcement,
                              vote_announcement=self.vote_announcement)
            action = self.strategy.on_optin_request(view)
            return [self._votes_message("optin", action.votes, view.bid_table)]
        elif kind == "result":
            self.outcome.results.append(dict(message.fields))
            if message.get("negotiation_over"):
                self.finished = True
        elif kind == "error":
            logger.warning(f"{self.agent_id}: エラー応答 {message.get('code')}: {message.get('detail')}")
            self.outcome.errors.append(dict(message.fields))
            if not self.outcome.registered and message.get("ref_type") == "register":
                # 登録を拒否された
                self.finished = True
        return []

    async def run(self, host: str, port: int) -> ClientResult:
        """
        接続して登録し、自分の最終結果を受け取るか接続が切れるまで応答を続ける
        """
        reader, writer = await asyncio.open_connection(host, port)
        try:
            writer.write(self.register_message().encode())
            await writer.drain()
            while not self.finished:
                line = await reader.readline()
                if not line:
                    logger.warning(f"{self.agent_id}: サーバーとの接続が切れました")
                    break
                try:
                    message = WireMessage.from_line(line)
                except WireFormatError as e:
                    logger.warning(f"{self.agent_id}: 読めないメッセージ: {e}")
                    continue
                for reply in self.handle(message):
                    writer.write(reply.encode())
                await writer.drain()
        finally:
            writer.close()
        return self.outcome
