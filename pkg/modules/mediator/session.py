# modules/mediator/session.py
"""
メディエーターの1セッション分の進行役

接続処理はメッセージを queue に積むだけで、状態機械を触るのはこのクラスの run() だけ。
受け取った行動はその場で検証し（エラーは送信元に返す）、フェーズの締め切り時に
ロスター順・ビッド一覧順でまとめて状態機械に記録する。到着順は結果に影響しない。

締め切りまでに揃わなかった行動は既定値で埋める:
    ビッド      -> そのエージェントを除外（p_max は再計算）
    投票        -> 未投票のビッドすべてに Reject
    オプトイン  -> 投票フェーズの投票をそのまま引き継ぐ
"""
import asyncio
from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Tuple, Union

from modules.consensus.engine import Engine
from modules.protocol.errors import AlreadyBid, AlreadyVoted, MopacError, ProtocolError
from modules.protocol.negotiation import NegotiationState, new_negotiation
from modules.protocol.types import REJECT, AgentId, Bid, Phase, Vote
from modules.resolution.policies import REASON_FEW_AGENTS, REASON_UNREACHABLE, RoundResolution
from modules.simulation.runner import RunResult, finish_round
from modules.simulation.scenario_loader import TOKEN_PATTERN
from modules.simulation.trace import (
    TraceRecorder, bid_announcement_payload, deal_payload, vote_announcement_payload, vote_from_dict,
)
from modules.utils.logger_utils import get_logger
from modules.utils.timeout_utils import PhaseDeadline
from .session_config import SessionConfig
from .wire import (
    AUTH_FAILED, BAD_MESSAGE, DUPLICATE_REGISTRATION, NOT_REGISTERED, PROTOCOL_VERSION,
    SESSION_MISMATCH, UNSUPPORTED_VERSION, WireMessage, error_message,
)

logger = get_logger(__name__)

DROP_REASON_TIMEOUT = "timeout"


class SessionAborted(MopacError):
    code = "session_aborted"


class Connection(ABC):
    """エージェント1人分の送信口（ソケットでもテスト用の偽物でもよい）"""

    closed = False

    @abstractmethod
    async def send(self, message: WireMessage) -> None:
        ...


class MediatorSession:
    """1つのセッションを登録から終了まで進めるクラス"""

    def __init__(self, config: SessionConfig, engine: Union[str, Engine] = "pruned"):
        self.config = config
        self.engine = engine
        self.connections: Dict[AgentId, Connection] = {}
        self.recorder = TraceRecorder()
        self.state: Optional[NegotiationState] = None
        self._queue: Optional[asyncio.Queue] = None
        self.pending_bids: Dict[AgentId, Bid] = {}
        self.pending_votes: Dict[Tuple[AgentId, Bid], Vote] = {}
        self.pending_optins: Dict[Tuple[AgentId, Bid], Vote] = {}
        self.handlers = {
            "register": self._on_register,
            "bid": self._on_bid,
            "vote": self._on_vote,
            "optin": self._on_optin,
        }

    @property
    def session_id(self) -> str:
        return self.config.session_id

    @property
    def queue(self) -> asyncio.Queue:
        # イベントループの中で初めて触ったときに作る
        if self._queue is None:
            self._queue = asyncio.Queue()
        return self._queue

    def submit(self, connection: Connection, message: WireMessage) -> None:
        """接続処理から呼ばれる唯一の入口"""
        self.queue.put_nowait((connection, message))

    # ---- 送信 ----

    async def _reply(self, connection: Connection, message: WireMessage) -> None:
        if not connection.closed:
            await connection.send(message)

    async def _error(self, connection: Connection, code: str, detail: str, ref_type: str = None, **extra) -> None:
        logger.warning(f"[{self.session_id}] エラー応答 {code}: {detail}")
        await self._reply(connection, error_message(code, detail, self.session_id, ref_type, **extra))

    async def _send(self, recipient: AgentId, kind: str, **fields) -> None:
        connection = self.connections.get(recipient)
        if connection is not None:
            await self._reply(connection, WireMessage(kind, {"session": self.session_id, **fields}))

    async def _broadcast(self, kind: str, **fields) -> None:
        for agent in self.state.agents:
            await self._send(agent, kind, **fields)

    # ---- 受信 ----

    async def _dispatch(self, connection: Connection, message: WireMessage) -> None:
        if message.get("session") != self.session_id:
            await self._error(connection, SESSION_MISMATCH, f"セッションIDが違います: {message.get('session')!r}",
                              message.type)
            return
        handler = self.handlers.get(message.type)
        if handler is None:
            await self._error(connection, BAD_MESSAGE, f"エージェントからは送れない種別です: {message.type}",
                              message.type)
            return
        if message.type == "register":
            await handler(connection, message)
            return
        agent = await self._authenticate(connection, message)
        if agent is None:
            return
        if self.state is None:
            await self._error(connection, "wrong_phase", "セッションはまだ開始していません", message.type)
            return
        await handler(connection, agent, message)

    def _token_ok(self, agent, token) -> bool:
        return agent in self.config.tokens and token == self.config.tokens[agent]

    async def _authenticate(self, connection: Connection, message: WireMessage) -> Optional[AgentId]:
        agent = message.get("agent")
        if not self._token_ok(agent, message.get("token")):
            await self._error(connection, AUTH_FAILED, f"認証に失敗しました: {agent!r}", message.type)
            return None
        if self.connections.get(agent) is not connection:
            await self._error(connection, NOT_REGISTERED, f"この接続では登録されていません: {agent}", message.type)
            return None
        return AgentId(agent)

    async def _on_register(self, connection: Connection, message: WireMessage) -> None:
        agent = message.get("agent")
        if message.get("protocol_version") != PROTOCOL_VERSION:
            await self._error(connection, UNSUPPORTED_VERSION,
                              f"protocol_version は {PROTOCOL_VERSION} のみ対応です", "register")
            return
        if not self._token_ok(agent, message.get("token")):
            await self._error(connection, AUTH_FAILED, f"認証に失敗しました: {agent!r}", "register")
            return
        if agent in self.connections:
            await self._error(connection, DUPLICATE_REGISTRATION, f"既に登録済みです: {agent}", "register")
            return
        self.connections[AgentId(agent)] = connection
        logger.info(f"[{self.session_id}] 登録: {agent} ({len(self.connections)}/{len(self.config.roster)})")
        await self._reply(connection, WireMessage("registered", {
            "session": self.session_id,
            "agent": agent,
            "protocol_version": PROTOCOL_VERSION,
            "power": self.config.power_of(AgentId(agent)),
            "p_min": self.config.params.p_min,
            "bid_space": list(self.config.bid_space),
        }))

    async def _on_bid(self, connection: Connection, agent: AgentId, message: WireMessage) -> None:
        bid = message.get("bid")
        if not isinstance(bid, str) or not TOKEN_PATTERN.match(bid):
            await self._error(connection, BAD_MESSAGE, f"ビッドが不正です: {bid!r}", "bid")
            return
        try:
            self.state.check_bid(agent, Bid(bid))
            if agent in self.pending_bids:
                raise AlreadyBid(agent)
        except ProtocolError as e:
            await self._error(connection, e.code, str(e), "bid")
            return
        self.pending_bids[agent] = Bid(bid)

    def _parse_votes(self, message: WireMessage) -> List[Tuple[Bid, Vote]]:
        items = message.get("votes")
        if not isinstance(items, list) or not items:
            raise ValueError("votes は空でない配列です")
        parsed = []
        for item in items:
            if not isinstance(item, dict) or not isinstance(item.get("bid"), str):
                raise ValueError(f"投票の形式が不正です: {item!r}")
            parsed.append((Bid(item["bid"]), vote_from_dict(item.get("vote"))))
        return parsed

    async def _collect_votes(self, connection: Connection, agent: AgentId, message: WireMessage,
                             pending: Dict, check) -> None:
        # メッセージ単位で全部受理するか全部捨てるか
        try:
            parsed = self._parse_votes(message)
        except ValueError as e:
            await self._error(connection, BAD_MESSAGE, str(e), message.type)
            return
        seen = set()
        try:
            for bid, vote in parsed:
                check(agent, bid, vote)
                if (agent, bid) in pending or bid in seen:
                    raise AlreadyVoted(agent, bid)
                seen.add(bid)
        except ProtocolError as e:
            await self._error(connection, e.code, str(e), message.type, bid=bid)
            return
        for bid, vote in parsed:
            pending[(agent, bid)] = vote

    async def _on_vote(self, connection: Connection, agent: AgentId, message: WireMessage) -> None:
        await self._collect_votes(connection, agent, message, self.pending_votes, self.state.check_vote)

    async def _on_optin(self, connection: Connection, agent: AgentId, message: WireMessage) -> None:
        await self._collect_votes(connection, agent, message, self.pending_optins, self.state.check_optin)

    # ---- フェーズ ----

    def _phase_complete(self, phase: Phase) -> bool:
        state = self.state
        if phase == Phase.BIDDING:
            return all(agent in self.pending_bids for agent in state.agents)
        pending = self.pending_votes if phase == Phase.VOTING else self.pending_optins
        return all((agent, bid) in pending for agent in state.agents for bid in state.bid_table)

    async def collect_with_timeout(self, phase: Phase, deadline: PhaseDeadline) -> bool:
        """
        締め切りまで queue のメッセージを処理する

        Returns:
            bool: 締め切り前に全員分が揃った場合はTrue（揃わなければ既定値で埋める）
        """
        while not self._phase_complete(phase):
            remaining = deadline.remaining()
            if remaining <= 0:
                break
            try:
                connection, message = await asyncio.wait_for(self.queue.get(), remaining)
            except asyncio.TimeoutError:
                break
            await self._dispatch(connection, message)
        complete = self._phase_complete(phase)
        if not complete:
            deadline.expired()
        return complete

    def _deadline(self, phase: Phase) -> PhaseDeadline:
        loop = asyncio.get_running_loop()
        return PhaseDeadline(self.config.phase_timeout, clock=loop.time,
                             label=f"{self.session_id} ラウンド{self.state.round_index} {phase.value}")

    async def _bidding(self) -> bool:
        state = self.state
        self.pending_bids = {}
        for agent in state.agents:
            await self._send(agent, "bid_request", round=state.round_index, agent=agent,
                             power=state.power_of(agent), p_min=state.params.p_min, p_max=state.p_max,
                             bid_space=list(self.config.bid_space))
        await self.collect_with_timeout(Phase.BIDDING, self._deadline(Phase.BIDDING))

        for agent in [a for a in state.agents if a not in self.pending_bids]:
            state.drop_agent(agent)
            self.recorder.agent_dropped(state, agent, DROP_REASON_TIMEOUT)
            await self._send(agent, "result", round=state.round_index, status="dropped", deal=None,
                             negotiation_over=True, reason=DROP_REASON_TIMEOUT)
        for agent in state.agents:
            state.submit_bid(agent, self.pending_bids[agent])
            self.recorder.bid_submitted(state, agent, self.pending_bids[agent])

        if not state.can_reach_consensus():
            reason = REASON_FEW_AGENTS if len(state.roster) < 2 else REASON_UNREACHABLE
            state.terminate(reason)
            self.recorder.negotiation_ended(state)
            await self._broadcast("result", round=state.round_index, status="no_deal", deal=None,
                                  negotiation_over=True, reason=reason)
            return False

        announcement = state.close_bidding()
        self.recorder.bid_announcement(state, announcement)
        await self._broadcast("bid_announcement", round=state.round_index, p_max=state.p_max,
                              **bid_announcement_payload(announcement, state.bid_table))
        return True

    async def _voting(self) -> None:
        state = self.state
        self.pending_votes = {}
        await self._broadcast("vote_request", round=state.round_index, p_min=state.params.p_min,
                              p_max=state.p_max, bid_table=list(state.bid_table))
        await self.collect_with_timeout(Phase.VOTING, self._deadline(Phase.VOTING))

        for agent in state.agents:
            for bid in state.bid_table:
                vote = self.pending_votes.get((agent, bid))
                if vote is None:
                    state.submit_vote(agent, bid, REJECT)
                    self.recorder.default_substituted(state, Phase.VOTING, agent, bid, REJECT)
                else:
                    state.submit_vote(agent, bid, vote)
                    self.recorder.vote_submitted(state, agent, bid, vote)
        announcement = state.close_voting()
        self.recorder.vote_announcement(state, announcement)
        await self._broadcast("vote_announcement", round=state.round_index,
                              **vote_announcement_payload(announcement))

    async def _optin(self) -> None:
        state = self.state
        self.pending_optins = {}
        await self._broadcast("optin_request", round=state.round_index, p_min=state.params.p_min,
                              p_max=state.p_max, bid_table=list(state.bid_table))
        await self.collect_with_timeout(Phase.OPT_IN, self._deadline(Phase.OPT_IN))

        for agent in state.agents:
            for bid in state.bid_table:
                vote = self.pending_optins.get((agent, bid))
                if vote is None:
                    carried = state.votes[(agent, bid)]
                    state.submit_optin(agent, bid, carried)
                    self.recorder.default_substituted(state, Phase.OPT_IN, agent, bid, carried)
                else:
                    state.submit_optin(agent, bid, vote)
                    self.recorder.optin_submitted(state, agent, bid, vote)

    async def _deliver_results(self, resolution: RoundResolution) -> None:
        outcome = resolution.outcome
        for agent in resolution.round.agents:
            deal = next((d for d in outcome.deals if agent in d.members), None)
            if deal is not None:
                status = "deal"
            elif self.state.finished:
                status = "no_deal"
            else:
                status = "continue"
            await self._send(agent, "result", round=resolution.round.round_index, status=status,
                             deal=deal_payload(deal) if deal else None,
                             negotiation_over=status != "continue", reason=outcome.reason)

    # ---- 全体 ----

    async def _await_registrations(self) -> None:
        timeout = self.config.registration_timeout
        deadline = asyncio.get_running_loop().time() + timeout if timeout else None
        while len(self.connections) < len(self.config.roster):
            if deadline is None:
                connection, message = await self.queue.get()
            else:
                remaining = deadline - asyncio.get_running_loop().time()
                try:
                    connection, message = await asyncio.wait_for(self.queue.get(), max(0.0, remaining))
                except asyncio.TimeoutError:
                    missing = [a for a in self.config.agents if a not in self.connections]
                    logger.error(f"[{self.session_id}] 登録が揃いませんでした: {missing}")
                    raise SessionAborted(f"登録が揃いませんでした: {', '.join(missing)}") from None
            await self._dispatch(connection, message)

    async def run(self) -> RunResult:
        """
        全員の登録を待ってからラウンドを終了まで進める

        Returns:
            RunResult: 最終状態とトレース

        Raises:
            SessionAborted: registration_timeout までに登録が揃わなかった場合
        """
        await self._await_registrations()
        self.state = new_negotiation(self.config.roster, self.config.params)
        self.recorder.negotiation_started(self.state, self.session_id)
        logger.info(f"[{self.session_id}] セッション開始")

        while not self.state.finished:
            if not await self._bidding():
                break
            await self._voting()
            await self._optin()
            resolution = finish_round(self.state, self.recorder, self.engine)
            await self._deliver_results(resolution)

        logger.info(f"[{self.session_id}] セッション終了: 合意{len(self.state.deals)}件, "
                    f"理由={self.state.termination_reason}")
        return RunResult(self.state, list(self.recorder.events))
