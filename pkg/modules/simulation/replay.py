# modules/simulation/replay.py
"""
トレースの再生

トレースに記録された提出（ビッド・投票・オプトイン・除外・既定値）だけを状態機械に流し直し、
アナウンス・実行可能グループ・合意・終了をもう一度生成して、記録と1件ずつ突き合わせる。
"""
from typing import Sequence, Union

from modules.consensus.engine import Engine
from modules.protocol.errors import MopacError, TraceMismatch
from modules.protocol.negotiation import NegotiationState, new_negotiation
from modules.protocol.types import AgentId, Bid, Phase, ProtocolParams, TerminationPolicy
from modules.utils.logger_utils import get_logger, log_function_call
from .runner import finish_round
from .trace import (
    AGENT_DROPPED, BID_ANNOUNCEMENT, BID_SUBMITTED, DEFAULT_SUBSTITUTED, NEGOTIATION_ENDED,
    NEGOTIATION_STARTED, OPTIN_SUBMITTED, VIABLE_GROUPS_COMPUTED, VOTE_ANNOUNCEMENT,
    VOTE_SUBMITTED, TraceEvent, TraceRecorder, vote_from_dict,
)

logger = get_logger(__name__)


class TraceReplayer:
    """記録済みイベントを1件ずつ適用し、再生成したイベントと比較する"""

    def __init__(self, engine: Union[str, Engine] = "pruned"):
        self.engine = engine
        self.recorder = TraceRecorder()
        self.state: NegotiationState = None

    def _start(self, event: TraceEvent) -> None:
        payload = event.payload
        params = ProtocolParams(
            p_min=payload["p_min"],
            max_rounds=payload["max_rounds"],
            termination_policy=TerminationPolicy.parse(payload["policy"]),
            rng_seed=payload["seed"],
        )
        self.state = new_negotiation([tuple(item) for item in payload["roster"]], params)
        self.recorder.negotiation_started(self.state, payload.get("name", ""))

    def _apply(self, event: TraceEvent) -> None:
        kind = event.kind
        if kind == NEGOTIATION_STARTED:
            if self.state is not None:
                raise TraceMismatch(event.seq, "NegotiationStarted が2回あります")
            self._start(event)
            return
        if self.state is None:
            raise TraceMismatch(event.seq, "NegotiationStarted より前にイベントがあります")

        state = self.state
        payload = event.payload
        if kind == BID_SUBMITTED:
            state.submit_bid(AgentId(payload["agent"]), Bid(payload["bid"]))
            self.recorder.bid_submitted(state, payload["agent"], payload["bid"])
        elif kind == AGENT_DROPPED:
            state.drop_agent(AgentId(payload["agent"]))
            self.recorder.agent_dropped(state, payload["agent"], payload["reason"])
        elif kind == BID_ANNOUNCEMENT:
            self.recorder.bid_announcement(state, state.close_bidding())
        elif kind == VOTE_SUBMITTED:
            vote = vote_from_dict(payload["vote"])
            state.submit_vote(AgentId(payload["agent"]), Bid(payload["bid"]), vote)
            self.recorder.vote_submitted(state, payload["agent"], payload["bid"], vote)
        elif kind == VOTE_ANNOUNCEMENT:
            self.recorder.vote_announcement(state, state.close_voting())
        elif kind == OPTIN_SUBMITTED:
            vote = vote_from_dict(payload["vote"])
            state.submit_optin(AgentId(payload["agent"]), Bid(payload["bid"]), vote)
            self.recorder.optin_submitted(state, payload["agent"], payload["bid"], vote)
        elif kind == DEFAULT_SUBSTITUTED:
            vote = vote_from_dict(payload["vote"])
            agent, bid = AgentId(payload["agent"]), Bid(payload["bid"])
            if state.phase == Phase.VOTING:
                state.submit_vote(agent, bid, vote)
            else:
                state.submit_optin(agent, bid, vote)
            self.recorder.default_substituted(state, state.phase, agent, bid, vote)
        elif kind == VIABLE_GROUPS_COMPUTED:
            # DealStruck / RoundContinued / NegotiationEnded もここで再生成される
            finish_round(state, self.recorder, self.engine)
        elif kind == NEGOTIATION_ENDED:
            # ラウンド解決を経ない終了（メディエーターでの除外後に p_min に届かない場合）
            state.terminate(payload["reason"])
            self.recorder.negotiation_ended(state, event.round)
        else:
            raise TraceMismatch(event.seq, f"ここでは生成されないはずのイベントです: {kind}")

    def _compare(self, index: int, original: TraceEvent) -> None:
        produced = self.recorder.events[index]
        if produced.to_dict() != original.to_dict():
            logger.error(f"トレース不一致 seq={original.seq}: 記録={original.kind}, 再生={produced.kind}")
            raise TraceMismatch(
                original.seq,
                f"記録 {original.to_json_line()} / 再生 {produced.to_json_line()}",
            )

    def replay(self, events: Sequence[TraceEvent]) -> NegotiationState:
        for index, original in enumerate(events):
            if index >= len(self.recorder.events):
                try:
                    self._apply(original)
                except TraceMismatch:
                    raise
                except (MopacError, KeyError, ValueError, TypeError) as e:
                    logger.error(f"トレース再生エラー seq={original.seq}: {e}")
                    raise TraceMismatch(original.seq, f"{original.kind} を適用できません: {e}") from e
            if index >= len(self.recorder.events):
                raise TraceMismatch(original.seq, f"{original.kind} が再生成されませんでした")
            self._compare(index, original)

        if len(self.recorder.events) != len(events):
            extra = self.recorder.events[len(events)]
            raise TraceMismatch(extra.seq, f"記録に無いイベントが再生成されました: {extra.kind}")
        if self.state is None:
            raise TraceMismatch(0, "トレースが空です")
        return self.state


@log_function_call
def replay_trace(events: Sequence[TraceEvent], engine: Union[str, Engine] = "pruned") -> NegotiationState:
    """
    トレースの提出を状態機械に流し直し、記録と完全に一致することを確かめる

    Args:
        events: 記録されたイベント列
        engine: 実行可能グループの列挙エンジン

    Returns:
        NegotiationState: 再生後の状態

    Raises:
        TraceMismatch: 最初に一致しなかったイベントの seq つき
    """
    return TraceReplayer(engine).replay(events)

