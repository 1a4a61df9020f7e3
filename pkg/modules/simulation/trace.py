# modules/simulation/trace.py
"""
ネゴシエーションのトレース（1行1イベントの JSON Lines）

各レコードのフィールド順は seq, round, phase, kind, payload で固定。
同じ入力からは常にバイト単位で同じトレースが得られる。
ペイロードの組み立て関数はメディエーターのワイヤー形式でも共用する。
"""
import json
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence

from modules.consensus.engine import ViableGroup
from modules.protocol.negotiation import NegotiationState
from modules.protocol.types import (
    REJECT, Accept, AgentId, Bid, BidAnnouncement, DealRecord, Phase, Vote, VoteAnnouncement,
)
from modules.utils.file_utils import read_text, write_lines
from modules.utils.rng_utils import RNG_ALGORITHM

NEGOTIATION_STARTED = "NegotiationStarted"
BID_SUBMITTED = "BidSubmitted"
AGENT_DROPPED = "AgentDropped"
BID_ANNOUNCEMENT = "BidAnnouncement"
VOTE_SUBMITTED = "VoteSubmitted"
VOTE_ANNOUNCEMENT = "VoteAnnouncement"
OPTIN_SUBMITTED = "OptInSubmitted"
DEFAULT_SUBSTITUTED = "DefaultSubstituted"
VIABLE_GROUPS_COMPUTED = "ViableGroupsComputed"
DEAL_STRUCK = "DealStruck"
ROUND_CONTINUED = "RoundContinued"
NEGOTIATION_ENDED = "NegotiationEnded"

EVENT_KINDS = (
    NEGOTIATION_STARTED, BID_SUBMITTED, AGENT_DROPPED, BID_ANNOUNCEMENT, VOTE_SUBMITTED,
    VOTE_ANNOUNCEMENT, OPTIN_SUBMITTED, DEFAULT_SUBSTITUTED, VIABLE_GROUPS_COMPUTED,
    DEAL_STRUCK, ROUND_CONTINUED, NEGOTIATION_ENDED,
)


# ---- ペイロードの部品 ----

def vote_to_dict(vote: Vote) -> Dict[str, Any]:
    if vote.accept:
        return {"accept": True, "c_min": vote.c_min, "c_max": vote.c_max}
    return {"accept": False}


def vote_from_dict(data: Dict[str, Any]) -> Vote:
    """
    Raises:
        ValueError: 形式が不正な場合
    """
    if not isinstance(data, dict) or not isinstance(data.get("accept"), bool):
        raise ValueError(f"投票の形式が不正です: {data!r}")
    if not data["accept"]:
        return REJECT
    c_min, c_max = data.get("c_min"), data.get("c_max")
    if not isinstance(c_min, int) or not isinstance(c_max, int) or isinstance(c_min, bool) or isinstance(c_max, bool):
        raise ValueError(f"c_min / c_max は整数です: {data!r}")
    return Accept(c_min, c_max)


def bid_announcement_payload(announcement: BidAnnouncement, bid_table: Sequence[Bid]) -> Dict[str, Any]:
    return {
        "entries": [[agent, bid, power] for agent, bid, power in announcement.entries],
        "bid_table": list(bid_table),
    }


def bid_announcement_from_payload(payload: Dict[str, Any]) -> BidAnnouncement:
    return BidAnnouncement(tuple(
        (AgentId(agent), Bid(bid), int(power)) for agent, bid, power in payload["entries"]
    ))


def vote_announcement_payload(announcement: VoteAnnouncement) -> Dict[str, Any]:
    return {
        "entries": [
            [agent, [[bid, vote_to_dict(vote)] for bid, vote in votes]]
            for agent, votes in announcement.entries
        ],
    }


def vote_announcement_from_payload(payload: Dict[str, Any]) -> VoteAnnouncement:
    return VoteAnnouncement(tuple(
        (AgentId(agent), tuple((Bid(bid), vote_from_dict(vote)) for bid, vote in votes))
        for agent, votes in payload["entries"]
    ))


def deal_payload(deal: DealRecord) -> Dict[str, Any]:
    return {"round": deal.round_index, "bid": deal.bid, "members": list(deal.members), "power": deal.power}


def group_payload(group: ViableGroup) -> Dict[str, Any]:
    return {"bid": group.bid, "members": list(group.members), "power": group.power}


# ---- イベント ----

@dataclass(frozen=True)
class TraceEvent:
    seq: int
    round: int
    phase: str
    kind: str
    payload: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"seq": self.seq, "round": self.round, "phase": self.phase,
                "kind": self.kind, "payload": self.payload}

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json_line(cls, line: str) -> "TraceEvent":
        """
        Raises:
            ValueError: JSON として読めない、または必須フィールドが欠けている場合
        """
        data = json.loads(line)
        missing = [key for key in ("seq", "round", "phase", "kind", "payload") if key not in data]
        if missing:
            raise ValueError(f"トレースのレコードに {', '.join(missing)} がありません")
        if data["kind"] not in EVENT_KINDS:
            raise ValueError(f"不明なイベントです: {data['kind']}")
        return cls(int(data["seq"]), int(data["round"]), str(data["phase"]), data["kind"], data["payload"])


class TraceRecorder:
    """
    イベントを採番しながら記録する

    記録用メソッドはシミュレーター・メディエーター・再生処理で共用する。
    """

    def __init__(self):
        self.events: List[TraceEvent] = []

    def emit(self, kind: str, round_index: int, phase: Phase, payload: Dict[str, Any]) -> TraceEvent:
        event = TraceEvent(len(self.events) + 1, round_index, phase.value, kind, payload)
        self.events.append(event)
        return event

    def negotiation_started(self, state: NegotiationState, name: str) -> TraceEvent:
        params = state.params
        return self.emit(NEGOTIATION_STARTED, state.round_index, state.phase, {
            "name": name,
            "roster": [[entry.agent, entry.power] for entry in state.roster],
            "p_min": params.p_min,
            "p_max": state.p_max,
            "max_rounds": params.max_rounds,
            "policy": params.termination_policy.value,
            "seed": params.rng_seed,
            "rng": RNG_ALGORITHM,
        })

    def bid_submitted(self, state: NegotiationState, agent: AgentId, bid: Bid) -> TraceEvent:
        return self.emit(BID_SUBMITTED, state.round_index, Phase.BIDDING, {"agent": agent, "bid": bid})

    def agent_dropped(self, state: NegotiationState, agent: AgentId, reason: str) -> TraceEvent:
        return self.emit(AGENT_DROPPED, state.round_index, Phase.BIDDING,
                         {"agent": agent, "reason": reason, "p_max": state.p_max})

    def bid_announcement(self, state: NegotiationState, announcement: BidAnnouncement) -> TraceEvent:
        payload = bid_announcement_payload(announcement, state.bid_table)
        payload["p_max"] = state.p_max
        return self.emit(BID_ANNOUNCEMENT, state.round_index, Phase.BIDDING, payload)

    def vote_submitted(self, state: NegotiationState, agent: AgentId, bid: Bid, vote: Vote) -> TraceEvent:
        return self.emit(VOTE_SUBMITTED, state.round_index, Phase.VOTING,
                         {"agent": agent, "bid": bid, "vote": vote_to_dict(vote)})

    def vote_announcement(self, state: NegotiationState, announcement: VoteAnnouncement) -> TraceEvent:
        return self.emit(VOTE_ANNOUNCEMENT, state.round_index, Phase.VOTING,
                         vote_announcement_payload(announcement))

    def optin_submitted(self, state: NegotiationState, agent: AgentId, bid: Bid, vote: Vote) -> TraceEvent:
        return self.emit(OPTIN_SUBMITTED, state.round_index, Phase.OPT_IN,
                         {"agent": agent, "bid": bid, "vote": vote_to_dict(vote)})

    def default_substituted(self, state: NegotiationState, phase: Phase, agent: AgentId,
                            bid: Bid, vote: Vote) -> TraceEvent:
        """タイムアウト時の既定の投票（投票フェーズは Reject、オプトインは前回の投票）"""
        return self.emit(DEFAULT_SUBSTITUTED, state.round_index, phase,
                         {"agent": agent, "bid": bid, "vote": vote_to_dict(vote)})

    def viable_groups(self, round_index: int, groups: Iterable[ViableGroup]) -> TraceEvent:
        return self.emit(VIABLE_GROUPS_COMPUTED, round_index, Phase.RESOLVED,
                         {"groups": [group_payload(group) for group in groups]})

    def deal_struck(self, deal: DealRecord) -> TraceEvent:
        return self.emit(DEAL_STRUCK, deal.round_index, Phase.RESOLVED, deal_payload(deal))

    def round_continued(self, state: NegotiationState, reason: str) -> TraceEvent:
        return self.emit(ROUND_CONTINUED, state.round_index - 1, Phase.RESOLVED, {
            "next_round": state.round_index,
            "agents": list(state.agents),
            "p_max": state.p_max,
            "reason": reason,
        })

    def negotiation_ended(self, state: NegotiationState, round_index: Optional[int] = None) -> TraceEvent:
        """round_index は最後に処理したラウンド（省略時は現在のラウンド）"""
        round_index = state.round_index if round_index is None else round_index
        no_deal = [entry.agent for entry in state.initial_roster if state.status_of(entry.agent) == "no_deal"]
        return self.emit(NEGOTIATION_ENDED, round_index, Phase.RESOLVED, {
            "reason": state.termination_reason,
            "rounds": round_index,
            "deals": [deal_payload(deal) for deal in state.deals],
            "no_deal": no_deal,
        })


def dump_trace(events: Iterable[TraceEvent]) -> List[str]:
    return [event.to_json_line() for event in events]


def write_trace(events: Iterable[TraceEvent], path: str) -> None:
    """トレースを JSON Lines で保存する（UTF-8, 改行LF）"""
    write_lines(dump_trace(events), path)


def parse_trace(text: str) -> List[TraceEvent]:
    """
    JSON Lines のテキストを TraceEvent の並びにする

    Raises:
        ValueError: 読めない行がある、または seq が増加していない場合（行番号つき）
    """
    events: List[TraceEvent] = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            event = TraceEvent.from_json_line(line)
        except (ValueError, TypeError) as e:
            raise ValueError(f"{number}行目: {e}") from e
        if events and event.seq <= events[-1].seq:
            raise ValueError(f"{number}行目: seq が増加していません ({event.seq})")
        events.append(event)
    return events


def load_trace(path: str) -> List[TraceEvent]:
    return parse_trace(read_text(path))


def final_deals(events: Sequence[TraceEvent]) -> Optional[List[Dict[str, Any]]]:
    """NegotiationEnded の合意一覧（終了していないトレースならNone）"""
    for event in reversed(events):
        if event.kind == NEGOTIATION_ENDED:
            return event.payload["deals"]
    return None
