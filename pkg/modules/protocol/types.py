# modules/protocol/types.py
"""
MOPaC のドメイン型

エージェントID・ビッドは短いテキストトークン、パワーは1以上の整数で表す。
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, NewType, Optional, Tuple, Union

AgentId = NewType("AgentId", str)
Bid = NewType("Bid", str)
Power = int


class TerminationPolicy(str, Enum):
    """継続・終了の方式"""
    LARGEST_ONLY = "one"          # 最大パワーのグループ1つで全員終了
    REPEATED_EXTRACTION = "two"   # 互いに素なグループを順に取り出し、残りは次ラウンドへ

    @classmethod
    def parse(cls, text: str) -> "TerminationPolicy":
        """'one' / 'two' / 'LargestOnly' / 'RepeatedExtraction' を受け付ける"""
        aliases = {
            "one": cls.LARGEST_ONLY, "1": cls.LARGEST_ONLY, "largestonly": cls.LARGEST_ONLY,
            "two": cls.REPEATED_EXTRACTION, "2": cls.REPEATED_EXTRACTION,
            "repeatedextraction": cls.REPEATED_EXTRACTION,
        }
        key = str(text).strip().lower().replace("_", "")
        if key not in aliases:
            raise ValueError(f"不明な終了方式です: {text}")
        return aliases[key]


class Phase(str, Enum):
    BIDDING = "Bidding"
    VOTING = "Voting"
    OPT_IN = "OptIn"
    RESOLVED = "Resolved"


@dataclass(frozen=True)
class ProtocolParams:
    """プロトコルのパラメータ"""
    p_min: Power
    max_rounds: int = 1
    termination_policy: TerminationPolicy = TerminationPolicy.LARGEST_ONLY
    rng_seed: int = 0

    def __post_init__(self):
        if self.p_min < 1:
            raise ValueError(f"p_min は1以上が必要です: {self.p_min}")
        if self.max_rounds < 1:
            raise ValueError(f"max_rounds は1以上が必要です: {self.max_rounds}")
        if not 0 <= self.rng_seed < 2 ** 64:
            raise ValueError(f"rng_seed は64bit符号なし整数です: {self.rng_seed}")


@dataclass(frozen=True)
class Reject:
    accept = False

    def describe(self) -> str:
        return "reject"


@dataclass(frozen=True)
class Accept:
    c_min: Power
    c_max: Power
    accept = True

    def contains(self, power: Power) -> bool:
        """グループのパワーがこの受け入れ窓に入っているか"""
        return self.c_min <= power <= self.c_max

    def describe(self) -> str:
        return f"accept({self.c_min},{self.c_max})"


Vote = Union[Accept, Reject]
REJECT = Reject()


@dataclass(frozen=True)
class RosterEntry:
    agent: AgentId
    power: Power


@dataclass(frozen=True)
class BidAnnouncement:
    """ビッドフェーズ後に全員へ伝える (エージェント, ビッド, パワー) の一覧"""
    entries: Tuple[Tuple[AgentId, Bid, Power], ...]

    def bid_of(self, agent: AgentId) -> Optional[Bid]:
        for entry_agent, bid, _ in self.entries:
            if entry_agent == agent:
                return bid
        return None

    def powers(self) -> Dict[AgentId, Power]:
        return {agent: power for agent, _, power in self.entries}


@dataclass(frozen=True)
class VoteAnnouncement:
    """投票フェーズ後に全員へ伝える、エージェントごとの (ビッド, 投票) 一覧"""
    entries: Tuple[Tuple[AgentId, Tuple[Tuple[Bid, Vote], ...]], ...]

    def votes_of(self, agent: AgentId) -> Dict[Bid, Vote]:
        for entry_agent, votes in self.entries:
            if entry_agent == agent:
                return dict(votes)
        return {}

    def acceptors(self, bid: Bid) -> Tuple[AgentId, ...]:
        return tuple(
            agent for agent, votes in self.entries
            if any(b == bid and v.accept for b, v in votes)
        )

    def triple_count(self) -> int:
        return sum(len(votes) for _, votes in self.entries)


@dataclass(frozen=True)
class DealRecord:
    """成立した合意（あるラウンドの実行可能グループ1つに対応）"""
    round_index: int
    bid: Bid
    members: Tuple[AgentId, ...]
    power: Power


@dataclass(frozen=True)
class ResolvedRound:
    """
    オプトイン締め切り後のラウンドの確定データ（不変）

    votes はオプトインの投票（解決に使う確定票）。
    """
    params: ProtocolParams
    round_index: int
    roster: Tuple[RosterEntry, ...]
    bid_table: Tuple[Bid, ...]
    votes: Dict[Tuple[AgentId, Bid], Vote] = field(default_factory=dict)
    voting_votes: Dict[Tuple[AgentId, Bid], Vote] = field(default_factory=dict)

    @property
    def p_min(self) -> Power:
        return self.params.p_min

    @property
    def p_max(self) -> Power:
        return sum(entry.power for entry in self.roster)

    @property
    def agents(self) -> Tuple[AgentId, ...]:
        return tuple(entry.agent for entry in self.roster)

    def power_map(self) -> Dict[AgentId, Power]:
        return {entry.agent: entry.power for entry in self.roster}

    def restricted_to(self, agents) -> "ResolvedRound":
        """指定エージェントだけを残したラウンド（抽出後の再検証用）"""
        keep = set(agents)
        return ResolvedRound(
            params=self.params,
            round_index=self.round_index,
            roster=tuple(e for e in self.roster if e.agent in keep),
            bid_table=self.bid_table,
            votes={k: v for k, v in self.votes.items() if k[0] in keep},
            voting_votes={k: v for k, v in self.voting_votes.items() if k[0] in keep},
        )
