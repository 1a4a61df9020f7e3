# modules/agents/views.py
"""
戦略に渡す情報（ビュー）と、戦略が返す行動の型

戦略が見られるのは自分の設定と、ビッド一覧・投票一覧のアナウンスだけ。
他のエージェントの選好にアクセスする手段はビューに含めない。
"""
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional, Tuple, Union

from modules.protocol.types import (
    AgentId, Bid, BidAnnouncement, Power, Vote, VoteAnnouncement,
)


@dataclass(frozen=True)
class AgentView:
    agent_id: AgentId
    power: Power
    round_index: int
    p_min: Power
    p_max: Power
    bid_space: Tuple[Bid, ...] = ()
    bid_table: Tuple[Bid, ...] = ()
    bid_announcement: Optional[BidAnnouncement] = None
    vote_announcement: Optional[VoteAnnouncement] = None

    def own_votes(self) -> Dict[Bid, Vote]:
        """投票フェーズでの自分の投票（投票一覧アナウンスから取り出す）"""
        if self.vote_announcement is None:
            return {}
        return self.vote_announcement.votes_of(self.agent_id)

    def acceptor_power(self, bid: Bid) -> Power:
        """投票一覧で bid を Accept したエージェントのパワー合計"""
        if self.vote_announcement is None or self.bid_announcement is None:
            return 0
        powers = self.bid_announcement.powers()
        return sum(powers.get(agent, 0) for agent in self.vote_announcement.acceptors(bid))


@dataclass(frozen=True)
class PlaceBid:
    bid: Bid


@dataclass(frozen=True)
class CastVotes:
    votes: Dict[Bid, Vote] = field(default_factory=dict)


@dataclass(frozen=True)
class CastOptIn:
    votes: Dict[Bid, Vote] = field(default_factory=dict)


AgentAction = Union[PlaceBid, CastVotes, CastOptIn]


@dataclass(frozen=True)
class WindowRule:
    """
    Accept するときの [c_min, c_max] の決め方

    kind:
        full     -> (p_min, p_max)
        fixed    -> p_max に対する割合 (lo, hi) を [p_min, p_max] に収めたもの
        majority -> (floor(p_max/2)+1, p_max)
    """
    kind: str = "full"
    lo: Fraction = Fraction(0)
    hi: Fraction = Fraction(1)

    def __post_init__(self):
        if self.kind not in ("full", "fixed", "majority"):
            raise ValueError(f"不明な窓ルールです: {self.kind}")
        if not (0 <= self.lo <= self.hi <= 1):
            raise ValueError(f"fixed の割合は 0 <= lo <= hi <= 1 が必要です: ({self.lo}, {self.hi})")

    @classmethod
    def full_range(cls) -> "WindowRule":
        return cls("full")

    @classmethod
    def majority_floor(cls) -> "WindowRule":
        return cls("majority")

    @classmethod
    def fixed_window(cls, lo, hi) -> "WindowRule":
        return cls("fixed", Fraction(lo), Fraction(hi))

    def window(self, p_min: Power, p_max: Power) -> Tuple[Power, Power]:
        if self.kind == "majority":
            return max(p_min, p_max // 2 + 1), p_max
        if self.kind == "fixed":
            c_min = min(p_max, max(p_min, math.ceil(self.lo * p_max)))
            c_max = min(p_max, math.floor(self.hi * p_max))
            return c_min, max(c_min, c_max)
        return p_min, p_max

    def floor(self, p_min: Power, p_max: Power) -> Power:
        return self.window(p_min, p_max)[0]

    def describe(self) -> str:
        if self.kind == "fixed":
            return f"fixed({self.lo},{self.hi})"
        return self.kind


@dataclass(frozen=True)
class PreferenceProfile:
    """効用ベース戦略の選好（効用は [0,1] の有理数）"""
    utilities: Dict[Bid, Fraction] = field(default_factory=dict)
    reservation: Fraction = Fraction(1, 2)
    window_rule: WindowRule = WindowRule()

    def __post_init__(self):
        for bid, value in self.utilities.items():
            if not 0 <= value <= 1:
                raise ValueError(f"効用は0〜1の範囲です: {bid}={value}")
        if not 0 <= self.reservation <= 1:
            raise ValueError(f"留保値は0〜1の範囲です: {self.reservation}")

    def utility(self, bid: Bid) -> Fraction:
        # 知らないビッドの効用は0
        return self.utilities.get(bid, Fraction(0))
