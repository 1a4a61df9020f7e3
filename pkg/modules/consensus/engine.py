# modules/consensus/engine.py
"""
コンセンサスグループの計算モジュール

ラウンドの確定票（オプトインの投票）から、実行可能なコンセンサスグループを列挙する。

- viable_groups_naive: 2人以上の全部分集合 (2^n - n - 1 個) を全ビッドについて調べる
- viable_groups_pruned: apriori 方式でレベルごとに集合を育てる。
  ビッドを拒否したエージェントを含む集合は作らず、
  パワーがメンバーの最小 c_max を超えた集合はそれ以上拡張しない

どちらも同じ結果を同じ順序（テーブル順 → サイズ昇順 → ロスター順の辞書式）で返す。
"""
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from modules.protocol.errors import SizeBelowTwo, UnknownAgent
from modules.protocol.types import (
    REJECT, AgentId, Bid, Power, ResolvedRound, RosterEntry, Vote,
)
from modules.utils.logger_utils import get_logger

logger = get_logger(__name__)

VoteTable = Mapping[Tuple[AgentId, Bid], Vote]


@dataclass(frozen=True)
class ConsensusGroup:
    bid: Bid
    members: Tuple[AgentId, ...]
    power: Power


@dataclass(frozen=True)
class ViableGroup:
    """実行可能なコンセンサスグループと、各メンバーの受け入れ窓"""
    group: ConsensusGroup
    windows: Dict[AgentId, Tuple[Power, Power]] = field(default_factory=dict, compare=False)

    @property
    def bid(self) -> Bid:
        return self.group.bid

    @property
    def members(self) -> Tuple[AgentId, ...]:
        return self.group.members

    @property
    def power(self) -> Power:
        return self.group.power

    @property
    def key(self) -> Tuple[Bid, Tuple[AgentId, ...]]:
        return (self.group.bid, self.group.members)


@dataclass
class EngineStats:
    """列挙の統計（調べた部分集合の数、拡張を打ち切った数）"""
    tested: int = 0
    pruned: int = 0


def _power_map(roster) -> Dict[AgentId, Power]:
    if isinstance(roster, ResolvedRound):
        return roster.power_map()
    if isinstance(roster, Mapping):
        return dict(roster)
    powers = {}
    for item in roster:
        if isinstance(item, RosterEntry):
            powers[item.agent] = item.power
        else:
            agent, power = item
            powers[agent] = power
    return powers


def group_power(members: Iterable[AgentId], roster) -> Power:
    """
    グループのパワー（メンバーのパワーの合計）

    Args:
        members: エージェントIDの集合
        roster: ロスター（RosterEntry列、(id, power) 列、dict、ResolvedRound のいずれか）

    Raises:
        UnknownAgent: ロスターにいないメンバーがいる場合
    """
    powers = _power_map(roster)
    total = 0
    for agent in members:
        if agent not in powers:
            raise UnknownAgent(agent)
        total += powers[agent]
    return total


def is_consensus_group(members: Sequence[AgentId], bid: Bid, votes: VoteTable) -> bool:
    """全メンバーがそのビッドを Accept しているか"""
    if len(members) < 2:
        raise SizeBelowTwo(len(members))
    return all(votes.get((agent, bid), REJECT).accept for agent in members)


def is_viable(group: ConsensusGroup, votes: VoteTable) -> bool:
    """全メンバーの受け入れ窓 [c_min, c_max] にグループのパワーが入っているか"""
    return all(votes[(agent, group.bid)].contains(group.power) for agent in group.members)


def enumerate_candidate_groups(roster) -> Iterator[Tuple[AgentId, ...]]:
    """
    2人以上の全部分集合を列挙する（サイズ昇順、ロスター順の辞書式）

    n 人なら 2^n - n - 1 個。
    """
    if isinstance(roster, ResolvedRound):
        agents = roster.agents
    else:
        agents = tuple(
            item.agent if isinstance(item, RosterEntry)
            else (item[0] if isinstance(item, tuple) else item)
            for item in roster
        )
    for size in range(2, len(agents) + 1):
        for members in combinations(agents, size):
            yield members


def _viable_group(bid: Bid, members: Tuple[AgentId, ...], power: Power, votes: VoteTable) -> ViableGroup:
    windows = {agent: (votes[(agent, bid)].c_min, votes[(agent, bid)].c_max) for agent in members}
    return ViableGroup(ConsensusGroup(bid, members, power), windows)


def viable_groups_naive(round_data: ResolvedRound, stats: Optional[EngineStats] = None) -> List[ViableGroup]:
    """全ビッド × 全候補集合をそのまま調べる素朴な方法"""
    stats = stats if stats is not None else EngineStats()
    powers = round_data.power_map()
    found: List[ViableGroup] = []

    for bid in round_data.bid_table:
        for members in enumerate_candidate_groups(round_data):
            stats.tested += 1
            if not is_consensus_group(members, bid, round_data.votes):
                continue
            power = group_power(members, powers)
            group = ConsensusGroup(bid, members, power)
            if is_viable(group, round_data.votes):
                found.append(_viable_group(bid, members, power, round_data.votes))

    logger.debug(f"素朴な列挙: {stats.tested}集合を調べ、{len(found)}グループが実行可能")
    return found


def _viable_for_bid(bid: Bid, acceptors: Sequence[AgentId], powers: Dict[AgentId, Power],
                    votes: VoteTable, stats: EngineStats) -> List[ViableGroup]:
    """1つのビッドについてレベルごとに集合を育てる"""
    index = {agent: i for i, agent in enumerate(acceptors)}
    c_min = {agent: votes[(agent, bid)].c_min for agent in acceptors}
    c_max = {agent: votes[(agent, bid)].c_max for agent in acceptors}

    found: List[ViableGroup] = []
    level = [pair for pair in combinations(acceptors, 2)]

    while level:
        level.sort(key=lambda members: [index[a] for a in members])
        frontier = []
        for members in level:
            stats.tested += 1
            power = sum(powers[a] for a in members)
            # 誰かの c_max を超えたら、その人を含む上位集合も全部超える
            if power > min(c_max[a] for a in members):
                stats.pruned += 1
                continue
            if power >= max(c_min[a] for a in members):
                found.append(_viable_group(bid, members, power, votes))
            frontier.append(members)

        # 先頭 k-1 人が共通の2集合を結合し、k人の部分集合がすべて生き残っているものだけ残す
        alive = set(frontier)
        next_level = []
        for i, left in enumerate(frontier):
            for right in frontier[i + 1:]:
                if left[:-1] != right[:-1]:
                    break
                candidate = left + (right[-1],)
                if all(candidate[:k] + candidate[k + 1:] in alive for k in range(len(candidate) - 2)):
                    next_level.append(candidate)
        level = next_level

    return found


def viable_groups_pruned(round_data: ResolvedRound, stats: Optional[EngineStats] = None) -> List[ViableGroup]:
    """
    apriori 方式の枝刈りで実行可能グループを求める

    ビッドごとに Accept したエージェントだけを候補にし、
    コンセンサスでない集合（拒否者を含む集合）は作らない。
    Accept が2人未満のビッドは1つも集合を調べない。
    """
    stats = stats if stats is not None else EngineStats()
    powers = round_data.power_map()
    found: List[ViableGroup] = []

    for bid in round_data.bid_table:
        acceptors = [
            agent for agent in round_data.agents
            if round_data.votes.get((agent, bid), REJECT).accept
        ]
        if len(acceptors) < 2:
            continue
        found.extend(_viable_for_bid(bid, acceptors, powers, round_data.votes, stats))

    logger.debug(f"枝刈り列挙: {stats.tested}集合を調べ（打ち切り{stats.pruned}）、{len(found)}グループが実行可能")
    return found


Engine = Callable[..., List[ViableGroup]]

ENGINES: Dict[str, Engine] = {
    'naive': viable_groups_naive,
    'pruned': viable_groups_pruned,
}


def get_engine(name: Union[str, Engine]) -> Engine:
    """エンジン名（'naive' / 'pruned'）から列挙関数を取得する"""
    if callable(name):
        return name
    if name not in ENGINES:
        raise ValueError(f"不明なエンジンです: {name} (naive / pruned)")
    return ENGINES[name]
