# modules/protocol/negotiation.py
"""
MOPaC ネゴシエーションの状態機械

1ラウンドは Bidding → Voting → OptIn → Resolved の順に進む。
Resolved の後は resolution.advance_round が終了か次ラウンドかを決める。

すべての更新操作は書き込み前に検証を終えるので、例外が出た場合は状態が変わらない。
"""
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from modules.utils.logger_utils import get_logger
from .errors import (
    AlreadyBid, AlreadyVoted, DuplicateAgent, EmptyRoster, InvalidThresholds,
    MissingBids, MissingVotes, NegotiationFinished, NotResolved, OptInViolation,
    PMinExceedsPMax, SingleAgent, UnknownAgent, UnknownBid, ViolationKind,
    WrongPhase, ZeroPower,
)
from .types import (
    Accept, AgentId, Bid, BidAnnouncement, DealRecord, Phase, Power,
    ProtocolParams, ResolvedRound, RosterEntry, Vote, VoteAnnouncement,
)

logger = get_logger(__name__)

RosterLike = Iterable[Union[RosterEntry, Tuple[str, int]]]


def validate_vote(vote: Vote, p_min: Power, p_max: Power) -> Optional[ViolationKind]:
    """
    投票フェーズの投票が閾値ルールを満たすか検証する

    Reject は常に有効。Accept は p_min <= c_min <= c_max <= p_max のときだけ有効。

    Returns:
        Optional[ViolationKind]: 違反の種類（問題なければNone）
    """
    if not vote.accept:
        return None
    if vote.c_min < p_min:
        return ViolationKind.C_MIN_BELOW_P_MIN
    if vote.c_max < vote.c_min:
        return ViolationKind.C_MAX_BELOW_C_MIN
    if vote.c_max > p_max:
        return ViolationKind.C_MAX_ABOVE_P_MAX
    return None


def validate_optin(prior: Vote, new: Vote, p_min: Power, p_max: Power) -> Optional[ViolationKind]:
    """
    オプトインの投票を、同じビッドへの投票フェーズの投票と照らして検証する

    - 前回 Accept(c_min, c_max): 今回も Accept で、c_min <= c'_min かつ c'_min <= c'_max <= p_max
      （c'_max の下限は c'_min に引き締めている）
    - 前回 Reject: Reject のままか、validate_vote を通る Accept

    Returns:
        Optional[ViolationKind]: 違反の種類（問題なければNone）
    """
    if not prior.accept:
        return validate_vote(new, p_min, p_max)

    if not new.accept:
        return ViolationKind.REJECT_AFTER_ACCEPT
    if new.c_min < prior.c_min:
        return ViolationKind.C_MIN_REDUCED
    if new.c_max < new.c_min:
        return ViolationKind.C_MAX_BELOW_C_MIN
    if new.c_max > p_max:
        return ViolationKind.C_MAX_ABOVE_P_MAX
    return None


def _normalize_roster(roster: RosterLike) -> List[RosterEntry]:
    entries = []
    for item in roster:
        if isinstance(item, RosterEntry):
            entries.append(item)
        else:
            agent, power = item
            entries.append(RosterEntry(AgentId(str(agent)), int(power)))
    return entries


@dataclass
class NegotiationState:
    """ネゴシエーション全体の状態"""
    params: ProtocolParams
    roster: List[RosterEntry]
    round_index: int = 1
    phase: Phase = Phase.BIDDING
    current_bids: Dict[AgentId, Bid] = field(default_factory=dict)
    bid_table: List[Bid] = field(default_factory=list)
    votes: Dict[Tuple[AgentId, Bid], Vote] = field(default_factory=dict)
    optin_votes: Dict[Tuple[AgentId, Bid], Vote] = field(default_factory=dict)
    deals: List[DealRecord] = field(default_factory=list)
    initial_roster: List[RosterEntry] = field(default_factory=list)
    finished: bool = False
    termination_reason: Optional[str] = None

    # ---- 参照系 ----

    @property
    def p_max(self) -> Power:
        """現在のロスターのパワー合計（全員合意のパワー）"""
        return sum(entry.power for entry in self.roster)

    @property
    def agents(self) -> Tuple[AgentId, ...]:
        return tuple(entry.agent for entry in self.roster)

    def power_of(self, agent: AgentId) -> Power:
        for entry in self.roster:
            if entry.agent == agent:
                return entry.power
        raise UnknownAgent(agent)

    def is_active(self, agent: AgentId) -> bool:
        return any(entry.agent == agent for entry in self.roster)

    def can_reach_consensus(self) -> bool:
        """残りのエージェントでコンセンサスが成立しうるか"""
        return len(self.roster) >= 2 and self.p_max >= self.params.p_min

    def missing_bidders(self) -> List[AgentId]:
        return [agent for agent in self.agents if agent not in self.current_bids]

    def missing_votes(self, optin: bool = False) -> List[Tuple[AgentId, Bid]]:
        store = self.optin_votes if optin else self.votes
        return [
            (agent, bid)
            for agent in self.agents
            for bid in self.bid_table
            if (agent, bid) not in store
        ]

    def status_of(self, agent: AgentId) -> str:
        """'deal' / 'active' / 'no_deal' のいずれか"""
        for deal in self.deals:
            if agent in deal.members:
                return "deal"
        if not self.finished and self.is_active(agent):
            return "active"
        return "no_deal"

    def bid_announcement(self) -> BidAnnouncement:
        return BidAnnouncement(tuple(
            (entry.agent, self.current_bids[entry.agent], entry.power)
            for entry in self.roster
        ))

    def vote_announcement(self) -> VoteAnnouncement:
        return VoteAnnouncement(tuple(
            (agent, tuple((bid, self.votes[(agent, bid)]) for bid in self.bid_table))
            for agent in self.agents
        ))

    # ---- ガード ----

    def _require_phase(self, expected: Phase) -> None:
        if self.finished:
            raise NegotiationFinished()
        if self.phase != expected:
            logger.warning(f"フェーズ違反: 期待={expected.value}, 現在={self.phase.value}")
            raise WrongPhase(expected, self.phase)

    def _require_agent(self, agent: AgentId) -> None:
        if not self.is_active(agent):
            raise UnknownAgent(agent)

    def _require_bid(self, bid: Bid) -> None:
        if bid not in self.bid_table:
            raise UnknownBid(bid)

    # ---- ビッドフェーズ ----

    def check_bid(self, agent: AgentId, bid: Bid) -> None:
        """submit_bid と同じ検証を、状態を変えずに行う"""
        self._require_phase(Phase.BIDDING)
        self._require_agent(agent)
        if agent in self.current_bids:
            raise AlreadyBid(agent)

    def submit_bid(self, agent: AgentId, bid: Bid) -> "NegotiationState":
        """エージェントのビッドを記録する（1ラウンド1回）"""
        self.check_bid(agent, bid)
        self.current_bids[agent] = bid
        logger.debug(f"ビッド受付: ラウンド{self.round_index} {agent} -> {bid}")
        return self

    def drop_agent(self, agent: AgentId) -> "NegotiationState":
        """
        ビッドフェーズ中にエージェントを外す（メディエーターのタイムアウト既定処理）

        p_max は残ったロスターから再計算される。
        """
        self._require_phase(Phase.BIDDING)
        self._require_agent(agent)
        self.roster = [entry for entry in self.roster if entry.agent != agent]
        self.current_bids.pop(agent, None)
        logger.info(f"エージェントを除外しました: {agent} (新しい p_max={self.p_max})")
        return self

    def close_bidding(self) -> BidAnnouncement:
        """
        ビッドフェーズを締め切り、ビッド一覧を公開する

        同じ値のビッドは最初に出された順で1つにまとめる。
        """
        self._require_phase(Phase.BIDDING)
        missing = self.missing_bidders()
        if missing:
            raise MissingBids(missing)
        self.bid_table = list(dict.fromkeys(self.current_bids.values()))
        self.phase = Phase.VOTING
        announcement = self.bid_announcement()
        logger.info(f"ラウンド{self.round_index} ビッド締め切り: テーブル={self.bid_table}")
        return announcement

    # ---- 投票フェーズ ----

    def check_vote(self, agent: AgentId, bid: Bid, vote: Vote) -> None:
        """submit_vote と同じ検証を、状態を変えずに行う"""
        self._require_phase(Phase.VOTING)
        self._require_agent(agent)
        self._require_bid(bid)
        kind = validate_vote(vote, self.params.p_min, self.p_max)
        if kind is not None:
            raise InvalidThresholds(kind)
        if (agent, bid) in self.votes:
            raise AlreadyVoted(agent, bid)

    def submit_vote(self, agent: AgentId, bid: Bid, vote: Vote) -> "NegotiationState":
        """投票フェーズの投票を記録する（自分のビッドへの投票も含む）"""
        self.check_vote(agent, bid, vote)
        self.votes[(agent, bid)] = vote
        return self

    def close_voting(self) -> VoteAnnouncement:
        """投票フェーズを締め切り、全員の投票を公開する"""
        self._require_phase(Phase.VOTING)
        missing = self.missing_votes()
        if missing:
            raise MissingVotes(missing)
        self.phase = Phase.OPT_IN
        logger.info(f"ラウンド{self.round_index} 投票締め切り")
        return self.vote_announcement()

    # ---- オプトインフェーズ ----

    def check_optin(self, agent: AgentId, bid: Bid, vote: Vote) -> None:
        """submit_optin と同じ検証を、状態を変えずに行う"""
        self._require_phase(Phase.OPT_IN)
        self._require_agent(agent)
        self._require_bid(bid)
        prior = self.votes[(agent, bid)]
        kind = validate_optin(prior, vote, self.params.p_min, self.p_max)
        if kind is not None:
            raise OptInViolation(kind)
        if (agent, bid) in self.optin_votes:
            raise AlreadyVoted(agent, bid)

    def submit_optin(self, agent: AgentId, bid: Bid, vote: Vote) -> "NegotiationState":
        """オプトインの投票を記録する（前回の投票に対する単調性を検証）"""
        self.check_optin(agent, bid, vote)
        self.optin_votes[(agent, bid)] = vote
        return self

    def close_optin(self) -> "NegotiationState":
        """オプトインを締め切る。以降はオプトインの投票が確定票になる"""
        self._require_phase(Phase.OPT_IN)
        missing = self.missing_votes(optin=True)
        if missing:
            raise MissingVotes(missing)
        self.phase = Phase.RESOLVED
        logger.info(f"ラウンド{self.round_index} オプトイン締め切り")
        return self

    def resolved_round(self) -> ResolvedRound:
        """解決処理に渡す、このラウンドの確定データ"""
        if self.phase != Phase.RESOLVED:
            raise NotResolved(self.phase)
        return ResolvedRound(
            params=self.params,
            round_index=self.round_index,
            roster=tuple(self.roster),
            bid_table=tuple(self.bid_table),
            votes=dict(self.optin_votes),
            voting_votes=dict(self.votes),
        )

    # ---- ラウンド遷移（resolution から呼ばれる） ----

    def start_next_round(self, continuing: Sequence[AgentId]) -> "NegotiationState":
        """継続するエージェントだけで次のラウンドのビッドフェーズへ"""
        if self.finished:
            raise NegotiationFinished()
        if self.phase != Phase.RESOLVED:
            raise NotResolved(self.phase)
        keep = set(continuing)
        self.roster = [entry for entry in self.roster if entry.agent in keep]
        self.round_index += 1
        self.phase = Phase.BIDDING
        self._clear_round()
        logger.info(f"ラウンド{self.round_index}を開始します: {list(self.agents)} (p_max={self.p_max})")
        return self

    def terminate(self, reason: str) -> "NegotiationState":
        """ネゴシエーションを終了状態にする（以降の操作はすべてエラー）"""
        if self.finished:
            raise NegotiationFinished()
        self.finished = True
        self.phase = Phase.RESOLVED
        self.termination_reason = reason
        logger.info(f"ネゴシエーション終了: {reason} (合意数={len(self.deals)})")
        return self

    def _clear_round(self) -> None:
        self.current_bids = {}
        self.bid_table = []
        self.votes = {}
        self.optin_votes = {}


def new_negotiation(roster: RosterLike, params: ProtocolParams) -> NegotiationState:
    """
    ネゴシエーションを開始する

    Args:
        roster: (AgentId, Power) の並び（順序はアナウンスの順序になる）
        params: プロトコルのパラメータ

    Returns:
        NegotiationState: ラウンド1のビッドフェーズの状態

    Raises:
        EmptyRoster, SingleAgent, ZeroPower, DuplicateAgent, PMinExceedsPMax
    """
    entries = _normalize_roster(roster)
    if not entries:
        raise EmptyRoster()

    seen = set()
    for entry in entries:
        # パワーは1以上
        if entry.power < 1:
            raise ZeroPower(entry.agent, entry.power)
        if entry.agent in seen:
            raise DuplicateAgent(entry.agent)
        seen.add(entry.agent)

    if len(entries) == 1:
        raise SingleAgent(entries[0].agent)

    p_max = sum(entry.power for entry in entries)
    if params.p_min > p_max:
        raise PMinExceedsPMax(params.p_min, p_max)

    logger.info(f"ネゴシエーションを作成: {len(entries)}エージェント, p_min={params.p_min}, p_max={p_max}")
    return NegotiationState(params=params, roster=list(entries), initial_roster=list(entries))
