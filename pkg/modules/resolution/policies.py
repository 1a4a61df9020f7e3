# modules/resolution/policies.py
"""
継続・終了の決定

ラウンドの実行可能グループから合意を選び、ネゴシエーションを終えるか次のラウンドへ進めるかを決める。

- 方式1 (LargestOnly): 最大パワーのグループ1つと合意し、他の全員は合意なしで終了
- 方式2 (RepeatedExtraction): 最大パワーのグループから順に、まだ合意していない
  エージェントだけのグループを取り出していく。残りは次のラウンドへ

同点はシード付き乱数で選ぶ。乱数はラウンドごとに (seed, "resolution", ラウンド番号) から派生させる。
"""
import random
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

from modules.consensus.engine import Engine, ViableGroup, get_engine, viable_groups_pruned
from modules.protocol.errors import NegotiationFinished, NotResolved
from modules.protocol.negotiation import NegotiationState
from modules.protocol.types import AgentId, DealRecord, Phase, ResolvedRound, TerminationPolicy
from modules.utils.logger_utils import get_logger
from modules.utils.rng_utils import derive_rng

logger = get_logger(__name__)

# 終了・継続の理由
REASON_DEAL = "deal"
REASON_DEADLINE = "deadline"
REASON_FEW_AGENTS = "one_or_no_agent_remains"
REASON_UNREACHABLE = "p_min_unreachable"
REASON_CONTINUE = "continue"


@dataclass(frozen=True)
class RoundOutcome:
    """
    1ラウンドの解決結果

    negotiation_over のときは continuing_agents は空で、合意できなかった
    エージェントは undealt_agents に入る。
    """
    deals: Tuple[DealRecord, ...]
    continuing_agents: Tuple[AgentId, ...]
    negotiation_over: bool
    reason: str
    undealt_agents: Tuple[AgentId, ...] = ()


@dataclass(frozen=True)
class RoundResolution:
    round: ResolvedRound
    groups: Tuple[ViableGroup, ...]
    outcome: RoundOutcome


def round_rng(seed: int, round_index: int) -> random.Random:
    """ラウンドのタイブレーク用乱数"""
    return derive_rng(seed, "resolution", round_index)


def select_largest(groups: Sequence[ViableGroup], rng: random.Random) -> Optional[ViableGroup]:
    """
    最大パワーのグループを選ぶ（同点は乱数で一様に選ぶ）

    Returns:
        ViableGroup: 選ばれたグループ（空リストならNone）
    """
    if not groups:
        return None
    best = max(group.power for group in groups)
    tied = [group for group in groups if group.power == best]
    if len(tied) == 1:
        return tied[0]
    chosen = rng.choice(tied)
    logger.debug(f"同点 {len(tied)}グループ (パワー{best}) から選択: {chosen.bid} {chosen.members}")
    return chosen


def _deal(round_data: ResolvedRound, group: ViableGroup) -> DealRecord:
    return DealRecord(round_data.round_index, group.bid, group.members, group.power)


def resolve_policy_one(round_data: ResolvedRound, rng: random.Random,
                       groups: Optional[Sequence[ViableGroup]] = None) -> RoundOutcome:
    """方式1: 最大パワーのグループ1つだけが合意し、ネゴシエーションは全員終了"""
    if groups is None:
        groups = viable_groups_pruned(round_data)

    chosen = select_largest(groups, rng)
    agents = round_data.agents
    if chosen is not None:
        deal = _deal(round_data, chosen)
        undealt = tuple(a for a in agents if a not in deal.members)
        return RoundOutcome((deal,), (), True, REASON_DEAL, undealt)

    # 実行可能グループが無ければ締め切りまで全員で続ける
    if round_data.round_index >= round_data.params.max_rounds:
        return RoundOutcome((), (), True, REASON_DEADLINE, agents)
    return RoundOutcome((), agents, False, REASON_CONTINUE)


def resolve_policy_two(round_data: ResolvedRound, rng: random.Random,
                       groups: Optional[Sequence[ViableGroup]] = None) -> RoundOutcome:
    """方式2: 互いに素なグループをパワーの大きい順に取り出し、残りは次ラウンドへ"""
    if groups is None:
        groups = viable_groups_pruned(round_data)

    remaining: List[ViableGroup] = list(groups)
    dealt = set()
    deals: List[DealRecord] = []
    while remaining:
        chosen = select_largest(remaining, rng)
        deals.append(_deal(round_data, chosen))
        dealt.update(chosen.members)
        remaining = [g for g in remaining if dealt.isdisjoint(g.members)]

    undealt = tuple(a for a in round_data.agents if a not in dealt)
    if len(undealt) <= 1:
        return RoundOutcome(tuple(deals), (), True, REASON_FEW_AGENTS, undealt)
    if round_data.round_index >= round_data.params.max_rounds:
        return RoundOutcome(tuple(deals), (), True, REASON_DEADLINE, undealt)
    return RoundOutcome(tuple(deals), undealt, False, REASON_CONTINUE)


POLICIES = {
    TerminationPolicy.LARGEST_ONLY: resolve_policy_one,
    TerminationPolicy.REPEATED_EXTRACTION: resolve_policy_two,
}


def resolve_round(state: NegotiationState, engine: Union[str, Engine] = "pruned",
                  rng: Optional[random.Random] = None) -> RoundResolution:
    """
    オプトインを締め切り（未締め切りの場合）、実行可能グループを求めて方式どおりに解決する

    Args:
        state: OptIn か Resolved フェーズの状態
        engine: 'naive' / 'pruned' または列挙関数
        rng: タイブレーク用乱数（省略時はシードとラウンド番号から派生）

    Returns:
        RoundResolution: 確定ラウンド・実行可能グループ・解決結果
    """
    if state.phase == Phase.OPT_IN and not state.finished:
        state.close_optin()
    round_data = state.resolved_round()
    groups = tuple(get_engine(engine)(round_data))
    rng = rng or round_rng(state.params.rng_seed, round_data.round_index)
    outcome = POLICIES[state.params.termination_policy](round_data, rng, groups)
    logger.info(
        f"ラウンド{round_data.round_index} 解決: 実行可能{len(groups)}グループ, "
        f"合意{len(outcome.deals)}件, 理由={outcome.reason}"
    )
    return RoundResolution(round_data, groups, outcome)


def advance_round(state: NegotiationState, outcome: RoundOutcome) -> NegotiationState:
    """
    解決結果を状態に反映する

    終了なら状態は最終状態になる。継続なら残ったエージェントで次のラウンドのビッドフェーズに入り、
    残りのパワーが p_min に届かなければその場で終了する。

    Raises:
        NotResolved: Resolved フェーズでない場合
    """
    if state.finished:
        raise NegotiationFinished()
    if state.phase != Phase.RESOLVED:
        raise NotResolved(state.phase)

    state.deals.extend(outcome.deals)
    for deal in outcome.deals:
        logger.info(f"合意成立: ラウンド{deal.round_index} {deal.bid} {list(deal.members)} (パワー{deal.power})")

    if outcome.negotiation_over:
        return state.terminate(outcome.reason)

    state.start_next_round(outcome.continuing_agents)
    if not state.can_reach_consensus():
        state.terminate(REASON_UNREACHABLE)
    return state
