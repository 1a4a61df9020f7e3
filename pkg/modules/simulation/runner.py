# modules/simulation/runner.py
"""
シナリオをプロセス内で最後まで実行するランナー

各ラウンドで戦略を順に呼び出し（ロスター順）、プロトコルの状態機械に行動を渡し、
すべてをトレースに記録する。戦略が不正な行動を返した場合はその時点で打ち切る。
"""
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Union

from modules.agents.base_strategy import BaseStrategy
from modules.agents.factory import build_strategy
from modules.agents.scripted import ScriptedStrategy
from modules.agents.views import AgentView, CastOptIn, CastVotes, PlaceBid
from modules.consensus.engine import Engine
from modules.protocol.errors import MopacError, StrategyViolation
from modules.protocol.negotiation import NegotiationState, new_negotiation
from modules.protocol.types import AgentId, BidAnnouncement, TerminationPolicy, VoteAnnouncement
from modules.resolution.policies import RoundResolution, advance_round, resolve_round
from modules.utils.logger_utils import get_logger, log_function_call
from modules.utils.rng_utils import normalize_seed
from .scenario_loader import Scenario
from .trace import TraceEvent, TraceRecorder

logger = get_logger(__name__)


@dataclass
class RunResult:
    state: NegotiationState
    events: List[TraceEvent]


def finish_round(state: NegotiationState, recorder: TraceRecorder,
                 engine: Union[str, Engine] = "pruned") -> RoundResolution:
    """
    オプトイン後のラウンドを解決し、結果を状態とトレースに反映する

    ViableGroupsComputed → DealStruck（0件以上）→ RoundContinued か NegotiationEnded の順に記録する。
    メディエーターとトレース再生でも同じ処理を使う。
    """
    resolution = resolve_round(state, engine)
    round_index = resolution.round.round_index
    recorder.viable_groups(round_index, resolution.groups)
    for deal in resolution.outcome.deals:
        recorder.deal_struck(deal)

    advance_round(state, resolution.outcome)
    if state.finished:
        recorder.negotiation_ended(state, round_index)
    else:
        recorder.round_continued(state, resolution.outcome.reason)
    return resolution


class NegotiationRunner:
    """シナリオ1本分のネゴシエーションを実行するクラス"""

    def __init__(self, scenario: Scenario, seed: Optional[int] = None,
                 engine: Union[str, Engine] = "pruned",
                 policy: Optional[TerminationPolicy] = None,
                 strategies: Optional[Mapping[AgentId, BaseStrategy]] = None):
        """
        Args:
            scenario: 検証済みのシナリオ
            seed: シードの上書き（Noneならシナリオの値）
            engine: 実行可能グループの列挙エンジン（'pruned' / 'naive'）
            policy: 終了方式の上書き
            strategies: 戦略の差し替え（テスト用。省略時はシナリオから生成）
        """
        params = scenario.params
        if seed is not None:
            params = replace(params, rng_seed=normalize_seed(seed))
        if policy is not None:
            params = replace(params, termination_policy=policy)
        self.scenario = scenario
        self.params = params
        self.engine = engine
        self.strategies: Dict[AgentId, BaseStrategy] = dict(strategies or {})
        for spec in scenario.agents:
            if spec.agent_id not in self.strategies:
                self.strategies[spec.agent_id] = build_strategy(
                    spec.agent_id, spec.kind, spec.config, run_seed=params.rng_seed)
        self.recorder = TraceRecorder()
        self.state: Optional[NegotiationState] = None

    # ---- 実行 ----

    @log_function_call
    def run(self) -> RunResult:
        """
        ネゴシエーションを終了まで実行する

        Returns:
            RunResult: 最終状態とトレース

        Raises:
            StrategyViolation: 戦略が不正な行動を返した場合（途中までのトレースつき）
        """
        self.state = new_negotiation(self.scenario.roster, self.params)
        self.recorder.negotiation_started(self.state, self.scenario.name)
        logger.info(
            f"実行開始: {self.scenario.name} seed={self.params.rng_seed} "
            f"方式={self.params.termination_policy.value} エンジン={self.engine}"
        )

        while not self.state.finished:
            bid_announcement = self._bidding_phase()
            vote_announcement = self._voting_phase(bid_announcement)
            self._optin_phase(bid_announcement, vote_announcement)
            finish_round(self.state, self.recorder, self.engine)

        self._report_unused_scripts()
        logger.info(f"実行終了: 合意{len(self.state.deals)}件, 理由={self.state.termination_reason}")
        return RunResult(self.state, list(self.recorder.events))

    def _report_unused_scripts(self) -> None:
        # 途中で終わったネゴシエーションでは後半の台本が残ってよい
        for agent, strategy in self.strategies.items():
            if isinstance(strategy, ScriptedStrategy) and strategy.unused_entries():
                logger.warning(f"使われなかった台本: {agent}: {strategy.unused_entries()}")

    def _view(self, agent: AgentId, bid_announcement: Optional[BidAnnouncement] = None,
              vote_announcement: Optional[VoteAnnouncement] = None) -> AgentView:
        state = self.state
        return AgentView(
            agent_id=agent,
            power=state.power_of(agent),
            round_index=state.round_index,
            p_min=state.params.p_min,
            p_max=state.p_max,
            bid_space=self.scenario.bid_space,
            bid_table=tuple(state.bid_table),
            bid_announcement=bid_announcement,
            vote_announcement=vote_announcement,
        )

    def _violation(self, agent: AgentId, detail: str) -> StrategyViolation:
        logger.error(f"戦略の違反: {agent}: {detail}")
        return StrategyViolation(agent, detail, self.recorder.events)

    def _ask(self, agent: AgentId, request: str, view: AgentView, expected: type):
        strategy = self.strategies[agent]
        try:
            action = getattr(strategy, request)(view)
        except (MopacError, ValueError) as e:
            raise self._violation(agent, f"{request}: {e}") from e
        if not isinstance(action, expected):
            raise self._violation(agent, f"{request} が {type(action).__name__} を返しました")
        return action

    def _check_coverage(self, agent: AgentId, votes: Mapping) -> None:
        table = set(self.state.bid_table)
        if set(votes) != table:
            extra = sorted(set(votes) - table)
            missing = sorted(table - set(votes))
            raise self._violation(agent, f"投票がビッド一覧と一致しません (不足={missing}, 余分={extra})")

    # ---- フェーズ ----

    def _bidding_phase(self) -> BidAnnouncement:
        state = self.state
        for agent in state.agents:
            action: PlaceBid = self._ask(agent, "on_bid_request", self._view(agent), PlaceBid)
            try:
                state.submit_bid(agent, action.bid)
            except MopacError as e:
                raise self._violation(agent, str(e)) from e
            self.recorder.bid_submitted(state, agent, action.bid)
        announcement = state.close_bidding()
        self.recorder.bid_announcement(state, announcement)
        return announcement

    def _voting_phase(self, bid_announcement: BidAnnouncement) -> VoteAnnouncement:
        state = self.state
        for agent in state.agents:
            view = self._view(agent, bid_announcement)
            action: CastVotes = self._ask(agent, "on_vote_request", view, CastVotes)
            self._check_coverage(agent, action.votes)
            for bid in state.bid_table:
                vote = action.votes[bid]
                try:
                    state.submit_vote(agent, bid, vote)
                except MopacError as e:
                    raise self._violation(agent, f"{bid}: {e}") from e
                self.recorder.vote_submitted(state, agent, bid, vote)
        announcement = state.close_voting()
        self.recorder.vote_announcement(state, announcement)
        return announcement

    def _optin_phase(self, bid_announcement: BidAnnouncement, vote_announcement: VoteAnnouncement) -> None:
        state = self.state
        for agent in state.agents:
            view = self._view(agent, bid_announcement, vote_announcement)
            action: CastOptIn = self._ask(agent, "on_optin_request", view, CastOptIn)
            self._check_coverage(agent, action.votes)
            for bid in state.bid_table:
                vote = action.votes[bid]
                try:
                    state.submit_optin(agent, bid, vote)
                except MopacError as e:
                    raise self._violation(agent, f"{bid}: {e}") from e
                self.recorder.optin_submitted(state, agent, bid, vote)


def run(scenario: Scenario, seed: Optional[int] = None, engine: Union[str, Engine] = "pruned",
        policy: Optional[TerminationPolicy] = None) -> RunResult:
    """シナリオを実行して (最終状態, トレース) を返す"""
    return NegotiationRunner(scenario, seed=seed, engine=engine, policy=policy).run()
