# modules/agents/utility.py
from modules.protocol.types import REJECT, Accept
from modules.utils.logger_utils import get_logger
from .base_strategy import BaseStrategy
from .views import AgentView, CastOptIn, CastVotes, PlaceBid, PreferenceProfile

logger = get_logger(__name__)


class UtilityThresholdStrategy(BaseStrategy):
    """
    効用と留保値で判断する戦略

    - ビッド: 効用が最大のビッド（同点はビッド空間の順で先のもの）
    - 投票: 効用 >= 留保値 なら窓ルールの窓で Accept、それ以外は Reject
    - オプトイン: Accept 済みはそのまま。Reject したビッドでも、投票一覧で Accept した
      エージェントのパワー合計が自分の窓の下限に届いていれば Accept に切り替える
    """

    kind = "utility"

    def __init__(self, profile: PreferenceProfile):
        self.profile = profile

    def on_bid_request(self, view: AgentView) -> PlaceBid:
        candidates = list(view.bid_space) or list(self.profile.utilities)
        if not candidates:
            raise ValueError(f"ビッド候補がありません: {view.agent_id}")
        return PlaceBid(max(candidates, key=self.profile.utility))

    def on_vote_request(self, view: AgentView) -> CastVotes:
        c_min, c_max = self.profile.window_rule.window(view.p_min, view.p_max)
        votes = {}
        for bid in view.bid_table:
            if self.profile.utility(bid) >= self.profile.reservation:
                votes[bid] = Accept(c_min, c_max)
            else:
                votes[bid] = REJECT
        return CastVotes(votes)

    def on_optin_request(self, view: AgentView) -> CastOptIn:
        rule = self.profile.window_rule
        floor = rule.floor(view.p_min, view.p_max)
        prior = view.own_votes()
        votes = {}
        for bid in view.bid_table:
            previous = prior.get(bid, REJECT)
            if previous.accept:
                votes[bid] = previous
            elif view.acceptor_power(bid) >= floor:
                votes[bid] = Accept(*rule.window(view.p_min, view.p_max))
                logger.debug(f"{view.agent_id}: オプトインで {bid} を Accept に切り替え")
            else:
                votes[bid] = REJECT
        return CastOptIn(votes)

    def describe(self) -> str:
        return f"utility(reservation={self.profile.reservation}, window={self.profile.window_rule.describe()})"
