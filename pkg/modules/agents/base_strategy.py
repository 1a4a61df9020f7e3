# modules/agents/base_strategy.py
"""
BaseStrategy - エージェント戦略の基底クラス

プロトコルの3つのフェーズ（ビッド・投票・オプトイン）に対応する3つの要求に応える。
返した行動はプロトコル側で検証される。戦略インスタンスは1エージェント専用で共有しない。
"""
from abc import ABC, abstractmethod

from .views import AgentView, CastOptIn, CastVotes, PlaceBid


class BaseStrategy(ABC):
    """
    エージェント戦略の基底クラス

    子クラスは次の3メソッドを実装します:
    - on_bid_request: ビッドを1つ選ぶ
    - on_vote_request: テーブルの全ビッドに投票する
    - on_optin_request: 投票一覧を見て、もう一度全ビッドに投票する
    """

    kind = "base"

    @abstractmethod
    def on_bid_request(self, view: AgentView) -> PlaceBid:
        """ビッド要求への応答"""

    @abstractmethod
    def on_vote_request(self, view: AgentView) -> CastVotes:
        """投票要求への応答（view.bid_announcement が入っている）"""

    @abstractmethod
    def on_optin_request(self, view: AgentView) -> CastOptIn:
        """オプトイン要求への応答（view.vote_announcement が入っている）"""

    def describe(self) -> str:
        return self.kind
