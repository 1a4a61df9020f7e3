# modules/agents/__init__.py
"""
Agents Package - シミュレーション・リモートクライアント用のエージェント戦略

戦略の共通インターフェース（BaseStrategy）と、3つの組み込み戦略を提供します。
"""

from .views import (
    AgentView, PlaceBid, CastVotes, CastOptIn, AgentAction, WindowRule, PreferenceProfile,
)
from .base_strategy import BaseStrategy
from .scripted import ScriptedStrategy, RoundScript
from .utility import UtilityThresholdStrategy
from .random_strategy import RandomStrategy
from .factory import build_strategy, STRATEGY_KINDS

__all__ = [
    'AgentView', 'PlaceBid', 'CastVotes', 'CastOptIn', 'AgentAction', 'WindowRule',
    'PreferenceProfile', 'BaseStrategy', 'ScriptedStrategy', 'RoundScript',
    'UtilityThresholdStrategy', 'RandomStrategy', 'build_strategy', 'STRATEGY_KINDS',
]
