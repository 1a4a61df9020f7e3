# modules/agents/factory.py
from typing import Any, Dict, Optional

from modules.utils.rng_utils import derive_seed
from .base_strategy import BaseStrategy
from .random_strategy import RandomStrategy
from .scripted import ScriptedStrategy
from .utility import UtilityThresholdStrategy
from .views import PreferenceProfile

STRATEGY_KINDS = ("scripted", "utility", "random")


def build_strategy(agent_id: str, kind: str, config: Dict[str, Any],
                   run_seed: int = 0) -> BaseStrategy:
    """
    シナリオのエージェント設定から戦略インスタンスを作る

    Args:
        agent_id: エージェントID
        kind: 'scripted' / 'utility' / 'random'
        config: 種類ごとの設定
            scripted -> {'rounds': {ラウンド番号: RoundScript}}
            utility  -> {'profile': PreferenceProfile}
            random   -> {'seed': int (省略時は run_seed から派生), 'accept_probability': float}
        run_seed: 実行全体のシード

    Returns:
        BaseStrategy: 戦略インスタンス
    """
    if kind == "scripted":
        return ScriptedStrategy(agent_id, config.get("rounds", {}))
    if kind == "utility":
        profile: Optional[PreferenceProfile] = config.get("profile")
        return UtilityThresholdStrategy(profile or PreferenceProfile())
    if kind == "random":
        seed = config.get("seed")
        if seed is None:
            seed = derive_seed(run_seed, "agent", agent_id)
        return RandomStrategy(seed, config.get("accept_probability", 0.5))
    raise ValueError(f"不明な戦略の種類です: {kind} ({' / '.join(STRATEGY_KINDS)})")
