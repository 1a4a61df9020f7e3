# modules/consensus/__init__.py
from .engine import (
    ConsensusGroup, ViableGroup, EngineStats, ENGINES, get_engine,
    group_power, is_consensus_group, is_viable, enumerate_candidate_groups,
    viable_groups_naive, viable_groups_pruned,
)

__all__ = [
    'ConsensusGroup', 'ViableGroup', 'EngineStats', 'ENGINES', 'get_engine',
    'group_power', 'is_consensus_group', 'is_viable', 'enumerate_candidate_groups',
    'viable_groups_naive', 'viable_groups_pruned',
]
