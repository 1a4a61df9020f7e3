# modules/resolution/__init__.py
from .policies import (
    RoundOutcome, RoundResolution, select_largest, resolve_policy_one,
    resolve_policy_two, resolve_round, advance_round, round_rng,
    REASON_DEAL, REASON_DEADLINE, REASON_FEW_AGENTS, REASON_UNREACHABLE, REASON_CONTINUE,
)

__all__ = [
    'RoundOutcome', 'RoundResolution', 'select_largest', 'resolve_policy_one',
    'resolve_policy_two', 'resolve_round', 'advance_round', 'round_rng',
    'REASON_DEAL', 'REASON_DEADLINE', 'REASON_FEW_AGENTS', 'REASON_UNREACHABLE', 'REASON_CONTINUE',
]
