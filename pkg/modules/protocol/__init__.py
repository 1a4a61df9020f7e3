# modules/protocol/__init__.py
"""
Protocol Package - MOPaC の状態機械・ドメイン型・投票ルール
"""

from .types import (
    AgentId, Bid, Power, TerminationPolicy, Phase, ProtocolParams,
    Accept, Reject, REJECT, Vote, RosterEntry, BidAnnouncement,
    VoteAnnouncement, DealRecord, ResolvedRound,
)
from .errors import ViolationKind, MopacError, ProtocolError
from .negotiation import NegotiationState, new_negotiation, validate_vote, validate_optin

__all__ = [
    'AgentId', 'Bid', 'Power', 'TerminationPolicy', 'Phase', 'ProtocolParams',
    'Accept', 'Reject', 'REJECT', 'Vote', 'RosterEntry', 'BidAnnouncement',
    'VoteAnnouncement', 'DealRecord', 'ResolvedRound',
    'ViolationKind', 'MopacError', 'ProtocolError',
    'NegotiationState', 'new_negotiation', 'validate_vote', 'validate_optin',
]
