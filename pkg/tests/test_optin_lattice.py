# tests/test_optin_lattice.py
"""オプトインの受理判定を小さな格子で総当たりする"""
from itertools import product

import pytest
from hypothesis import given, strategies

from modules.protocol.errors import ViolationKind
from modules.protocol.negotiation import validate_optin, validate_vote
from modules.protocol.types import REJECT, Accept

P_MIN = 2
P_MAX = 5
LATTICE = range(0, P_MAX + 2)


def _all_votes():
    return [REJECT] + [Accept(c_min, c_max) for c_min, c_max in product(LATTICE, LATTICE)]


def _legal_priors():
    return [vote for vote in _all_votes() if validate_vote(vote, P_MIN, P_MAX) is None]


def _expected_accepted(prior, new) -> bool:
    legal_new = not new.accept or (P_MIN <= new.c_min <= new.c_max <= P_MAX)
    if not prior.accept:
        return legal_new
    return new.accept and new.c_min >= prior.c_min and new.c_min <= new.c_max <= P_MAX


def test_every_pair_on_the_lattice():
    checked = 0
    for prior in _legal_priors():
        for new in _all_votes():
            accepted = validate_optin(prior, new, P_MIN, P_MAX) is None
            assert accepted == _expected_accepted(prior, new), (prior, new)
            checked += 1
    # Reject + 10 個の合法な Accept（2<=c_min<=c_max<=5）
    assert len(_legal_priors()) == 11
    assert checked == 11 * (1 + len(LATTICE) ** 2)


@pytest.mark.parametrize("prior, new, kind", [
    (Accept(3, 4), REJECT, ViolationKind.REJECT_AFTER_ACCEPT),
    (Accept(3, 4), Accept(2, 4), ViolationKind.C_MIN_REDUCED),
    (Accept(3, 4), Accept(4, 3), ViolationKind.C_MAX_BELOW_C_MIN),
    (Accept(3, 4), Accept(3, 6), ViolationKind.C_MAX_ABOVE_P_MAX),
    (REJECT, Accept(1, 3), ViolationKind.C_MIN_BELOW_P_MIN),
    (REJECT, Accept(2, 6), ViolationKind.C_MAX_ABOVE_P_MAX),
])
def test_violation_kinds(prior, new, kind):
    assert validate_optin(prior, new, P_MIN, P_MAX) == kind


@pytest.mark.parametrize("prior, new", [
    (REJECT, REJECT),
    (REJECT, Accept(2, 5)),
    (Accept(2, 5), Accept(2, 5)),
    (Accept(2, 5), Accept(5, 5)),
    # c'_max は前回より小さくしてよい
    (Accept(2, 5), Accept(3, 3)),
])
def test_accepted_examples(prior, new):
    assert validate_optin(prior, new, P_MIN, P_MAX) is None


@given(strategies.integers(min_value=1, max_value=30),
       strategies.integers(min_value=0, max_value=30),
       strategies.data())
def test_accepted_optin_never_loosens_the_lower_bound(p_min, extra, data):
    p_max = p_min + extra
    c_min = data.draw(strategies.integers(min_value=p_min, max_value=p_max))
    prior = Accept(c_min, data.draw(strategies.integers(min_value=c_min, max_value=p_max)))
    new_min = data.draw(strategies.integers(min_value=0, max_value=p_max + 2))
    new = Accept(new_min, data.draw(strategies.integers(min_value=0, max_value=p_max + 2)))
    if validate_optin(prior, new, p_min, p_max) is None:
        assert prior.c_min <= new.c_min <= new.c_max <= p_max
