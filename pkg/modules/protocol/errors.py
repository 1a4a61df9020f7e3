# modules/protocol/errors.py
"""
MOPaC の例外とルール違反の種類

各例外クラスは `code` を持ち、メディエーターのワイヤーエラーコードとしてもそのまま使う。
"""
from enum import Enum
from typing import Iterable, Optional, Sequence, Tuple


class ViolationKind(str, Enum):
    """投票・オプトインの閾値ルール違反の種類"""
    C_MIN_BELOW_P_MIN = "CMinBelowPMin"
    C_MAX_BELOW_C_MIN = "CMaxBelowCMin"
    C_MAX_ABOVE_P_MAX = "CMaxAbovePMax"
    REJECT_AFTER_ACCEPT = "RejectAfterAccept"
    C_MIN_REDUCED = "CMinReduced"


class MopacError(Exception):
    """このパッケージの全例外の基底クラス"""
    code = "mopac_error"


class ProtocolError(MopacError):
    """プロトコル（状態機械・解決処理）上の誤り"""
    code = "protocol_error"


# ---- ネゴシエーション生成時 ----

class DuplicateAgent(ProtocolError):
    code = "duplicate_agent"

    def __init__(self, agent):
        self.agent = agent
        super().__init__(f"エージェントIDが重複しています: {agent}")


class EmptyRoster(ProtocolError):
    code = "empty_roster"

    def __init__(self):
        super().__init__("エージェントが1人もいません")


class SingleAgent(ProtocolError):
    code = "single_agent"

    def __init__(self, agent):
        self.agent = agent
        super().__init__(f"エージェントが1人しかいません: {agent}")


class ZeroPower(ProtocolError):
    code = "zero_power"

    def __init__(self, agent, power):
        self.agent = agent
        self.power = power
        super().__init__(f"パワーは1以上が必要です: {agent}={power}")


class PMinExceedsPMax(ProtocolError):
    code = "p_min_exceeds_p_max"

    def __init__(self, p_min: int, p_max: int):
        self.p_min = p_min
        self.p_max = p_max
        super().__init__(f"p_min({p_min}) が p_max({p_max}) を超えています")


# ---- フェーズ操作 ----

class WrongPhase(ProtocolError):
    code = "wrong_phase"

    def __init__(self, expected, actual):
        self.expected = expected
        self.actual = actual
        super().__init__(f"フェーズが違います: 期待={expected}, 現在={actual}")


class NegotiationFinished(WrongPhase):
    code = "negotiation_finished"

    def __init__(self):
        ProtocolError.__init__(self, "ネゴシエーションは既に終了しています")
        self.expected = None
        self.actual = None


class NotResolved(ProtocolError):
    code = "not_resolved"

    def __init__(self, actual):
        self.actual = actual
        super().__init__(f"ラウンドがまだ解決されていません: 現在={actual}")


class UnknownAgent(ProtocolError):
    code = "unknown_agent"

    def __init__(self, agent):
        self.agent = agent
        super().__init__(f"参加していないエージェントです: {agent}")


class UnknownBid(ProtocolError):
    code = "unknown_bid"

    def __init__(self, bid):
        self.bid = bid
        super().__init__(f"テーブルに無いビッドです: {bid}")


class AlreadyBid(ProtocolError):
    code = "already_bid"

    def __init__(self, agent):
        self.agent = agent
        super().__init__(f"このラウンドでは既にビッド済みです: {agent}")


class AlreadyVoted(ProtocolError):
    code = "already_voted"

    def __init__(self, agent, bid):
        self.agent = agent
        self.bid = bid
        super().__init__(f"既に投票済みです: {agent} / {bid}")


class MissingBids(ProtocolError):
    code = "missing_bids"

    def __init__(self, agents: Sequence):
        self.agents = tuple(agents)
        super().__init__(f"ビッドしていないエージェントがいます: {', '.join(self.agents)}")


class MissingVotes(ProtocolError):
    code = "missing_votes"

    def __init__(self, pairs: Iterable[Tuple[str, str]]):
        self.pairs = tuple(pairs)
        listed = ", ".join(f"({a},{b})" for a, b in self.pairs)
        super().__init__(f"投票が揃っていません: {listed}")


class InvalidThresholds(ProtocolError):
    code = "invalid_thresholds"

    def __init__(self, kind: ViolationKind):
        self.kind = kind
        super().__init__(f"閾値が不正です: {kind.value}")


class OptInViolation(ProtocolError):
    code = "optin_violation"

    def __init__(self, kind: ViolationKind):
        self.kind = kind
        super().__init__(f"オプトインの制約違反です: {kind.value}")


class SizeBelowTwo(ProtocolError):
    code = "size_below_two"

    def __init__(self, size: int):
        self.size = size
        super().__init__(f"コンセンサスグループは2人以上が必要です: {size}人")


# ---- シミュレーション・シナリオ ----

class ScenarioParseError(MopacError):
    code = "parse_error"

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"{line}行目")
        if field:
            where.append(field)
        prefix = f"[{' / '.join(where)}] " if where else ""
        super().__init__(f"{prefix}{message}")


class ScenarioValidationError(MopacError):
    code = "validation_error"

    def __init__(self, message: str, invariant: str = ""):
        self.invariant = invariant
        super().__init__(message)


class ScriptExhausted(MopacError):
    code = "script_exhausted"

    def __init__(self, agent, request: str, round_index: int):
        self.agent = agent
        self.request = request
        self.round_index = round_index
        super().__init__(f"スクリプトに {request} (ラウンド{round_index}) がありません: {agent}")


class StrategyViolation(MopacError):
    code = "strategy_violation"

    def __init__(self, agent, detail: str, events=None):
        self.agent = agent
        self.detail = detail
        self.events = list(events or [])
        super().__init__(f"戦略がプロトコル違反の行動を返しました: {agent}: {detail}")


class TraceMismatch(MopacError):
    code = "trace_mismatch"

    def __init__(self, seq: int, detail: str):
        self.seq = seq
        self.detail = detail
        super().__init__(f"トレースの再生結果が一致しません (seq={seq}): {detail}")
