# modules/mediator/session_config.py
"""
セッションファイルの読み込み（シナリオファイルと同じ文法）

    [session]
    id = s3-demo
    p_min = 2
    policy = one
    phase_timeout = 5

    [agent A1]
    power = 2
    token = a1-secret        # または token_env = MOPAC_TOKEN_A1
"""
import os
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from modules.protocol.errors import ProtocolError, ScenarioParseError, ScenarioValidationError
from modules.protocol.negotiation import new_negotiation
from modules.protocol.types import AgentId, Bid, ProtocolParams
from modules.simulation.scenario_loader import TOKEN_PATTERN, IniDocument, agent_sections, parse_params
from modules.utils.file_utils import read_text
from modules.utils.logger_utils import get_logger

logger = get_logger(__name__)

DEFAULT_PHASE_TIMEOUT = 10.0


@dataclass(frozen=True)
class SessionConfig:
    session_id: str
    params: ProtocolParams
    roster: Tuple[Tuple[AgentId, int], ...]
    tokens: Dict[AgentId, str]
    phase_timeout: float = DEFAULT_PHASE_TIMEOUT
    bid_space: Tuple[Bid, ...] = ()
    # None なら全員の登録を無期限に待つ
    registration_timeout: Optional[float] = None

    @property
    def agents(self) -> Tuple[AgentId, ...]:
        return tuple(agent for agent, _ in self.roster)

    def power_of(self, agent: AgentId) -> int:
        return dict(self.roster)[agent]


def load_session_config(text: str, default_timeout: float = DEFAULT_PHASE_TIMEOUT,
                        environ: Optional[Dict[str, str]] = None) -> SessionConfig:
    """
    セッションファイルを読み込む

    Args:
        text: ファイルの内容
        default_timeout: phase_timeout が無い場合の値（settings.yaml の mediator.phase_timeout）
        environ: token_env の参照先（省略時は os.environ）

    Raises:
        ScenarioParseError, ScenarioValidationError
    """
    environ = os.environ if environ is None else environ
    doc = IniDocument(text)
    if "session" not in doc.sections():
        raise ScenarioParseError("[session] セクションがありません", field="[session]")

    session_id = doc.require("session", "id")
    if not TOKEN_PATTERN.match(session_id):
        raise doc.error("session", "id", f"セッションIDが不正です: '{session_id}'")
    params, _ = parse_params(doc, "session")
    phase_timeout = doc.get_float("session", "phase_timeout", default_timeout)
    if phase_timeout <= 0:
        raise doc.error("session", "phase_timeout", "0より大きい秒数が必要です")
    registration_timeout = doc.get_float("session", "registration_timeout")

    roster, tokens = [], {}
    for section, agent in agent_sections(doc):
        power = doc.get_int(section, "power")
        if power is None:
            raise doc.error(section, "power", "必須の項目がありません")
        token = doc.get(section, "token")
        if token is None:
            variable = doc.get(section, "token_env")
            if variable is None:
                raise doc.error(section, "token", "token か token_env が必要です")
            token = environ.get(variable)
            if not token:
                raise doc.error(section, "token_env", f"環境変数が設定されていません: {variable}")
        roster.append((agent, power))
        tokens[agent] = token

    try:
        new_negotiation(roster, params)
    except ProtocolError as e:
        logger.error(f"セッション設定の検証エラー: {e}")
        raise ScenarioValidationError(str(e), invariant=e.code) from e

    config = SessionConfig(
        session_id=session_id,
        params=params,
        roster=tuple(roster),
        tokens=tokens,
        phase_timeout=phase_timeout,
        bid_space=tuple(Bid(b) for b in doc.get_tokens("session", "bid_space")),
        registration_timeout=registration_timeout,
    )
    logger.info(f"セッション設定を読み込みました: {session_id} ({len(roster)}エージェント)")
    return config


def load_session_file(path: str, default_timeout: float = DEFAULT_PHASE_TIMEOUT) -> SessionConfig:
    return load_session_config(read_text(path), default_timeout)
