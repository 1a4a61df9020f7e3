# modules/mediator/wire.py
"""
メディエーターとエージェントの間の1行1メッセージの JSON 形式

各行は `type` を持つオブジェクト。投票・アナウンスのペイロードはトレースと同じ形式を使う。
"""
import json
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from modules.protocol.errors import MopacError

PROTOCOL_VERSION = 1

CLIENT_TYPES = ("register", "bid", "vote", "optin")
SERVER_TYPES = (
    "registered", "bid_request", "bid_announcement", "vote_request",
    "vote_announcement", "optin_request", "result", "error",
)
MESSAGE_TYPES = CLIENT_TYPES + SERVER_TYPES

# ワイヤー専用のエラーコード（プロトコルのエラーコードはそのまま流用する）
AUTH_FAILED = "auth_failed"
SESSION_MISMATCH = "session_mismatch"
DUPLICATE_REGISTRATION = "duplicate_registration"
UNSUPPORTED_VERSION = "unsupported_version"
BAD_MESSAGE = "bad_message"
NOT_REGISTERED = "not_registered"


class WireFormatError(MopacError):
    code = BAD_MESSAGE


@dataclass(frozen=True)
class WireMessage:
    type: str
    fields: Dict[str, Any] = field(default_factory=dict)

    def get(self, key: str, default: Any = None) -> Any:
        return self.fields.get(key, default)

    def to_line(self) -> str:
        record = {"type": self.type}
        record.update(self.fields)
        return json.dumps(record, ensure_ascii=False, separators=(",", ":"))

    def encode(self) -> bytes:
        return (self.to_line() + "\n").encode("utf-8")

    @classmethod
    def from_line(cls, line) -> "WireMessage":
        """
        Raises:
            WireFormatError: JSON として読めない、または type が不明な場合
        """
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError as e:
                raise WireFormatError(f"UTF-8 ではありません: {e}") from e
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise WireFormatError(f"JSON として読めません: {e.msg}") from e
        if not isinstance(record, dict):
            raise WireFormatError("メッセージはオブジェクトである必要があります")
        kind = record.pop("type", None)
        if kind not in MESSAGE_TYPES:
            raise WireFormatError(f"不明なメッセージ種別です: {kind!r}")
        return cls(kind, record)


def error_message(code: str, detail: str, session: Optional[str] = None,
                  ref_type: Optional[str] = None, **extra) -> WireMessage:
    fields: Dict[str, Any] = {"code": code, "detail": detail}
    if session is not None:
        fields["session"] = session
    if ref_type is not None:
        fields["ref_type"] = ref_type
    fields.update(extra)
    return WireMessage("error", fields)
