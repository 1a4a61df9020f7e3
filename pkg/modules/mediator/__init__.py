# modules/mediator/__init__.py
"""
Mediator Package - ネットワーク越しのエージェントとネゴシエーションを進めるメディエーター

同じ状態機械を、登録・フェーズごとの締め切り・既定値の補完つきで動かします。
"""

from .wire import WireMessage, WireFormatError, PROTOCOL_VERSION, error_message
from .session_config import SessionConfig, load_session_config, load_session_file
from .session import MediatorSession, Connection, SessionAborted
from .server import MediatorServer, StreamConnection, parse_listen_address, serve_sessions
from .client import RemoteAgentClient, ClientResult

__all__ = [
    'WireMessage', 'WireFormatError', 'PROTOCOL_VERSION', 'error_message',
    'SessionConfig', 'load_session_config', 'load_session_file',
    'MediatorSession', 'Connection', 'SessionAborted',
    'MediatorServer', 'StreamConnection', 'parse_listen_address', 'serve_sessions',
    'RemoteAgentClient', 'ClientResult',
]
