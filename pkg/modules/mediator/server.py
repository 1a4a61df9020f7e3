# modules/mediator/server.py
"""
asyncio ストリームによるメディエーターサーバー

1接続1タスクで行を読み、セッションIDで振り分けて各セッションの queue に積む。
"""
import asyncio
from typing import Dict, Iterable, List, Optional, Tuple, Union

from modules.consensus.engine import Engine
from modules.simulation.runner import RunResult
from modules.utils.logger_utils import get_logger
from .session import Connection, MediatorSession
from .session_config import SessionConfig
from .wire import BAD_MESSAGE, SESSION_MISMATCH, WireFormatError, WireMessage, error_message

logger = get_logger(__name__)


class StreamConnection(Connection):
    """StreamWriter を包んだ送信口"""

    def __init__(self, writer: asyncio.StreamWriter):
        self.writer = writer
        self.peer = writer.get_extra_info("peername")

    async def send(self, message: WireMessage) -> None:
        if self.closed:
            return
        try:
            self.writer.write(message.encode())
            await self.writer.drain()
        except (ConnectionError, RuntimeError) as e:
            # 切断はタイムアウトと同じ扱い
            logger.warning(f"送信できませんでした {self.peer}: {e}")
            self.closed = True

    def close(self) -> None:
        self.closed = True
        self.writer.close()


def parse_listen_address(text: str) -> Tuple[str, int]:
    """
    'host:port' を (host, port) にする

    Raises:
        ValueError: 形式が不正な場合
    """
    host, sep, port = text.rpartition(":")
    if not sep or not host or not port.isdigit():
        raise ValueError(f"--listen は host:port の形式です: {text}")
    return host, int(port)


class MediatorServer:
    """複数のセッションをひとつの待ち受けアドレスで受け付けるサーバー"""

    def __init__(self, sessions: Iterable[MediatorSession]):
        self.sessions: Dict[str, MediatorSession] = {}
        for session in sessions:
            if session.session_id in self.sessions:
                raise ValueError(f"セッションIDが重複しています: {session.session_id}")
            self.sessions[session.session_id] = session
        self.server: Optional[asyncio.AbstractServer] = None
        self.connections: List[StreamConnection] = []

    async def handle_connection(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        connection = StreamConnection(writer)
        self.connections.append(connection)
        logger.debug(f"接続: {connection.peer}")
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                if not line.strip():
                    continue
                try:
                    message = WireMessage.from_line(line)
                except WireFormatError as e:
                    await connection.send(error_message(BAD_MESSAGE, str(e)))
                    continue
                session = self.sessions.get(message.get("session"))
                if session is None:
                    await connection.send(error_message(
                        SESSION_MISMATCH, f"不明なセッションです: {message.get('session')!r}",
                        ref_type=message.type))
                    continue
                session.submit(connection, message)
        except (ConnectionError, asyncio.IncompleteReadError) as e:
            logger.warning(f"接続が切れました {connection.peer}: {e}")
        finally:
            connection.closed = True
            logger.debug(f"切断: {connection.peer}")

    async def start(self, host: str, port: int) -> asyncio.AbstractServer:
        """
        待ち受けを開始する

        Raises:
            OSError: アドレスに bind できない場合
        """
        try:
            self.server = await asyncio.start_server(self.handle_connection, host, port)
        except OSError as e:
            logger.error(f"待ち受けを開始できません {host}:{port}: {e}")
            raise
        sockets = self.server.sockets or []
        bound = sockets[0].getsockname() if sockets else (host, port)
        logger.info(f"メディエーター待ち受け開始: {bound[0]}:{bound[1]} セッション={list(self.sessions)}")
        return self.server

    @property
    def port(self) -> Optional[int]:
        if self.server is None or not self.server.sockets:
            return None
        return self.server.sockets[0].getsockname()[1]

    async def run_sessions(self) -> Dict[str, RunResult]:
        """全セッションを並行に最後まで進める（セッション同士は独立）"""
        results = await asyncio.gather(*(session.run() for session in self.sessions.values()))
        return dict(zip(self.sessions, results))

    async def close(self) -> None:
        for connection in self.connections:
            if not connection.closed:
                connection.close()
        if self.server is not None:
            self.server.close()
            await self.server.wait_closed()


async def serve_sessions(configs: Iterable[SessionConfig], host: str, port: int,
                         engine: Union[str, Engine] = "pruned") -> Dict[str, RunResult]:
    """
    セッションを待ち受け、すべて終了したら結果を返す

    Args:
        configs: セッション設定
        host, port: 待ち受けアドレス（port=0 なら空いているポート）
        engine: 実行可能グループの列挙エンジン

    Returns:
        dict: セッションID -> RunResult
    """
    server = MediatorServer(MediatorSession(config, engine) for config in configs)
    await server.start(host, port)
    try:
        return await server.run_sessions()
    finally:
        await server.close()
