# modules/utils/timeout_utils.py
import time
import logging
from typing import Callable, Optional

logger = logging.getLogger(__name__)


class PhaseDeadline:
    """フェーズごとの締め切り監視クラス（メディエーターのタイムアウト用）"""

    def __init__(self, timeout_seconds: float, clock: Optional[Callable[[], float]] = None,
                 label: str = ""):
        """
        締め切り監視の初期化

        Args:
            timeout_seconds (float): フェーズの制限時間（秒）
            clock (callable, optional): 現在時刻を返す関数
                Noneの場合は time.monotonic（asyncio では loop.time を渡す）
            label (str): ログ出力用のフェーズ名
        """
        self.clock = clock or time.monotonic
        self.start_time = self.clock()
        self.timeout_seconds = timeout_seconds
        self.label = label

    def remaining(self) -> float:
        """
        残り時間を取得

        Returns:
            float: 残り時間（秒）、締め切り後は0
        """
        elapsed = self.clock() - self.start_time
        return max(0.0, self.timeout_seconds - elapsed)

    def expired(self) -> bool:
        """
        締め切りを過ぎたかどうか

        Returns:
            bool: 締め切りを過ぎていればTrue
        """
        if self.remaining() <= 0:
            logger.warning(f"フェーズ締め切り到達: {self.label} ({self.timeout_seconds:.1f}秒)")
            return True
        return False
