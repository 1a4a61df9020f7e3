# modules/utils/logger_utils.py
import os
import sys
import logging
import functools
from datetime import datetime
from typing import Optional

import pytz

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
DEFAULT_TIMEZONE = 'Asia/Tokyo'


def _resolve_level(level):
    """'INFO' のような文字列でも logging.INFO のような数値でも受け付ける"""
    if isinstance(level, str):
        return logging.getLevelName(level.upper())
    return level


def setup_logging(log_dir: Optional[str], name_prefix: str,
                  console_level=logging.WARNING, file_level=logging.DEBUG,
                  timezone: str = DEFAULT_TIMEZONE) -> Optional[str]:
    """
    ログ環境をセットアップする

    Args:
        log_dir (str, optional): ログファイル保存ディレクトリ（Noneの場合はファイル出力なし）
        name_prefix (str): ログファイル名の接頭辞
        console_level (int|str): コンソール出力のログレベル
        file_level (int|str): ファイル出力のログレベル
        timezone (str): ログファイル名のタイムスタンプに使うタイムゾーン

    Returns:
        str: ログファイルのパス（ファイル出力なしの場合はNone）
    """
    # すでに存在するハンドラを削除（重複を防ぐため）
    for handler in logging.root.handlers[:]:
        logging.root.removeHandler(handler)

    logger = logging.getLogger()
    logger.setLevel(logging.DEBUG)  # ルートロガーは最低レベルに設定
    formatter = logging.Formatter(LOG_FORMAT)

    log_file = None
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        now = datetime.now(pytz.timezone(timezone))
        log_file = os.path.join(log_dir, f'{name_prefix}_{now.strftime("%Y%m%d_%H%M%S")}.log')

        file_handler = logging.FileHandler(log_file, encoding='utf-8')
        file_handler.setLevel(_resolve_level(file_level))
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    # コンソールは標準エラーへ（標準出力はCLIのサマリー用）
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(_resolve_level(console_level))
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_file:
        logging.info(f"ログ機能の初期化が完了しました: {log_file}")
    return log_file


def get_logger(name=None):
    """
    名前付きロガーを取得する

    Args:
        name (str, optional): ロガー名

    Returns:
        Logger: 設定済みのロガーインスタンス
    """
    return logging.getLogger(name)


def log_function_call(func):
    """
    関数呼び出しをログに記録するデコレータ

    Args:
        func: デコレート対象の関数

    Returns:
        function: ラップされた関数
    """
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        logger = logging.getLogger(func.__module__)
        logger.debug(f"関数 {func.__name__} が呼び出されました")
        try:
            result = func(*args, **kwargs)
            logger.debug(f"関数 {func.__name__} が正常終了しました")
            return result
        except Exception as e:
            logger.error(f"関数 {func.__name__} でエラーが発生: {str(e)}")
            raise
    return wrapper
