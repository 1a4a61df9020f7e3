# modules/utils/file_utils.py
import os
import copy
import yaml
import pandas as pd
from pathlib import Path
from typing import Dict, List, Optional, Iterable

from .logger_utils import get_logger, log_function_call

# ロガーの取得
logger = get_logger(__name__)

# settings.yaml が無い・項目が欠けている場合の既定値
DEFAULT_SETTINGS: Dict = {
    'negotiation': {
        'engine': 'pruned',
        'default_seed': 0,
    },
    'simulation': {
        'trace_dir': 'traces',
        'summary_file': 'batch_summary.csv',
        'batch_workers': 1,
    },
    'mediator': {
        'listen': '127.0.0.1:7400',
        'phase_timeout': 10.0,
    },
    'logging': {
        'log_dir': 'logs',
        'console_level': 'WARNING',
        'file_level': 'DEBUG',
        'timezone': 'Asia/Tokyo',
    },
}


def find_project_root():
    """
    プロジェクトのルートディレクトリを検出する

    Returns:
        str: プロジェクトルートディレクトリの絶対パス
    """
    path = Path(os.path.abspath(os.getcwd()))
    while True:
        # .gitディレクトリがあればそれをルートとみなす
        if (path / '.git').exists():
            return str(path)

        # 設定ディレクトリかrequirements.txtがあればルートとみなす
        if (path / 'config' / 'settings.yaml').exists() or (path / 'requirements.txt').exists():
            return str(path)

        # これ以上上の階層がない場合は現在のディレクトリを返す
        if path.parent == path:
            return os.path.abspath(os.getcwd())

        path = path.parent


@log_function_call
def load_yaml_config(config_path: Optional[str] = None) -> Dict:
    """
    YAMLファイルから設定を読み込む

    Args:
        config_path (str, optional): 設定ファイルのパス
            指定がない場合はプロジェクトルートのconfig/settings.yamlを使用

    Returns:
        dict: 設定データ

    Raises:
        FileNotFoundError: 設定ファイルが見つからない場合
        yaml.YAMLError: YAMLの解析に失敗した場合
    """
    if config_path is None:
        config_path = os.path.join(find_project_root(), 'config', 'settings.yaml')

    logger.info(f"設定ファイルを読み込み: {config_path}")

    if not os.path.exists(config_path):
        error_msg = f"設定ファイルが見つかりません: {config_path}"
        logger.error(error_msg)
        raise FileNotFoundError(error_msg)

    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            config = yaml.safe_load(f) or {}
            logger.debug("設定ファイルの読み込みに成功しました")
            return config
    except yaml.YAMLError as e:
        logger.error(f"YAML解析エラー: {str(e)}")
        raise


def load_settings(config_path: Optional[str] = None) -> Dict:
    """
    settings.yaml を読み込み、欠けている項目を既定値で補う

    設定ファイルが存在しない場合は警告を出して既定値だけで動作する。

    Args:
        config_path (str, optional): 設定ファイルのパス

    Returns:
        dict: 既定値とマージ済みの設定
    """
    try:
        config = load_yaml_config(config_path)
    except FileNotFoundError:
        logger.warning("設定ファイルが無いため既定値を使用します")
        config = {}

    merged = copy.deepcopy(DEFAULT_SETTINGS)
    for section, values in config.items():
        if isinstance(values, dict):
            merged.setdefault(section, {}).update(values)
        else:
            merged[section] = values
    return merged


def load_env_file(root_dir: Optional[str] = None) -> bool:
    """
    プロジェクトルートの .env を環境変数に読み込む

    Returns:
        bool: .env を読み込んだ場合はTrue
    """
    try:
        import dotenv
    except ImportError:
        logger.warning("python-dotenvがインストールされていません。環境変数の自動読み込みをスキップします。")
        return False

    dotenv_path = os.path.join(root_dir or find_project_root(), '.env')
    if os.path.exists(dotenv_path):
        dotenv.load_dotenv(dotenv_path)
        logger.debug("環境変数を.envファイルから読み込みました")
        return True
    return False


def read_text(file_path: str) -> str:
    """
    テキストファイル（UTF-8）を読み込む

    Raises:
        FileNotFoundError: ファイルが見つからない場合
    """
    if not os.path.exists(file_path):
        error_msg = f"ファイルが見つかりません: {file_path}"
        logger.error(error_msg)
        raise FileNotFoundError(error_msg)

    with open(file_path, 'r', encoding='utf-8') as f:
        return f.read()


def write_lines(lines: Iterable[str], output_path: str) -> None:
    """
    1行1レコードのテキストファイル（UTF-8, 改行LF）として保存する

    Args:
        lines: 改行を含まない行のイテラブル
        output_path (str): 出力ファイルパス
    """
    output_dir = os.path.dirname(output_path)
    if output_dir and not os.path.exists(output_dir):
        os.makedirs(output_dir, exist_ok=True)
        logger.info(f"出力ディレクトリを作成しました: {output_dir}")

    count = 0
    with open(output_path, 'w', encoding='utf-8', newline='\n') as f:
        for line in lines:
            f.write(line)
            f.write('\n')
            count += 1
    logger.info(f"{count}行を保存しました: {output_path}")


@log_function_call
def save_to_csv(data: List[Dict], output_path: str, append: bool = False) -> None:
    """
    データをCSVファイルに保存する

    Args:
        data (List[Dict]): 保存するデータ（辞書のリスト）
        output_path (str): 出力ファイルパス
        append (bool): 追記モードで保存するかどうか（デフォルト: False）
    """
    if not data:
        logger.warning("保存するデータが空です")
        return

    output_dir = os.path.dirname(output_path)
    if output_dir and not os.path.exists(output_dir):
        os.makedirs(output_dir, exist_ok=True)
        logger.info(f"出力ディレクトリを作成しました: {output_dir}")

    mode = 'a' if append else 'w'
    header = not append or not os.path.exists(output_path)

    df = pd.DataFrame(data)
    df.to_csv(output_path, mode=mode, index=False, encoding='utf-8-sig', header=header)

    action = "追記" if append else "保存"
    logger.info(f"{len(data)}件のデータを{action}しました: {output_path}")
