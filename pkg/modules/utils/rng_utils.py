# modules/utils/rng_utils.py
"""
決定的な乱数ストリームの生成

ひとつのシード値から、用途（タイブレーク、各エージェントの戦略など）ごとに
独立した random.Random を派生させる。同じシード・同じタグなら常に同じ系列になる。
"""
import random
import zlib

# トレースのヘッダーに記録するアルゴリズム識別子
RNG_ALGORITHM = "python-random-mt19937/crc32-derived"

SEED_MASK = 0xFFFFFFFFFFFFFFFF


def normalize_seed(seed) -> int:
    """シードを64bit符号なし整数に丸める"""
    return int(seed) & SEED_MASK


def derive_seed(seed: int, *tags) -> int:
    # hash() はプロセスごとにランダム化されるので使わない
    tag = "/".join(str(t) for t in tags)
    crc = zlib.crc32(tag.encode("utf-8")) & 0xFFFFFFFF
    return (normalize_seed(seed) ^ (crc << 16)) & SEED_MASK


def derive_rng(seed: int, *tags) -> random.Random:
    """
    ベースシードとタグから独立した乱数生成器を作る

    Args:
        seed (int): ベースシード
        *tags: 用途を識別するタグ（例: "resolution", 3）

    Returns:
        random.Random: 派生した乱数生成器
    """
    return random.Random(derive_seed(seed, *tags))
