# modules/simulation/cli.py
"""
MOPaC コマンドラインツール

使い方:
    python -m modules.simulation.cli run config/scenarios/meeting.scenario --seed 7
    python -m modules.simulation.cli validate config/scenarios/s3.scenario
    python -m modules.simulation.cli analyze traces/s3.jsonl --check
    python -m modules.simulation.cli batch config/scenarios/*.scenario --seeds 1-20 --workers 4
    python -m modules.simulation.cli serve --session config/sessions/s3.session --listen 127.0.0.1:7400
    python -m modules.simulation.cli client config/scenarios/s3.scenario --agent A1 --session-id s3 --token a1-secret

終了コード: 0 成功 / 1 プロトコル・戦略の違反 / 2 使い方・ファイル形式の誤り
"""
import os
import sys
import argparse
import asyncio
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Dict, List, Optional, Sequence

# プロジェクトルートをPythonパスに追加
current_dir = os.path.dirname(os.path.abspath(__file__))
project_root = os.path.abspath(os.path.join(current_dir, '..', '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from modules.protocol.errors import (
    MopacError, ScenarioParseError, ScenarioValidationError, StrategyViolation,
)
from modules.protocol.types import TerminationPolicy
from modules.utils.file_utils import find_project_root, load_env_file, load_settings, save_to_csv
from modules.utils.logger_utils import get_logger, setup_logging
from modules.simulation.analyze import analyze_file, engines_agree, groups_table
from modules.simulation.replay import replay_trace
from modules.simulation.runner import RunResult, run
from modules.simulation.scenario_loader import Scenario, load_scenario_file
from modules.simulation.trace import load_trace, write_trace

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2

SEED_ENV = "MOPAC_SEED"


class UsageError(Exception):
    """引数・環境変数の誤り（終了コード2）"""


def parse_seed_range(text: str) -> List[int]:
    """
    '1-10' や '1,2,5' や '1-3,7' をシードの並びにする

    Raises:
        UsageError: 形式が不正な場合
    """
    seeds: List[int] = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        low, sep, high = part.partition("-")
        try:
            if sep:
                start, end = int(low), int(high)
                if end < start:
                    raise ValueError(part)
                seeds.extend(range(start, end + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise UsageError(f"--seeds の形式が不正です: {text}") from None
    if not seeds:
        raise UsageError("--seeds が空です")
    return seeds


def resolve_seed(arg_seed: Optional[int], scenario: Scenario, settings: Dict) -> int:
    """--seed > MOPAC_SEED > シナリオの seed > settings.yaml の default_seed"""
    if arg_seed is not None:
        return arg_seed
    env_value = os.environ.get(SEED_ENV)
    if env_value not in (None, ""):
        try:
            return int(env_value)
        except ValueError:
            raise UsageError(f"環境変数 {SEED_ENV} が整数ではありません: {env_value}") from None
    if scenario.seed is not None:
        return scenario.seed
    return int(settings['negotiation'].get('default_seed', 0))


def _policy(value: Optional[str]) -> Optional[TerminationPolicy]:
    return TerminationPolicy.parse(value) if value else None


def _print(args, text: str = "") -> None:
    if not getattr(args, 'quiet', False):
        print(text)


def print_summary(args, scenario_name: str, result: RunResult, seed: int, engine: str) -> None:
    state = result.state
    _print(args, f"✅ ネゴシエーション終了: {scenario_name} (seed={seed}, 方式={state.params.termination_policy.value}, エンジン={engine})")
    _print(args, f"  ラウンド数: {state.round_index} / 終了理由: {state.termination_reason}")
    for deal in state.deals:
        _print(args, f"  🤝 合意: ラウンド{deal.round_index} {deal.bid} [{', '.join(deal.members)}] パワー{deal.power}")
    no_deal = [e.agent for e in state.initial_roster if state.status_of(e.agent) == "no_deal"]
    if no_deal:
        _print(args, f"  合意なし: {', '.join(no_deal)}")
    _print(args, f"  イベント数: {len(result.events)}")


# ---- サブコマンド ----

def cmd_validate(args, settings: Dict) -> int:
    scenario = load_scenario_file(args.scenario)
    _print(args, f"✅ シナリオは有効です: {scenario.name} ({len(scenario.agents)}エージェント, "
                 f"p_min={scenario.params.p_min}, 方式={scenario.params.termination_policy.value})")
    return EXIT_OK


def cmd_run(args, settings: Dict) -> int:
    scenario = load_scenario_file(args.scenario)
    seed = resolve_seed(args.seed, scenario, settings)
    engine = args.engine or settings['negotiation']['engine']
    try:
        result = run(scenario, seed=seed, engine=engine, policy=_policy(args.policy))
    except StrategyViolation as e:
        if args.trace:
            write_trace(e.events, args.trace)
        print(f"❌ 戦略の違反で中断しました: {e}", file=sys.stderr)
        return EXIT_VIOLATION
    if args.trace:
        write_trace(result.events, args.trace)
    print_summary(args, scenario.name, result, seed, engine)
    return EXIT_OK


def cmd_analyze(args, settings: Dict) -> int:
    engine = args.engine or settings['negotiation']['engine']
    analyses = analyze_file(args.file, engine)
    table = groups_table(analyses)
    if table.empty:
        _print(args, "実行可能グループはありません")
    else:
        _print(args, table.to_string(index=False))

    status = EXIT_OK
    for analysis in analyses:
        if not analysis.matches_record:
            print(f"❌ ラウンド{analysis.round.round_index}: 記録された実行可能グループと一致しません", file=sys.stderr)
            status = EXIT_VIOLATION
        if args.check and not engines_agree(analysis.round):
            print(f"❌ ラウンド{analysis.round.round_index}: naive と pruned の結果が一致しません", file=sys.stderr)
            status = EXIT_VIOLATION
    if args.check and args.file.endswith(".jsonl"):
        replay_trace(load_trace(args.file), engine)
        _print(args, "✅ トレースの再生結果は記録と一致しました")
    return status


def run_batch_job(job: Dict) -> Dict:
    """batch の1件分（別プロセスからも呼べるようにモジュールレベルに置く）"""
    scenario = load_scenario_file(job['scenario_path'])
    trace_path = os.path.join(job['out_dir'], f"{scenario.name}_seed{job['seed']}.jsonl")
    row = {'scenario': scenario.name, 'seed': job['seed'], 'engine': job['engine']}
    try:
        result = run(scenario, seed=job['seed'], engine=job['engine'], policy=_policy(job['policy']))
    except StrategyViolation as e:
        write_trace(e.events, trace_path)
        row.update({'policy': scenario.params.termination_policy.value, 'rounds': None, 'deals': 0,
                    'dealt_power': 0, 'reason': f"violation: {e.agent}", 'trace_file': trace_path})
        return row
    write_trace(result.events, trace_path)
    state = result.state
    row.update({
        'policy': state.params.termination_policy.value,
        'rounds': state.round_index,
        'deals': len(state.deals),
        'dealt_power': sum(deal.power for deal in state.deals),
        'reason': state.termination_reason,
        'trace_file': trace_path,
    })
    return row


def cmd_batch(args, settings: Dict) -> int:
    seeds = parse_seed_range(args.seeds)
    engine = args.engine or settings['negotiation']['engine']
    out_dir = args.out_dir or settings['simulation']['trace_dir']
    workers = args.workers or int(settings['simulation'].get('batch_workers', 1))
    # 先に全シナリオを検証しておく
    for path in args.scenarios:
        load_scenario_file(path)

    jobs = [
        {'scenario_path': path, 'seed': seed, 'engine': engine, 'policy': args.policy, 'out_dir': out_dir}
        for path in args.scenarios for seed in seeds
    ]
    _print(args, f"🚀 バッチ実行: {len(args.scenarios)}シナリオ × {len(seeds)}シード (並列数 {workers})")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(run_batch_job, jobs))
    else:
        rows = [run_batch_job(job) for job in jobs]

    summary_path = args.summary or os.path.join(out_dir, settings['simulation']['summary_file'])
    save_to_csv(rows, summary_path)
    violations = sum(1 for row in rows if str(row['reason']).startswith("violation"))
    _print(args, f"✅ バッチ完了: {len(rows)}件 (違反 {violations}件) サマリー: {summary_path}")
    return EXIT_VIOLATION if violations else EXIT_OK


def cmd_serve(args, settings: Dict) -> int:
    from modules.mediator.server import parse_listen_address, serve_sessions
    from modules.mediator.session_config import load_session_file

    try:
        host, port = parse_listen_address(args.listen or settings['mediator']['listen'])
    except ValueError as e:
        raise UsageError(str(e)) from None
    default_timeout = float(settings['mediator']['phase_timeout'])
    configs = [load_session_file(path, default_timeout) for path in args.session]
    if args.timeout is not None:
        configs = [replace(config, phase_timeout=args.timeout) for config in configs]

    _print(args, f"🚀 メディエーター起動: {host}:{port} セッション={[c.session_id for c in configs]}")
    try:
        results = asyncio.run(serve_sessions(configs, host, port, args.engine or settings['negotiation']['engine']))
    except OSError as e:
        print(f"❌ 待ち受けを開始できません: {e}", file=sys.stderr)
        return EXIT_VIOLATION

    for session_id, result in results.items():
        if args.trace_dir:
            write_trace(result.events, os.path.join(args.trace_dir, f"{session_id}.jsonl"))
        print_summary(args, session_id, result, result.state.params.rng_seed, "mediator")
    return EXIT_OK


def cmd_client(args, settings: Dict) -> int:
    from modules.agents.factory import build_strategy
    from modules.mediator.client import RemoteAgentClient
    from modules.mediator.server import parse_listen_address

    scenario = load_scenario_file(args.scenario)
    try:
        spec = scenario.agent(args.agent)
    except KeyError:
        raise UsageError(f"シナリオにエージェントがいません: {args.agent}") from None
    token = args.token or (os.environ.get(args.token_env) if args.token_env else None)
    if not token:
        raise UsageError("--token か --token-env が必要です")
    try:
        host, port = parse_listen_address(args.connect or settings['mediator']['listen'])
    except ValueError as e:
        raise UsageError(str(e)) from None

    seed = resolve_seed(args.seed, scenario, settings)
    strategy = build_strategy(spec.agent_id, spec.kind, spec.config, run_seed=seed)
    client = RemoteAgentClient(strategy, spec.agent_id, token, args.session_id, scenario.bid_space)
    outcome = asyncio.run(client.run(host, port))

    for error in outcome.errors:
        print(f"⚠️ エラー応答: {error.get('code')}: {error.get('detail')}", file=sys.stderr)
    final = outcome.final
    if final is None:
        print("❌ 結果を受け取れませんでした", file=sys.stderr)
        return EXIT_VIOLATION
    deal = final.get('deal')
    detail = f" {deal['bid']} [{', '.join(deal['members'])}]" if deal else ""
    _print(args, f"✅ {args.agent}: {final.get('status')}{detail} (理由={final.get('reason')})")
    return EXIT_OK


COMMANDS = {
    'run': cmd_run,
    'validate': cmd_validate,
    'analyze': cmd_analyze,
    'batch': cmd_batch,
    'serve': cmd_serve,
    'client': cmd_client,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='mopac', description='MOPaC 多者間ネゴシエーションのシミュレーターとメディエーター')
    parser.add_argument('--config', '-c', help='設定ファイルパス（既定: config/settings.yaml）')
    parser.add_argument('--log-dir', help='ログ出力ディレクトリ')
    parser.add_argument('--no-log-file', action='store_true', help='ログファイルを作らない')
    sub = parser.add_subparsers(dest='command', required=True)

    engines = ['naive', 'pruned']
    policies = ['one', 'two']

    p = sub.add_parser('run', help='シナリオを実行する')
    p.add_argument('scenario')
    p.add_argument('--seed', type=int)
    p.add_argument('--policy', choices=policies)
    p.add_argument('--engine', choices=engines)
    p.add_argument('--trace', help='トレースの出力先 (.jsonl)')
    p.add_argument('--quiet', '-q', action='store_true')

    p = sub.add_parser('validate', help='シナリオを検証だけする')
    p.add_argument('scenario')
    p.add_argument('--quiet', '-q', action='store_true')

    p = sub.add_parser('analyze', help='トレースか votes ファイルから実行可能グループを計算し直す')
    p.add_argument('file')
    p.add_argument('--engine', choices=engines)
    p.add_argument('--check', action='store_true', help='両エンジンの一致とトレースの再生も確かめる')
    p.add_argument('--quiet', '-q', action='store_true')

    p = sub.add_parser('batch', help='複数シナリオ × シード範囲をまとめて実行する')
    p.add_argument('scenarios', nargs='+')
    p.add_argument('--seeds', default='0', help="例: '1-10' / '1,2,5'")
    p.add_argument('--policy', choices=policies)
    p.add_argument('--engine', choices=engines)
    p.add_argument('--out-dir', help='トレースの出力ディレクトリ')
    p.add_argument('--summary', help='サマリーCSVの出力先')
    p.add_argument('--workers', type=int)
    p.add_argument('--quiet', '-q', action='store_true')

    p = sub.add_parser('serve', help='メディエーターを起動する')
    p.add_argument('--session', action='append', required=True, help='セッションファイル（複数指定可）')
    p.add_argument('--listen', help='host:port')
    p.add_argument('--timeout', type=float, help='フェーズの制限時間（秒）')
    p.add_argument('--engine', choices=engines)
    p.add_argument('--trace-dir', help='セッションごとのトレースの出力先')
    p.add_argument('--quiet', '-q', action='store_true')

    p = sub.add_parser('client', help='シナリオのエージェントをリモートクライアントとして動かす')
    p.add_argument('scenario')
    p.add_argument('--agent', required=True)
    p.add_argument('--session-id', required=True)
    p.add_argument('--token')
    p.add_argument('--token-env', help='トークンを読む環境変数名')
    p.add_argument('--connect', help='host:port')
    p.add_argument('--seed', type=int)
    p.add_argument('--quiet', '-q', action='store_true')
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """メイン実行関数"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    root_dir = find_project_root()
    load_env_file(root_dir)
    settings = load_settings(args.config)
    log_settings = settings['logging']

    log_dir = None
    if not args.no_log_file:
        log_dir = args.log_dir or log_settings.get('log_dir')
        if log_dir and not os.path.isabs(log_dir):
            log_dir = os.path.join(root_dir, log_dir)
    setup_logging(
        log_dir, f"mopac_{args.command}",
        console_level='ERROR' if getattr(args, 'quiet', False) else log_settings['console_level'],
        file_level=log_settings['file_level'],
        timezone=log_settings['timezone'],
    )
    logger.info(f"コマンド開始: {args.command}")

    try:
        return COMMANDS[args.command](args, settings)
    except (ScenarioParseError, ScenarioValidationError) as e:
        print(f"❌ シナリオエラー: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, FileNotFoundError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        # トレースの形式エラーなど
        print(f"❌ 入力エラー: {e}", file=sys.stderr)
        return EXIT_USAGE
    except MopacError as e:
        print(f"❌ プロトコル違反: {e}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
