# modules/simulation/__init__.py
"""
Simulation Package - シナリオの読み込み・実行・トレース・再生

コマンドラインツールは modules.simulation.cli にあります。
"""

from .scenario_loader import Scenario, AgentSpec, load_scenario, load_scenario_file
from .trace import TraceEvent, TraceRecorder, load_trace, parse_trace, write_trace
from .runner import NegotiationRunner, RunResult, finish_round, run
from .replay import replay_trace
from .analyze import analyze_file, analyze_round, load_votes_file, rounds_from_trace

__all__ = [
    'Scenario', 'AgentSpec', 'load_scenario', 'load_scenario_file',
    'TraceEvent', 'TraceRecorder', 'load_trace', 'parse_trace', 'write_trace',
    'NegotiationRunner', 'RunResult', 'finish_round', 'run',
    'replay_trace',
    'analyze_file', 'analyze_round', 'load_votes_file', 'rounds_from_trace',
]
