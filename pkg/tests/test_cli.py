# tests/test_cli.py
import logging
import os

import pandas as pd
import pytest

from conftest import GOLDEN_DIR, project_root, scenario_path
from modules.simulation.cli import (
    EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, UsageError, main, parse_seed_range,
)
from modules.simulation.trace import load_trace

SETTINGS = os.path.join(project_root, 'config', 'settings.yaml')

OVERREACHING = """\
[scenario]
name = overreach
p_min = 2

[agent A]
power = 1
strategy = scripted
r1.bid = x
r1.votes = x:accept(2,5)

[agent B]
power = 1
strategy = scripted
r1.bid = x
r1.votes = x:accept(2,2)
"""


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    monkeypatch.delenv("MOPAC_SEED", raising=False)
    yield
    # main() が付けたハンドラは capsys の差し替えたストリームを握っているので外す
    for handler in logging.root.handlers[:]:
        logging.root.removeHandler(handler)


def _cli(*args):
    return main(['--no-log-file', '--config', SETTINGS, *args])


class TestRun:
    def test_s3_trace_matches_golden(self, tmp_path, capsys):
        trace = tmp_path / "s3.jsonl"
        assert _cli('run', scenario_path('s3'), '--trace', str(trace)) == EXIT_OK
        with open(os.path.join(GOLDEN_DIR, 's3_policy_one.jsonl'), encoding='utf-8') as f:
            assert trace.read_text(encoding='utf-8') == f.read()
        out = capsys.readouterr().out
        assert "ネゴシエーション終了" in out
        assert "A3" in out

    def test_policy_override(self, tmp_path):
        trace = tmp_path / "s3.jsonl"
        assert _cli('run', scenario_path('s3'), '--policy', 'two', '--trace', str(trace), '-q') == EXIT_OK
        with open(os.path.join(GOLDEN_DIR, 's3_policy_two.jsonl'), encoding='utf-8') as f:
            assert trace.read_text(encoding='utf-8') == f.read()

    def test_engines_write_identical_traces(self, tmp_path):
        naive, pruned = tmp_path / "naive.jsonl", tmp_path / "pruned.jsonl"
        path = scenario_path('flatmates')
        assert _cli('run', path, '--seed', '7', '--engine', 'naive', '--trace', str(naive), '-q') == EXIT_OK
        assert _cli('run', path, '--seed', '7', '--engine', 'pruned', '--trace', str(pruned), '-q') == EXIT_OK
        assert naive.read_bytes() == pruned.read_bytes()

    @pytest.mark.parametrize("env, arg, expected", [
        (None, None, 7),
        ("9", None, 9),
        ("9", "3", 3),
    ])
    def test_seed_precedence(self, tmp_path, monkeypatch, env, arg, expected):
        if env is not None:
            monkeypatch.setenv("MOPAC_SEED", env)
        trace = tmp_path / "meeting.jsonl"
        args = ['run', scenario_path('meeting'), '--trace', str(trace), '-q']
        if arg is not None:
            args += ['--seed', arg]
        assert _cli(*args) == EXIT_OK
        assert load_trace(str(trace))[0].payload["seed"] == expected

    def test_bad_seed_environment(self, monkeypatch, capsys):
        monkeypatch.setenv("MOPAC_SEED", "lots")
        assert _cli('run', scenario_path('s3')) == EXIT_USAGE
        assert "MOPAC_SEED" in capsys.readouterr().err

    def test_strategy_violation_exits_with_one(self, tmp_path, capsys):
        scenario = tmp_path / "overreach.scenario"
        scenario.write_text(OVERREACHING, encoding='utf-8')
        trace = tmp_path / "overreach.jsonl"
        assert _cli('run', str(scenario), '--trace', str(trace)) == EXIT_VIOLATION
        assert "戦略の違反" in capsys.readouterr().err
        events = load_trace(str(trace))
        assert [e.kind for e in events] == ["NegotiationStarted", "BidSubmitted", "BidSubmitted", "BidAnnouncement"]


class TestValidate:
    def test_every_preset_is_valid(self, scenario_paths):
        for path in scenario_paths:
            assert _cli('validate', path, '-q') == EXIT_OK

    def test_broken_scenario(self, tmp_path, capsys):
        scenario = tmp_path / "broken.scenario"
        scenario.write_text(OVERREACHING.replace("strategy = scripted", "strategy = telepathic", 1), encoding='utf-8')
        assert _cli('validate', str(scenario)) == EXIT_USAGE
        err = capsys.readouterr().err
        assert "[agent A] strategy" in err
        assert "7行目" in err

    def test_missing_file(self, tmp_path):
        assert _cli('validate', str(tmp_path / "nowhere.scenario")) == EXIT_USAGE


class TestAnalyze:
    def test_trace_with_check(self, tmp_path, capsys):
        trace = tmp_path / "s3.jsonl"
        _cli('run', scenario_path('s3'), '--trace', str(trace), '-q')
        capsys.readouterr()
        assert _cli('analyze', str(trace), '--check') == EXIT_OK
        out = capsys.readouterr().out
        assert "A1 A2" in out
        assert "A2 A3" in out
        assert "一致しました" in out

    def test_votes_file(self, tmp_path, capsys):
        votes = tmp_path / "s3.votes"
        votes.write_text(
            "[round]\np_min = 2\nbid_table = b1, b2\n\n"
            "[agent A1]\npower = 2\nvotes = b1:accept(2,4), b2:accept(2,2)\n\n"
            "[agent A2]\npower = 1\nvotes = b1:accept(3,4), b2:accept(2,4)\n\n"
            "[agent A3]\npower = 1\nvotes = b1:reject, b2:accept(2,4)\n",
            encoding='utf-8',
        )
        assert _cli('analyze', str(votes), '--engine', 'naive') == EXIT_OK
        out = capsys.readouterr().out
        assert "A1[2,4] A2[3,4]" in out

    def test_corrupt_trace(self, tmp_path):
        trace = tmp_path / "bad.jsonl"
        trace.write_text("not json\n", encoding='utf-8')
        assert _cli('analyze', str(trace)) == EXIT_USAGE


class TestBatch:
    def test_summary_and_traces(self, tmp_path):
        summary = tmp_path / "summary.csv"
        status = _cli('batch', scenario_path('s3'), scenario_path('meeting'), '--seeds', '1-2',
                      '--out-dir', str(tmp_path / "traces"), '--summary', str(summary), '-q')
        assert status == EXIT_OK
        table = pd.read_csv(summary, encoding='utf-8-sig')
        assert len(table) == 4
        assert set(table['scenario']) == {'s3', 'meeting'}
        assert (tmp_path / "traces" / "s3_seed1.jsonl").exists()
        assert (tmp_path / "traces" / "meeting_seed2.jsonl").exists()

    def test_bad_seed_range(self, tmp_path):
        assert _cli('batch', scenario_path('s3'), '--seeds', '5-1', '--out-dir', str(tmp_path)) == EXIT_USAGE


class TestUsage:
    def test_missing_subcommand(self):
        assert main(['--no-log-file']) == EXIT_USAGE

    def test_unknown_option(self):
        assert _cli('run', scenario_path('s3'), '--colour', 'blue') == EXIT_USAGE

    @pytest.mark.parametrize("text, seeds", [
        ("3", [3]),
        ("1-3", [1, 2, 3]),
        ("1,2,5", [1, 2, 5]),
        ("1-2,7", [1, 2, 7]),
    ])
    def test_parse_seed_range(self, text, seeds):
        assert parse_seed_range(text) == seeds

    @pytest.mark.parametrize("text", ["", "a-b", "4-2"])
    def test_parse_seed_range_errors(self, text):
        with pytest.raises(UsageError):
            parse_seed_range(text)
