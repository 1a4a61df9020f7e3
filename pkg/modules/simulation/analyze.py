# modules/simulation/analyze.py
"""
ラウンドの投票から実行可能グループを計算し直して表にする

入力はトレース（.jsonl）か、1ラウンド分の投票を書いた votes ファイル（シナリオと同じ文法）。

    [round]
    p_min = 2
    bid_table = b1, b2

    [agent A1]
    power = 2
    votes = b1:accept(2,4), b2:accept(2,2)
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from modules.consensus.engine import EngineStats, ViableGroup, get_engine
from modules.protocol.errors import ScenarioParseError, ScenarioValidationError
from modules.protocol.types import (
    AgentId, Bid, ProtocolParams, ResolvedRound, RosterEntry, Vote,
)
from modules.utils.file_utils import read_text
from modules.utils.logger_utils import get_logger, log_function_call
from .scenario_loader import IniDocument, agent_sections, parse_vote_list
from .trace import (
    AGENT_DROPPED, BID_ANNOUNCEMENT, DEFAULT_SUBSTITUTED, NEGOTIATION_STARTED, OPTIN_SUBMITTED,
    ROUND_CONTINUED, VIABLE_GROUPS_COMPUTED, TraceEvent, group_payload, parse_trace, vote_from_dict,
)

logger = get_logger(__name__)


@dataclass(frozen=True)
class RoundAnalysis:
    """1ラウンド分の再計算結果"""
    round: ResolvedRound
    groups: Tuple[ViableGroup, ...]
    recorded: Optional[Tuple[dict, ...]] = None
    stats: Optional[EngineStats] = None

    @property
    def matches_record(self) -> bool:
        if self.recorded is None:
            return True
        return [group_payload(g) for g in self.groups] == list(self.recorded)


def rounds_from_trace(events: Sequence[TraceEvent]) -> List[Tuple[ResolvedRound, Tuple[dict, ...]]]:
    """
    トレースから各ラウンドの確定データ（オプトインの投票）と、記録された実行可能グループを取り出す

    Raises:
        ValueError: NegotiationStarted が無い場合
    """
    params: Optional[ProtocolParams] = None
    roster: List[RosterEntry] = []
    bid_table: Tuple[Bid, ...] = ()
    optin: Dict[Tuple[AgentId, Bid], Vote] = {}
    rounds = []
    for event in events:
        payload = event.payload
        if event.kind == NEGOTIATION_STARTED:
            params = ProtocolParams(p_min=payload["p_min"], max_rounds=payload["max_rounds"])
            roster = [RosterEntry(AgentId(a), int(p)) for a, p in payload["roster"]]
        elif params is None:
            raise ValueError("トレースに NegotiationStarted がありません")
        elif event.kind == AGENT_DROPPED:
            roster = [entry for entry in roster if entry.agent != payload["agent"]]
        elif event.kind == BID_ANNOUNCEMENT:
            bid_table = tuple(Bid(b) for b in payload["bid_table"])
            optin = {}
        elif event.kind == OPTIN_SUBMITTED or (event.kind == DEFAULT_SUBSTITUTED and event.phase == "OptIn"):
            optin[(AgentId(payload["agent"]), Bid(payload["bid"]))] = vote_from_dict(payload["vote"])
        elif event.kind == VIABLE_GROUPS_COMPUTED:
            resolved = ResolvedRound(params, event.round, tuple(roster), bid_table, dict(optin))
            rounds.append((resolved, tuple(payload["groups"])))
        elif event.kind == ROUND_CONTINUED:
            keep = set(payload["agents"])
            roster = [entry for entry in roster if entry.agent in keep]
    return rounds


def load_votes_file(text: str) -> ResolvedRound:
    """
    votes ファイルを ResolvedRound にする

    Raises:
        ScenarioParseError: 文法の誤り
        ScenarioValidationError: テーブルと投票が食い違う場合
    """
    doc = IniDocument(text)
    if "round" not in doc.sections():
        raise ScenarioParseError("[round] セクションがありません", field="[round]")
    p_min = doc.get_int("round", "p_min")
    if p_min is None or p_min < 1:
        raise doc.error("round", "p_min", "1以上の整数が必要です")
    round_index = doc.get_int("round", "round", 1)
    bid_table = tuple(Bid(b) for b in doc.get_tokens("round", "bid_table"))

    roster, votes = [], {}
    for section, agent in agent_sections(doc):
        power = doc.get_int(section, "power")
        if power is None or power < 1:
            raise doc.error(section, "power", "1以上の整数が必要です")
        roster.append(RosterEntry(agent, power))
        agent_votes = parse_vote_list(doc, section, "votes")
        if set(agent_votes) != set(bid_table):
            raise ScenarioValidationError(
                f"{agent} の投票が bid_table と一致しません", invariant="votes_cover_table")
        for bid, vote in agent_votes.items():
            votes[(agent, bid)] = vote
    if len(roster) < 2:
        raise ScenarioValidationError("エージェントは2人以上必要です", invariant="single_agent")
    return ResolvedRound(ProtocolParams(p_min=p_min), round_index, tuple(roster), bid_table, votes)


def analyze_round(round_data: ResolvedRound, engine: str = "pruned",
                  recorded: Optional[Tuple[dict, ...]] = None) -> RoundAnalysis:
    stats = EngineStats()
    groups = tuple(get_engine(engine)(round_data, stats))
    return RoundAnalysis(round_data, groups, recorded, stats)


@log_function_call
def analyze_file(path: str, engine: str = "pruned") -> List[RoundAnalysis]:
    """
    トレースか votes ファイルを読み、ラウンドごとに実行可能グループを計算し直す

    拡張子が .jsonl ならトレースとして扱う。
    """
    text = read_text(path)
    if path.endswith(".jsonl"):
        return [analyze_round(r, engine, recorded) for r, recorded in rounds_from_trace(parse_trace(text))]
    return [analyze_round(load_votes_file(text), engine)]


def groups_table(analyses: Sequence[RoundAnalysis]) -> pd.DataFrame:
    """実行可能グループの一覧（ラウンド・ビッド・メンバー・パワー・各メンバーの窓）"""
    rows = []
    for analysis in analyses:
        for group in analysis.groups:
            rows.append({
                "round": analysis.round.round_index,
                "bid": group.bid,
                "members": " ".join(group.members),
                "power": group.power,
                "windows": " ".join(f"{a}[{lo},{hi}]" for a, (lo, hi) in group.windows.items()),
            })
    return pd.DataFrame(rows, columns=["round", "bid", "members", "power", "windows"])


def engines_agree(round_data: ResolvedRound) -> bool:
    """naive と pruned が同じ結果を返すか"""
    naive = [g.key for g in get_engine("naive")(round_data)]
    pruned = [g.key for g in get_engine("pruned")(round_data)]
    return naive == pruned
