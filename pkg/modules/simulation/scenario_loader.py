# modules/simulation/scenario_loader.py
"""
シナリオファイルの読み込みと検証

`key = value` 形式のセクション付きテキスト（configparser で読める INI 形式）を
Scenario に変換する。文法は docs/scenario_format.md を参照。

    [scenario]
    name = s3
    p_min = 2
    policy = one
    bid_space = b1, b2

    [agent A1]
    power = 2
    strategy = scripted
    r1.bid = b1
    r1.votes = b1:accept(2,4), b2:accept(2,2)

同じ文法の部品（パラメータ・投票リスト）はセッションファイルと votes ファイルでも使う。
"""
import configparser
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

from modules.agents.factory import STRATEGY_KINDS
from modules.agents.scripted import RoundScript
from modules.agents.views import PreferenceProfile, WindowRule
from modules.protocol.errors import ProtocolError, ScenarioParseError, ScenarioValidationError
from modules.protocol.negotiation import new_negotiation
from modules.protocol.types import (
    REJECT, Accept, AgentId, Bid, ProtocolParams, TerminationPolicy, Vote,
)
from modules.utils.file_utils import read_text
from modules.utils.logger_utils import get_logger, log_function_call

logger = get_logger(__name__)

TOKEN_PATTERN = re.compile(r"^[A-Za-z0-9_.\-]+$")
SECTION_LINE = re.compile(r"^\s*\[(?P<name>[^\]]+)\]")
KEY_LINE = re.compile(r"^\s*(?P<key>[^=#;\s\[][^=]*?)\s*=")
VOTE_ITEM = re.compile(
    r"\s*(?P<bid>[^\s:,]+)\s*:\s*(?:(?P<reject>reject)|accept\s*\(\s*(?P<c_min>-?\d+)\s*,\s*(?P<c_max>-?\d+)\s*\))\s*(?:,|$)",
    re.IGNORECASE,
)
SCRIPT_KEY = re.compile(r"^r(?P<round>\d+)\.(?P<field>bid|votes|optin)$")
FIXED_WINDOW = re.compile(r"^fixed\s*\(\s*(?P<lo>[^,\s]+)\s*,\s*(?P<hi>[^)\s]+)\s*\)$", re.IGNORECASE)


@dataclass(frozen=True)
class AgentSpec:
    """シナリオ内の1エージェント（ID・パワー・戦略設定）"""
    agent_id: AgentId
    power: int
    kind: str
    config: Dict[str, Any] = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class Scenario:
    name: str
    params: ProtocolParams
    agents: Tuple[AgentSpec, ...]
    bid_space: Tuple[Bid, ...] = ()
    seed: Optional[int] = None

    @property
    def roster(self) -> List[Tuple[AgentId, int]]:
        return [(spec.agent_id, spec.power) for spec in self.agents]

    def agent(self, agent_id: str) -> AgentSpec:
        for spec in self.agents:
            if spec.agent_id == agent_id:
                return spec
        raise KeyError(agent_id)


class IniDocument:
    """
    configparser で読んだ文書と、(セクション, キー) -> 行番号 の対応表

    configparser は値の行番号を保持しないので、エラー表示用に元テキストを別途走査する。
    """

    def __init__(self, text: str):
        self.parser = configparser.ConfigParser(
            interpolation=None,
            delimiters=("=",),
            comment_prefixes=("#", ";"),
            inline_comment_prefixes=("#",),
            strict=True,
            default_section="__defaults__",
        )
        self.parser.optionxform = str
        self.lines: Dict[Tuple[str, Optional[str]], int] = {}
        self._index_lines(text)
        try:
            self.parser.read_string(text)
        except configparser.MissingSectionHeaderError as e:
            raise ScenarioParseError("セクション見出しの前に行があります", line=e.lineno) from e
        except configparser.ParsingError as e:
            line = e.errors[0][0] if e.errors else None
            raise ScenarioParseError("`key = value` の形式ではない行があります", line=line) from e
        except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as e:
            raise ScenarioParseError(f"重複しています: {e.message}", line=e.lineno) from e
        except configparser.Error as e:
            raise ScenarioParseError(str(e)) from e

    def _index_lines(self, text: str) -> None:
        section = None
        for number, raw in enumerate(text.splitlines(), start=1):
            match = SECTION_LINE.match(raw)
            if match:
                section = match.group("name").strip()
                self.lines.setdefault((section, None), number)
                continue
            match = KEY_LINE.match(raw)
            if match and section is not None:
                self.lines.setdefault((section, match.group("key").strip()), number)

    def sections(self) -> List[str]:
        return self.parser.sections()

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def keys(self, section: str) -> List[str]:
        return list(self.parser[section].keys())

    def line_of(self, section: str, key: Optional[str] = None) -> Optional[int]:
        return self.lines.get((section, key)) or self.lines.get((section, None))

    def error(self, section: str, key: Optional[str], message: str) -> ScenarioParseError:
        field_name = f"[{section}] {key}" if key else f"[{section}]"
        logger.error(f"シナリオ解析エラー: {field_name}: {message}")
        return ScenarioParseError(message, line=self.line_of(section, key), field=field_name)

    def get(self, section: str, key: str, default: Optional[str] = None) -> Optional[str]:
        if not self.has(section, key):
            return default
        return self.parser.get(section, key).strip()

    def require(self, section: str, key: str) -> str:
        value = self.get(section, key)
        if value is None or value == "":
            raise self.error(section, key, "必須の項目がありません")
        return value

    def get_int(self, section: str, key: str, default: Optional[int] = None) -> Optional[int]:
        value = self.get(section, key)
        if value is None:
            return default
        try:
            return int(value)
        except ValueError:
            raise self.error(section, key, f"整数ではありません: {value}") from None

    def get_float(self, section: str, key: str, default: Optional[float] = None) -> Optional[float]:
        value = self.get(section, key)
        if value is None:
            return default
        try:
            return float(value)
        except ValueError:
            raise self.error(section, key, f"数値ではありません: {value}") from None

    def get_fraction(self, section: str, key: str, default: Fraction) -> Fraction:
        value = self.get(section, key)
        if value is None:
            return default
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError):
            raise self.error(section, key, f"有理数ではありません: {value}") from None

    def get_tokens(self, section: str, key: str) -> Tuple[str, ...]:
        value = self.get(section, key)
        if not value:
            return ()
        tokens = tuple(token.strip() for token in value.split(","))
        for token in tokens:
            if not TOKEN_PATTERN.match(token):
                raise self.error(section, key, f"トークンが不正です: '{token}'")
        if len(set(tokens)) != len(tokens):
            raise self.error(section, key, "同じトークンが重複しています")
        return tokens


def parse_vote_list(doc: IniDocument, section: str, key: str) -> Dict[Bid, Vote]:
    """`b1:accept(2,4), b2:reject` を {ビッド: 投票} にする（書かれた順を保つ）"""
    text = doc.get(section, key) or ""
    votes: Dict[Bid, Vote] = {}
    position = 0
    while position < len(text):
        match = VOTE_ITEM.match(text, position)
        if not match or match.end() == position:
            raise doc.error(section, key, f"投票の書式が不正です: '{text[position:].strip()}'")
        bid = Bid(match.group("bid"))
        if bid in votes:
            raise doc.error(section, key, f"同じビッドへの投票が重複しています: {bid}")
        if match.group("reject"):
            votes[bid] = REJECT
        else:
            votes[bid] = Accept(int(match.group("c_min")), int(match.group("c_max")))
        position = match.end()
    return votes


def parse_policy(doc: IniDocument, section: str, key: str = "policy") -> TerminationPolicy:
    value = doc.get(section, key, "one")
    try:
        return TerminationPolicy.parse(value)
    except ValueError:
        raise doc.error(section, key, f"終了方式は one / two です: {value}") from None


def parse_params(doc: IniDocument, section: str) -> Tuple[ProtocolParams, Optional[int]]:
    """
    p_min / max_rounds / policy / seed を ProtocolParams にする

    Returns:
        (ProtocolParams, seed): seed はファイルに書かれていなければNone（params 側は0）
    """
    p_min = doc.get_int(section, "p_min")
    if p_min is None:
        raise doc.error(section, "p_min", "必須の項目がありません")
    if p_min < 1:
        raise doc.error(section, "p_min", f"1以上が必要です: {p_min}")
    max_rounds = doc.get_int(section, "max_rounds", 1)
    if max_rounds < 1:
        raise doc.error(section, "max_rounds", f"1以上が必要です: {max_rounds}")
    seed = doc.get_int(section, "seed")
    if seed is not None and not 0 <= seed < 2 ** 64:
        raise doc.error(section, "seed", f"64bit符号なし整数が必要です: {seed}")
    params = ProtocolParams(
        p_min=p_min,
        max_rounds=max_rounds,
        termination_policy=parse_policy(doc, section),
        rng_seed=seed or 0,
    )
    return params, seed


def agent_sections(doc: IniDocument) -> List[Tuple[str, AgentId]]:
    """`[agent XXX]` セクションを (セクション名, エージェントID) の並びで返す"""
    found = []
    for section in doc.sections():
        head, _, rest = section.partition(" ")
        if head != "agent":
            continue
        agent_id = rest.strip()
        if not TOKEN_PATTERN.match(agent_id):
            raise doc.error(section, None, f"エージェントIDが不正です: '{agent_id}'")
        found.append((section, AgentId(agent_id)))
    return found


def _parse_window(doc: IniDocument, section: str) -> WindowRule:
    value = (doc.get(section, "window") or "full").strip()
    if value.lower() == "full":
        return WindowRule.full_range()
    if value.lower() == "majority":
        return WindowRule.majority_floor()
    match = FIXED_WINDOW.match(value)
    if match:
        try:
            return WindowRule.fixed_window(Fraction(match.group("lo")), Fraction(match.group("hi")))
        except (ValueError, ZeroDivisionError) as e:
            raise doc.error(section, "window", str(e)) from None
    raise doc.error(section, "window", f"full / majority / fixed(lo,hi) のいずれかです: {value}")


def _parse_utilities(doc: IniDocument, section: str) -> Dict[Bid, Fraction]:
    text = doc.get(section, "utilities") or ""
    utilities: Dict[Bid, Fraction] = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        bid, sep, value = item.partition(":")
        bid = bid.strip()
        if not sep or not TOKEN_PATTERN.match(bid):
            raise doc.error(section, "utilities", f"`ビッド:効用` の形式ではありません: '{item}'")
        try:
            utilities[Bid(bid)] = Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise doc.error(section, "utilities", f"効用が有理数ではありません: '{item}'") from None
    return utilities


def _parse_scripted(doc: IniDocument, section: str) -> Dict[str, Any]:
    rounds: Dict[int, Dict[str, Any]] = {}
    for key in doc.keys(section):
        match = SCRIPT_KEY.match(key)
        if not match:
            continue
        round_index = int(match.group("round"))
        if round_index < 1:
            raise doc.error(section, key, "ラウンド番号は1から始まります")
        entry = rounds.setdefault(round_index, {})
        if match.group("field") == "bid":
            bid = doc.require(section, key)
            if not TOKEN_PATTERN.match(bid):
                raise doc.error(section, key, f"ビッドが不正です: '{bid}'")
            entry["bid"] = Bid(bid)
        else:
            entry[match.group("field")] = parse_vote_list(doc, section, key)
    return {"rounds": {index: RoundScript(**entry) for index, entry in sorted(rounds.items())}}


def _parse_utility(doc: IniDocument, section: str) -> Dict[str, Any]:
    try:
        profile = PreferenceProfile(
            utilities=_parse_utilities(doc, section),
            reservation=doc.get_fraction(section, "reservation", Fraction(1, 2)),
            window_rule=_parse_window(doc, section),
        )
    except ValueError as e:
        raise doc.error(section, None, str(e)) from None
    return {"profile": profile}


def _parse_random(doc: IniDocument, section: str) -> Dict[str, Any]:
    probability = doc.get_float(section, "accept_probability", 0.5)
    if not 0.0 <= probability <= 1.0:
        raise doc.error(section, "accept_probability", f"0〜1の範囲です: {probability}")
    return {"seed": doc.get_int(section, "seed"), "accept_probability": probability}


STRATEGY_PARSERS = {
    "scripted": _parse_scripted,
    "utility": _parse_utility,
    "random": _parse_random,
}


def _mentioned_bids(spec: AgentSpec) -> List[Bid]:
    bids: List[Bid] = []
    if spec.kind == "scripted":
        for script in spec.config["rounds"].values():
            if script.bid is not None:
                bids.append(script.bid)
            for votes in (script.votes, script.optin):
                bids.extend(votes or {})
    elif spec.kind == "utility":
        bids.extend(spec.config["profile"].utilities)
    return bids


def _validate(scenario: Scenario) -> None:
    try:
        new_negotiation(scenario.roster, scenario.params)
    except ProtocolError as e:
        logger.error(f"シナリオ検証エラー: {e}")
        raise ScenarioValidationError(str(e), invariant=e.code) from e

    space = set(scenario.bid_space)
    for spec in scenario.agents:
        if spec.kind == "scripted":
            beyond = sorted(r for r in spec.config["rounds"] if r > scenario.params.max_rounds)
            if beyond:
                raise ScenarioValidationError(
                    f"max_rounds={scenario.params.max_rounds} を超えるラウンドの台本があります: "
                    f"{spec.agent_id}: {beyond}", invariant="script_beyond_max_rounds")
        if spec.kind == "random" and not scenario.bid_space:
            raise ScenarioValidationError(
                f"ランダム戦略には bid_space が必要です: {spec.agent_id}", invariant="bid_space_required")
        if spec.kind == "utility" and not scenario.bid_space and not spec.config["profile"].utilities:
            raise ScenarioValidationError(
                f"効用戦略には bid_space か utilities が必要です: {spec.agent_id}", invariant="bid_space_required")
        if not space:
            continue
        unknown = [bid for bid in _mentioned_bids(spec) if bid not in space]
        if unknown:
            raise ScenarioValidationError(
                f"bid_space に無いビッドを参照しています: {spec.agent_id}: {', '.join(sorted(set(unknown)))}",
                invariant="referential_integrity",
            )


@log_function_call
def load_scenario(text: str) -> Scenario:
    """
    シナリオのテキストを読み込み、検証済みの Scenario を返す

    Args:
        text: シナリオファイルの内容

    Returns:
        Scenario: 検証済みのシナリオ

    Raises:
        ScenarioParseError: 文法・値の形式の誤り（行番号と項目名つき）
        ScenarioValidationError: プロトコルの前提条件や参照整合性の違反
    """
    doc = IniDocument(text)
    if "scenario" not in doc.sections():
        raise ScenarioParseError("[scenario] セクションがありません", field="[scenario]")

    params, seed = parse_params(doc, "scenario")
    bid_space = tuple(Bid(token) for token in doc.get_tokens("scenario", "bid_space"))

    specs = []
    for section, agent_id in agent_sections(doc):
        power = doc.get_int(section, "power")
        if power is None:
            raise doc.error(section, "power", "必須の項目がありません")
        kind = (doc.get(section, "strategy") or "").lower()
        if kind not in STRATEGY_PARSERS:
            raise doc.error(section, "strategy", f"不明な戦略です: '{kind}' ({' / '.join(STRATEGY_KINDS)})")
        config = STRATEGY_PARSERS[kind](doc, section)
        specs.append(AgentSpec(agent_id, power, kind, config))

    unknown_sections = [s for s in doc.sections() if s != "scenario" and not s.startswith("agent ")]
    if unknown_sections:
        raise doc.error(unknown_sections[0], None, "不明なセクションです")

    scenario = Scenario(
        name=doc.get("scenario", "name") or "scenario",
        params=params,
        agents=tuple(specs),
        bid_space=bid_space,
        seed=seed,
    )
    _validate(scenario)
    logger.info(f"シナリオを読み込みました: {scenario.name} ({len(specs)}エージェント)")
    return scenario


def load_scenario_file(path: str) -> Scenario:
    """ファイルからシナリオを読み込む"""
    return load_scenario(read_text(path))
