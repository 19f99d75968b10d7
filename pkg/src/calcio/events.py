"""Typed match-event logs: parsing, serialization and consistency checks.

The canonical input is a pair of files: an event log (one record per
minute-stamped event) and a metadata sidecar (one record per match).
Both exist in JSONL and CSV flavors carrying exactly the same fields.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .errors import DuplicateEventKey, MalformedRecord, MissingLineup, UnknownMatchId


class Side(Enum):
    HOME = "H"
    AWAY = "A"
    NONE = "-"


class EventKind(Enum):
    CROSS = "CROSS"
    CORNER = "CORNER"
    SHOT = "SHOT"
    GOAL_KICK = "GOAL_KICK"
    OFFSIDE = "OFFSIDE"
    GOAL = "GOAL"
    OWN_GOAL = "OWN_GOAL"
    SUBSTITUTION = "SUBSTITUTION"
    FOUL = "FOUL"
    FREE_KICK = "FREE_KICK"
    PENALTY_KICK = "PENALTY_KICK"
    YELLOW_CARD = "YELLOW_CARD"
    RED_CARD = "RED_CARD"
    FORMATION_CHANGE = "FORMATION_CHANGE"


class Role(Enum):
    DEFENDER = "D"
    MIDFIELDER = "M"
    FORWARD = "F"
    # Not an outfield role; carried on red cards so dismissals of keepers
    # are representable (they do not touch the outfield scheme index).
    GOALKEEPER = "G"


#: outfield role -> weight used by the offensiveness index
ROLE_WEIGHT = {Role.DEFENDER: 1, Role.MIDFIELDER: 2, Role.FORWARD: 3}

Formation = tuple[int, int, int]


def parse_formation(text: str) -> Formation:
    parts = text.split("-")
    if len(parts) != 3:
        raise ValueError(f"formation {text!r} is not 'D-M-F'")
    d, m, f = (int(p) for p in parts)
    if d < 0 or m < 0 or f < 0 or d + m + f != 10:
        raise ValueError(f"formation {text!r} does not describe 10 outfield players")
    return (d, m, f)


def format_formation(formation: Formation) -> str:
    return "-".join(str(x) for x in formation)


@dataclass(frozen=True, order=True)
class RawEvent:
    """One minute-stamped event inside a match.

    ``minute_in_half`` counts from 1 within each half; values of 45 and
    beyond denote stoppage time for either half.
    """

    match_id: str
    half: int
    minute_in_half: int
    event_seq: int
    team_side: Side = field(compare=False)
    kind: EventKind = field(compare=False)
    formation: Formation | None = field(default=None, compare=False)
    carded_player_role: Role | None = field(default=None, compare=False)

    def key(self) -> tuple[str, int, int, int]:
        return (self.match_id, self.half, self.minute_in_half, self.event_seq)


@dataclass(frozen=True)
class MatchMeta:
    match_id: str
    season: int
    scheduled_league_day: int
    actual_date: dt.date
    home_team: str
    away_team: str
    home_coach: str
    away_coach: str
    referee: str
    attendance: int
    capacity: int
    extra_time_1: int
    extra_time_2: int
    initial_formation_home: Formation
    initial_formation_away: Formation
    # Optional official final score, used only for cross-checks.
    home_score: int | None = None
    away_score: int | None = None


EVENT_FIELDS = ("match_id", "half", "minute", "seq", "side", "kind", "formation", "role")
META_FIELDS = (
    "match_id",
    "season",
    "league_day",
    "date",
    "home",
    "away",
    "home_coach",
    "away_coach",
    "referee",
    "attendance",
    "capacity",
    "et1",
    "et2",
    "lineup_home",
    "lineup_away",
    "score_home",
    "score_away",
)


def _read_text(stream) -> str:
    if isinstance(stream, bytes):
        return stream.decode("utf-8")
    if isinstance(stream, str):
        return stream
    data = stream.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def _iter_records(text: str, fmt: str) -> Iterable[tuple[int, dict]]:
    fmt = fmt.upper()
    if fmt == "JSONL":
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(lineno, f"invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise MalformedRecord(lineno, "record is not an object")
            yield lineno, obj
    elif fmt == "CSV":
        reader = csv.DictReader(io.StringIO(text))
        for lineno, row in enumerate(reader, start=2):
            yield lineno, {k: v for k, v in row.items() if v not in (None, "")}
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _event_from_record(lineno: int, rec: dict) -> RawEvent:
    try:
        kind = EventKind(str(rec["kind"]))
        side = Side(str(rec.get("side", "-")))
        half = int(rec["half"])
        minute = int(rec["minute"])
        seq = int(rec["seq"])
        match_id = str(rec["match_id"])
    except KeyError as exc:
        raise MalformedRecord(lineno, f"missing field {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise MalformedRecord(lineno, str(exc)) from exc
    if half not in (1, 2):
        raise MalformedRecord(lineno, f"half must be 1 or 2, got {half}")
    if minute < 1:
        raise MalformedRecord(lineno, f"minute must be >= 1, got {minute}")
    if seq < 1:
        raise MalformedRecord(lineno, f"seq must be >= 1, got {seq}")
    formation = None
    if rec.get("formation"):
        try:
            formation = parse_formation(str(rec["formation"]))
        except ValueError as exc:
            raise MalformedRecord(lineno, str(exc)) from exc
    role = None
    if rec.get("role"):
        try:
            role = Role(str(rec["role"]))
        except ValueError as exc:
            raise MalformedRecord(lineno, f"unknown role {rec['role']!r}") from exc
    if kind is EventKind.FORMATION_CHANGE and formation is None:
        raise MalformedRecord(lineno, "FORMATION_CHANGE requires a formation")
    if kind is EventKind.RED_CARD and role is None:
        raise MalformedRecord(lineno, "RED_CARD requires a carded player role")
    return RawEvent(match_id, half, minute, seq, side, kind, formation, role)


def _meta_from_record(lineno: int, rec: dict) -> MatchMeta:
    try:
        meta = MatchMeta(
            match_id=str(rec["match_id"]),
            season=int(rec["season"]),
            scheduled_league_day=int(rec["league_day"]),
            actual_date=dt.date.fromisoformat(str(rec["date"])),
            home_team=str(rec["home"]),
            away_team=str(rec["away"]),
            home_coach=str(rec.get("home_coach", "")),
            away_coach=str(rec.get("away_coach", "")),
            referee=str(rec.get("referee", "")),
            attendance=int(rec["attendance"]),
            capacity=int(rec["capacity"]),
            extra_time_1=int(rec["et1"]),
            extra_time_2=int(rec["et2"]),
            initial_formation_home=parse_formation(str(rec["lineup_home"])),
            initial_formation_away=parse_formation(str(rec["lineup_away"])),
            home_score=int(rec["score_home"]) if rec.get("score_home") not in (None, "") else None,
            away_score=int(rec["score_away"]) if rec.get("score_away") not in (None, "") else None,
        )
    except KeyError as exc:
        raise MalformedRecord(lineno, f"missing field {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise MalformedRecord(lineno, str(exc)) from exc
    if meta.capacity <= 0:
        raise MalformedRecord(lineno, "capacity must be positive")
    if not 0 <= meta.attendance <= meta.capacity:
        raise MalformedRecord(lineno, "attendance must lie in [0, capacity]")
    if meta.extra_time_1 < 0 or meta.extra_time_2 < 0 or meta.extra_time_1 + meta.extra_time_2 > 15:
        raise MalformedRecord(lineno, "extra time must be nonnegative with et1+et2 <= 15")
    return meta


def parse_event_log(event_stream, meta_stream, fmt: str = "JSONL") -> tuple[list[RawEvent], list[MatchMeta]]:
    """Parse an event log plus its metadata sidecar.

    Returns events sorted by (match_id, half, minute, seq) and metas sorted
    by match_id; the output is independent of input record order. Unknown
    fields are ignored. Duplicate event keys and events referencing an
    absent match are rejected.
    """
    metas = [_meta_from_record(lineno, rec) for lineno, rec in _iter_records(_read_text(meta_stream), fmt)]
    by_id: dict[str, MatchMeta] = {}
    for meta in metas:
        if meta.match_id in by_id:
            raise DuplicateEventKey(f"duplicate match metadata for {meta.match_id!r}")
        by_id[meta.match_id] = meta

    events = []
    seen: set[tuple[str, int, int, int]] = set()
    for lineno, rec in _iter_records(_read_text(event_stream), fmt):
        event = _event_from_record(lineno, rec)
        if event.match_id not in by_id:
            raise UnknownMatchId(f"event at line {lineno} references unknown match {event.match_id!r}")
        if event.key() in seen:
            raise DuplicateEventKey(f"duplicate event key {event.key()}")
        seen.add(event.key())
        events.append(event)

    for meta in metas:
        if meta.initial_formation_home is None or meta.initial_formation_away is None:
            raise MissingLineup(meta.match_id)

    events.sort()
    metas.sort(key=lambda m: m.match_id)
    return events, metas


def _event_to_record(event: RawEvent) -> dict:
    rec = {
        "match_id": event.match_id,
        "half": event.half,
        "minute": event.minute_in_half,
        "seq": event.event_seq,
        "side": event.team_side.value,
        "kind": event.kind.value,
    }
    if event.formation is not None:
        rec["formation"] = format_formation(event.formation)
    if event.carded_player_role is not None:
        rec["role"] = event.carded_player_role.value
    return rec


def _meta_to_record(meta: MatchMeta) -> dict:
    rec = {
        "match_id": meta.match_id,
        "season": meta.season,
        "league_day": meta.scheduled_league_day,
        "date": meta.actual_date.isoformat(),
        "home": meta.home_team,
        "away": meta.away_team,
        "home_coach": meta.home_coach,
        "away_coach": meta.away_coach,
        "referee": meta.referee,
        "attendance": meta.attendance,
        "capacity": meta.capacity,
        "et1": meta.extra_time_1,
        "et2": meta.extra_time_2,
        "lineup_home": format_formation(meta.initial_formation_home),
        "lineup_away": format_formation(meta.initial_formation_away),
    }
    if meta.home_score is not None:
        rec["score_home"] = meta.home_score
    if meta.away_score is not None:
        rec["score_away"] = meta.away_score
    return rec


def serialize_events(events: Sequence[RawEvent], fmt: str = "JSONL") -> str:
    records = [_event_to_record(e) for e in sorted(events)]
    return _serialize(records, EVENT_FIELDS[: 8], fmt)


def serialize_metas(metas: Sequence[MatchMeta], fmt: str = "JSONL") -> str:
    records = [_meta_to_record(m) for m in sorted(metas, key=lambda m: m.match_id)]
    return _serialize(records, META_FIELDS, fmt)


def _serialize(records: list[dict], fields: Sequence[str], fmt: str) -> str:
    fmt = fmt.upper()
    if fmt == "JSONL":
        return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in records)
    if fmt == "CSV":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
        writer.writeheader()
        for rec in records:
            writer.writerow(rec)
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}")


# --- validation -------------------------------------------------------------

SEVERITIES = ("INFO", "WARN", "ERROR")


@dataclass(frozen=True)
class ValidationEntry:
    severity: str
    match_id: str
    message: str


@dataclass
class ValidationReport:
    entries: list[ValidationEntry] = field(default_factory=list)
    event_counts: dict[str, int] = field(default_factory=dict)

    def add(self, severity: str, match_id: str, message: str) -> None:
        assert severity in SEVERITIES
        self.entries.append(ValidationEntry(severity, match_id, message))

    def count(self, severity: str) -> int:
        return sum(1 for e in self.entries if e.severity == severity)

    @property
    def n_errors(self) -> int:
        return self.count("ERROR")

    @property
    def n_warnings(self) -> int:
        return self.count("WARN")


def validate_log(events: Sequence[RawEvent], metas: Sequence[MatchMeta]) -> ValidationReport:
    """Cross-check a parsed log; report-only, never raises.

    Per match: event counts, goal totals against the official score when
    present, red-card sanity (role present, at most four dismissals per
    side), formation sums, and event-sequence contiguity.
    """
    report = ValidationReport()
    by_match: dict[str, list[RawEvent]] = {m.match_id: [] for m in metas}
    for event in events:
        by_match.setdefault(event.match_id, []).append(event)

    for meta in sorted(metas, key=lambda m: m.match_id):
        evs = sorted(by_match.get(meta.match_id, []))
        report.event_counts[meta.match_id] = len(evs)
        report.add("INFO", meta.match_id, f"{len(evs)} events")

        goals = {Side.HOME: 0, Side.AWAY: 0}
        reds = {Side.HOME: 0, Side.AWAY: 0}
        for ev in evs:
            if ev.kind is EventKind.GOAL and ev.team_side in goals:
                goals[ev.team_side] += 1
            elif ev.kind is EventKind.OWN_GOAL and ev.team_side in goals:
                # scored by ev.team_side, credited to the opponent
                other = Side.AWAY if ev.team_side is Side.HOME else Side.HOME
                goals[other] += 1
            elif ev.kind is EventKind.RED_CARD and ev.team_side in reds:
                reds[ev.team_side] += 1
                if ev.carded_player_role is None:
                    report.add(
                        "ERROR",
                        meta.match_id,
                        "RED_CARD without carded player role; the dismissal-adjusted "
                        "scheme index is undefined for this match",
                    )
                elif ev.carded_player_role is Role.GOALKEEPER:
                    report.add(
                        "INFO",
                        meta.match_id,
                        "goalkeeper sent off; outfield scheme indices are unchanged",
                    )
            if ev.formation is not None and sum(ev.formation) != 10:
                report.add("ERROR", meta.match_id, "formation does not sum to 10")
            half_limit = 45 + (meta.extra_time_1 if ev.half == 1 else meta.extra_time_2)
            if ev.minute_in_half > half_limit:
                report.add(
                    "WARN",
                    meta.match_id,
                    f"event at half {ev.half} minute {ev.minute_in_half} beyond declared "
                    f"extra time ({half_limit}); it will fold into the stoppage bin",
                )

        for lineup in (meta.initial_formation_home, meta.initial_formation_away):
            if sum(lineup) != 10:
                report.add("ERROR", meta.match_id, "formation does not sum to 10")

        for side, n_red in reds.items():
            if n_red > 4:
                report.add("ERROR", meta.match_id, f"{n_red} red cards for {side.name} leave fewer than 7 players")

        if meta.home_score is not None and meta.away_score is not None:
            if (goals[Side.HOME], goals[Side.AWAY]) != (meta.home_score, meta.away_score):
                report.add(
                    "ERROR",
                    meta.match_id,
                    f"goal events give {goals[Side.HOME]}-{goals[Side.AWAY]} but the "
                    f"official score is {meta.home_score}-{meta.away_score}",
                )

        seqs: dict[tuple[int, int], list[int]] = {}
        for ev in evs:
            seqs.setdefault((ev.half, ev.minute_in_half), []).append(ev.event_seq)
        for (half, minute), values in seqs.items():
            if sorted(values) != list(range(1, len(values) + 1)):
                report.add(
                    "ERROR",
                    meta.match_id,
                    f"event sequence within half {half} minute {minute} is not contiguous from 1",
                )

    return report


def final_score(events: Sequence[RawEvent]) -> tuple[int, int]:
    """Full-time (home, away) goal totals with own goals credited to the opponent."""
    home = away = 0
    for ev in events:
        if ev.kind is EventKind.GOAL:
            if ev.team_side is Side.HOME:
                home += 1
            elif ev.team_side is Side.AWAY:
                away += 1
        elif ev.kind is EventKind.OWN_GOAL:
            if ev.team_side is Side.HOME:
                away += 1
            elif ev.team_side is Side.AWAY:
                home += 1
    return home, away
