"""Cross-sectional match records: responses, scheme indices, action
aggregates (raw and intensity-weighted), controls, standings and fixed
effects.

Column names follow the coded-variable convention of the exported
cross-sectional dataset (Y1..Y3, X1I..X3wFa, W1..W8Wa, Z1..Z5Wa, EXR*,
MET*, RP_*, DUM_*, SEASON_*, H_<team>).
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import EmptyMatch, InvalidFormation, MissingCardedRole, MissingStandings
from .events import Formation, MatchMeta
from .panel import MinutePanel, weighted_extra_time

DEFAULT_REFERENCE_TEAM = "Juventus"

#: goal-difference magnitude that marks a match as extreme
EXTREME_GOAL_DIFF = 5

# w-index -> per-minute count field; w4 (crosses not from corners) is derived
W_FIELDS = {
    1: "cross",
    2: "corner",
    3: "cross_from_corner",
    5: "corner_no_cross",
    6: "shot",
    7: "goal_kick",
    8: "offside",
}
Z_FIELDS = {1: "yellow", 2: "red", 3: "free_kick", 4: "penalty", 5: "foul"}


def offensiveness_index(formation: Formation) -> int:
    """Weighted head-count of outfield roles: defenders 1, midfielders 2, forwards 3."""
    d, m, f = formation
    if d < 0 or m < 0 or f < 0 or d + m + f != 10:
        raise InvalidFormation(f"{formation} does not describe 10 outfield players")
    return d + 2 * m + 3 * f


@dataclass
class SchemeSeries:
    """Per-minute scheme indices for one match, minutes 1..90.

    ``s1`` ignores dismissals, ``s2`` subtracts the role weight of each
    dismissed outfield player, ``s3`` rescales ``s2`` by the active outfield
    count into [0, 1].
    """

    home_s1: np.ndarray
    home_s2: np.ndarray
    home_s3: np.ndarray
    away_s1: np.ndarray
    away_s2: np.ndarray
    away_s3: np.ndarray

    def diff(self, which: int) -> np.ndarray:
        return getattr(self, f"home_s{which}") - getattr(self, f"away_s{which}")


def scheme_series(panel: MinutePanel) -> SchemeSeries:
    """Compute the three per-minute scheme indices for both sides."""
    n = len(panel.rows)
    arrays = {name: np.empty(n) for name in ("home_s1", "home_s2", "home_s3", "away_s1", "away_s2", "away_s3")}
    for i, row in enumerate(panel.rows):
        if row.home.red != len(row.home_red_roles) or row.away.red != len(row.away_red_roles):
            raise MissingCardedRole(
                f"{panel.match_id}: red card at minute {row.t} lacks the player's role"
            )
        for prefix, counts, state in (("home", row.home, row.home_state), ("away", row.away, row.away_state)):
            s1 = float(offensiveness_index(state.formation))
            s2 = s1 - state.dismissed_weight
            active = state.active_outfield
            s3 = (s2 / active) * (10.0 / 30.0) if active > 0 else 0.0
            arrays[f"{prefix}_s1"][i] = s1
            arrays[f"{prefix}_s2"][i] = s2
            arrays[f"{prefix}_s3"][i] = s3
    return SchemeSeries(**arrays)


def league_day_rank(dates: Sequence[dt.date]) -> tuple[list[int], list[float]]:
    """Dense rank of actual match dates plus the [0, 1]-scaled version."""
    if not dates:
        raise ValueError("empty date list")
    distinct = sorted(set(dates))
    rank_of = {d: r for r, d in enumerate(distinct, start=1)}
    max_rank = len(distinct)
    ranks = [rank_of[d] for d in dates]
    if max_rank == 1:
        scaled = [0.0 for _ in dates]
    else:
        scaled = [(r - 1) / (max_rank - 1) for r in ranks]
    return ranks, scaled


@dataclass(frozen=True)
class MatchOutcome:
    season: int
    date: dt.date
    home_team: str
    away_team: str
    home_goals: int
    away_goals: int


def match_outcome(panel: MinutePanel) -> MatchOutcome:
    home = sum(r.home.goal for r in panel.rows) + sum(r.away.own_goal for r in panel.rows)
    away = sum(r.away.goal for r in panel.rows) + sum(r.home.own_goal for r in panel.rows)
    meta = panel.meta
    return MatchOutcome(meta.season, meta.actual_date, meta.home_team, meta.away_team, home, away)


@dataclass
class StandingsTable:
    """Cumulative league points per (season, team) entering each match date.

    Points accrue 3/1/0 in actual-date order. Snapshots record the state
    strictly before each ranked date, so day-1 queries return zero points.
    """

    # season -> ordered distinct dates
    dates: dict[int, list[dt.date]] = field(default_factory=dict)
    # season -> rank (1-based) -> team -> (points, matches_played), state before that date
    before: dict[int, list[dict[str, tuple[int, int]]]] = field(default_factory=dict)
    team_names: dict[int, list[str]] = field(default_factory=dict)

    def seasons(self) -> list[int]:
        return sorted(self.dates)

    def teams(self, season: int) -> list[str]:
        return self.team_names[season]

    def date_rank(self, season: int, date: dt.date) -> int:
        try:
            return self.dates[season].index(date) + 1
        except (KeyError, ValueError):
            raise MissingStandings(f"season {season}, date {date}") from None

    def relative_date(self, season: int, date: dt.date) -> float:
        rank = self.date_rank(season, date)
        n = len(self.dates[season])
        return 0.0 if n == 1 else (rank - 1) / (n - 1)

    def points_before(self, season: int, team: str, date: dt.date) -> tuple[int, int]:
        rank = self.date_rank(season, date)
        snapshot = self.before[season][rank - 1]
        return snapshot.get(team, (0, 0))


def compute_standings(outcomes: Iterable[MatchOutcome]) -> StandingsTable:
    """Accumulate 3/1/0 points in actual-date order, one ledger per season."""
    table = StandingsTable()
    by_season: dict[int, list[MatchOutcome]] = {}
    for outcome in outcomes:
        by_season.setdefault(outcome.season, []).append(outcome)

    for season, season_outcomes in sorted(by_season.items()):
        distinct = sorted({o.date for o in season_outcomes})
        table.dates[season] = distinct
        teams = sorted({o.home_team for o in season_outcomes} | {o.away_team for o in season_outcomes})
        table.team_names[season] = teams
        running = {team: (0, 0) for team in teams}
        snapshots: list[dict[str, tuple[int, int]]] = []
        by_date: dict[dt.date, list[MatchOutcome]] = {}
        for o in season_outcomes:
            by_date.setdefault(o.date, []).append(o)
        for date in distinct:
            snapshots.append(dict(running))
            for o in by_date[date]:
                if o.home_goals > o.away_goals:
                    ph, pa = 3, 0
                elif o.home_goals < o.away_goals:
                    ph, pa = 0, 3
                else:
                    ph, pa = 1, 1
                hp, hm = running[o.home_team]
                ap, am = running[o.away_team]
                running[o.home_team] = (hp + ph, hm + 1)
                running[o.away_team] = (ap + pa, am + 1)
        table.before[season] = snapshots
    return table


@dataclass
class MatchRecord:
    """One cross-sectional row; coded variables live in ``values``."""

    match_id: str
    season: int
    league_day: int
    date: dt.date
    home_team: str
    away_team: str
    y1: int
    y2: int
    y3: int
    values: dict[str, float]

    def __getitem__(self, key: str) -> float:
        return self.values[key]


def _relative_points(points: int, played: int) -> float:
    return points / (3.0 * played) if played > 0 else 0.0


def build_match_record(panel: MinutePanel, meta: MatchMeta, standings: StandingsTable) -> MatchRecord:
    """Populate every coded variable for one match.

    The panel must carry weights. Initial schemes are read from the kickoff
    lineups, final schemes from the minute-90 state; weighted versions scale
    by the weight of the minute they are read at.
    """
    n_i = panel.n_events
    if n_i <= 0:
        raise EmptyMatch(meta.match_id)
    if any(row.omega is None for row in panel.rows):
        raise ValueError(f"{meta.match_id}: panel lacks weights; run compute_weights first")

    omega = np.array([row.omega for row in panel.rows])
    values: dict[str, float] = {}

    home_goals = sum(r.home.goal for r in panel.rows) + sum(r.away.own_goal for r in panel.rows)
    away_goals = sum(r.away.goal for r in panel.rows) + sum(r.home.own_goal for r in panel.rows)
    y1 = home_goals - away_goals
    y2 = 1 if y1 > 0 else 0
    y3 = 3 if y1 > 0 else (1 if y1 == 0 else 0)
    values["Y1"] = float(y1)
    values["Y2"] = float(y2)
    values["Y3"] = float(y3)

    # schemes: initial from lineups (pre-kickoff), final from the t=90 state
    series = scheme_series(panel)
    init_home = float(offensiveness_index(meta.initial_formation_home))
    init_away = float(offensiveness_index(meta.initial_formation_away))
    initial = {
        "h": {1: init_home, 2: init_home, 3: init_home / 30.0},
        "a": {1: init_away, 2: init_away, 3: init_away / 30.0},
    }
    final = {
        "h": {k: float(getattr(series, f"home_s{k}")[-1]) for k in (1, 2, 3)},
        "a": {k: float(getattr(series, f"away_s{k}")[-1]) for k in (1, 2, 3)},
    }
    w_init, w_fin = float(omega[0]), float(omega[-1])
    for k in (1, 2, 3):
        values[f"X{k}Ih"] = initial["h"][k]
        values[f"X{k}Ia"] = initial["a"][k]
        values[f"X{k}I"] = initial["h"][k] - initial["a"][k]
        values[f"X{k}wIh"] = initial["h"][k] * w_init
        values[f"X{k}wIa"] = initial["a"][k] * w_init
        values[f"X{k}wI"] = (initial["h"][k] - initial["a"][k]) * w_init
        values[f"X{k}Fh"] = final["h"][k]
        values[f"X{k}Fa"] = final["a"][k]
        values[f"X{k}F"] = final["h"][k] - final["a"][k]
        values[f"X{k}wFh"] = final["h"][k] * w_fin
        values[f"X{k}wFa"] = final["a"][k] * w_fin
        values[f"X{k}wF"] = (final["h"][k] - final["a"][k]) * w_fin

    # team actions w1..w8 and referee actions z1..z5, raw and weighted
    def aggregate(side: str, kind: str) -> tuple[float, float]:
        counts = np.array([getattr(getattr(row, side), kind) for row in panel.rows], dtype=float)
        return float(counts.sum()), float((counts * omega).sum())

    for h in range(1, 9):
        if h == 4:
            raw_h = values["W1h"] - values["W3h"]
            raw_a = values["W1a"] - values["W3a"]
            wgt_h = values["W1Wh"] - values["W3Wh"]
            wgt_a = values["W1Wa"] - values["W3Wa"]
        else:
            raw_h, wgt_h = aggregate("home", W_FIELDS[h])
            raw_a, wgt_a = aggregate("away", W_FIELDS[h])
        values[f"W{h}h"], values[f"W{h}a"], values[f"W{h}"] = raw_h, raw_a, raw_h - raw_a
        values[f"W{h}Wh"], values[f"W{h}Wa"], values[f"W{h}W"] = wgt_h, wgt_a, wgt_h - wgt_a

    # z5 is the total-fouls count, distinct from the free-kick and penalty
    # tallies so the (z3, z4, z5) block stays full rank
    for j in range(1, 6):
        raw_h, wgt_h = aggregate("home", Z_FIELDS[j])
        raw_a, wgt_a = aggregate("away", Z_FIELDS[j])
        values[f"Z{j}h"], values[f"Z{j}a"], values[f"Z{j}"] = raw_h, raw_a, raw_h - raw_a
        values[f"Z{j}Wh"], values[f"Z{j}Wa"], values[f"Z{j}W"] = wgt_h, wgt_a, wgt_h - wgt_a

    # controls
    c1 = meta.attendance / meta.capacity
    values["EXR1"] = c1
    values["EXR12"] = c1**2
    values["EXR13"] = c1**3
    values["met_1"] = float(meta.extra_time_1)
    values["met_2"] = float(meta.extra_time_2)
    values["MET"] = float(meta.extra_time_1 + meta.extra_time_2)
    n1, n2 = panel.stoppage_1, panel.stoppage_2
    values["NEVENTS1"] = float(n1)
    values["NEVENTS2"] = float(n2)
    values["ETW1"] = 1.0 + n1 / n_i
    values["ETW2"] = 1.0 + n2 / n_i
    values["MET_1W"] = meta.extra_time_1 * values["ETW1"]
    values["MET_2W"] = meta.extra_time_2 * values["ETW2"]
    values["METW"] = weighted_extra_time(meta, n1, n2, n_i)
    values["EVENTS"] = float(n_i)

    # standings-derived controls and league-day effects
    ph, mh = standings.points_before(meta.season, meta.home_team, meta.actual_date)
    pa, ma = standings.points_before(meta.season, meta.away_team, meta.actual_date)
    values["RP_LH"] = float(ph)
    values["RP_LA"] = float(pa)
    values["RP_LHAD"] = float(ph - pa)
    values["RP_LHAD2"] = float(ph - pa) ** 2
    values["RP_HOME_REL_P"] = _relative_points(ph, mh)
    values["RP_AWAY_REL_P"] = _relative_points(pa, ma)
    values["RP_LHAD_REL"] = values["RP_HOME_REL_P"] - values["RP_AWAY_REL_P"]
    values["RP_LHAD_REL2"] = values["RP_LHAD_REL"] ** 2
    values["DATE_RANK"] = float(standings.date_rank(meta.season, meta.actual_date))
    values["DATE_RANK2"] = values["DATE_RANK"] ** 2
    values["RELATIVE_DATE"] = standings.relative_date(meta.season, meta.actual_date)
    values["RELATIVE_DATE2"] = values["RELATIVE_DATE"] ** 2

    # extreme-result dummies
    values["DUM_EXTR"] = 1.0 if abs(y1) >= EXTREME_GOAL_DIFF else 0.0
    values["DUM_P"] = 1.0 if y1 >= EXTREME_GOAL_DIFF else 0.0
    values["DUM_N"] = 1.0 if y1 <= -EXTREME_GOAL_DIFF else 0.0

    values["SEAS"] = float(meta.season)
    values["LDAY"] = float(meta.scheduled_league_day)

    return MatchRecord(
        match_id=meta.match_id,
        season=meta.season,
        league_day=meta.scheduled_league_day,
        date=meta.actual_date,
        home_team=meta.home_team,
        away_team=meta.away_team,
        y1=y1,
        y2=y2,
        y3=y3,
        values=values,
    )


def records_to_frame(records: Sequence[MatchRecord]) -> pd.DataFrame:
    """Assemble the cross-sectional dataset with season and home-team dummies."""
    if not records:
        return pd.DataFrame()
    seasons = sorted({r.season for r in records})
    teams = sorted({r.home_team for r in records} | {r.away_team for r in records})
    rows = []
    for r in records:
        row: dict[str, object] = {
            "ID": r.match_id,
            "DATE": r.date.isoformat(),
            "HOME": r.home_team,
            "AWAY": r.away_team,
        }
        row.update(r.values)
        for season in seasons:
            row[f"SEASON_{season}"] = 1.0 if r.season == season else 0.0
        for team in teams:
            row[f"H_{team}"] = 1.0 if r.home_team == team else 0.0
        rows.append(row)
    frame = pd.DataFrame(rows)
    lead = ["ID", "SEAS", "LDAY", "DATE", "HOME", "AWAY", "Y1", "Y2", "Y3"]
    rest = [c for c in frame.columns if c not in lead]
    return frame[lead + rest]


@dataclass
class CrossSection:
    """End-to-end pipeline output for a parsed log."""

    panels: list[MinutePanel]
    records: list[MatchRecord]
    frame: pd.DataFrame
    standings: StandingsTable
    skipped: list[str]  # match ids excluded for having no events


def build_cross_section(events, metas) -> CrossSection:
    """Balance, weight and featurize a whole log.

    Standings use the official score from the metadata when present (so an
    excluded empty match still contributes its result), falling back to the
    goal events. Matches without events are skipped and reported.
    """
    from . import panel as panel_mod

    by_match: dict[str, list] = {m.match_id: [] for m in metas}
    for ev in events:
        by_match.setdefault(ev.match_id, []).append(ev)

    panels = []
    skipped = []
    outcomes = []
    for meta in sorted(metas, key=lambda m: m.match_id):
        p = panel_mod.balance_match(by_match.get(meta.match_id, []), meta)
        if p.n_events == 0:
            skipped.append(meta.match_id)
            if meta.home_score is not None and meta.away_score is not None:
                outcomes.append(
                    MatchOutcome(
                        meta.season, meta.actual_date, meta.home_team, meta.away_team,
                        meta.home_score, meta.away_score,
                    )
                )
            continue
        p = panel_mod.compute_weights(p)
        panels.append(p)
        if meta.home_score is not None and meta.away_score is not None:
            outcomes.append(
                MatchOutcome(
                    meta.season, meta.actual_date, meta.home_team, meta.away_team,
                    meta.home_score, meta.away_score,
                )
            )
        else:
            outcomes.append(match_outcome(p))

    standings = compute_standings(outcomes)
    records = [build_match_record(p, p.meta, standings) for p in panels]
    frame = records_to_frame(records)
    return CrossSection(panels=panels, records=records, frame=frame, standings=standings, skipped=skipped)


def season_columns(frame: pd.DataFrame) -> list[str]:
    return sorted(c for c in frame.columns if c.startswith("SEASON_"))


def team_columns(frame: pd.DataFrame) -> list[str]:
    return sorted(c for c in frame.columns if c.startswith("H_") and c != "HOME")


PANEL_COLUMNS = [
    "MATCH_ID",
    "MINUTE",
    "NEVENTS",
    "OMEGA",
    "H_GOAL",
    "A_GOAL",
    "H_AUTOG",
    "A_AUTOG",
    "HC_ACT",
    "AC_ACT",
    "H_CROSS",
    "A_CROSS",
    "H_SHOT",
    "A_SHOT",
    "H_GOALK",
    "A_GOALK",
    "H_OFFS",
    "A_OFFS",
    "H_CORNER",
    "A_CORNER",
    "H_CROSSCOR",
    "A_CROSSCOR",
    "H_CROSSNOCOR",
    "A_CROSSNOCOR",
    "H_CORNERNOCROSS",
    "A_CORNERNOCROSS",
    "HR_YEL",
    "AR_YEL",
    "HR_RED",
    "AR_RED",
    "HR_FREEKICK",
    "AR_FREEKICK",
    "HR_PENALTYK",
    "AR_PENALTYK",
    "HR_FOUL",
    "AR_FOUL",
    "H_SCHEME_1",
    "A_SCHEME_1",
    "HAD_SCHEME_1",
    "H_SCHEME_2",
    "A_SCHEME_2",
    "HAD_SCHEME_2",
    "H_SCHEME_3",
    "A_SCHEME_3",
    "HAD_SCHEME_3",
]


def balanced_panel_frame(panels: Sequence[MinutePanel]) -> pd.DataFrame:
    """Minute-level export of the balanced panel, one row per (match, minute)."""
    rows = []
    for panel in panels:
        series = scheme_series(panel)
        for i, row in enumerate(panel.rows):
            h, a = row.home, row.away
            rows.append(
                {
                    "MATCH_ID": panel.match_id,
                    "MINUTE": row.t,
                    "NEVENTS": row.n_events,
                    "OMEGA": row.omega if row.omega is not None else float("nan"),
                    "H_GOAL": h.goal,
                    "A_GOAL": a.goal,
                    "H_AUTOG": h.own_goal,
                    "A_AUTOG": a.own_goal,
                    "HC_ACT": h.substitution,
                    "AC_ACT": a.substitution,
                    "H_CROSS": h.cross,
                    "A_CROSS": a.cross,
                    "H_SHOT": h.shot,
                    "A_SHOT": a.shot,
                    "H_GOALK": h.goal_kick,
                    "A_GOALK": a.goal_kick,
                    "H_OFFS": h.offside,
                    "A_OFFS": a.offside,
                    "H_CORNER": h.corner,
                    "A_CORNER": a.corner,
                    "H_CROSSCOR": h.cross_from_corner,
                    "A_CROSSCOR": a.cross_from_corner,
                    "H_CROSSNOCOR": h.cross - h.cross_from_corner,
                    "A_CROSSNOCOR": a.cross - a.cross_from_corner,
                    "H_CORNERNOCROSS": h.corner_no_cross,
                    "A_CORNERNOCROSS": a.corner_no_cross,
                    "HR_YEL": h.yellow,
                    "AR_YEL": a.yellow,
                    "HR_RED": h.red,
                    "AR_RED": a.red,
                    "HR_FREEKICK": h.free_kick,
                    "AR_FREEKICK": a.free_kick,
                    "HR_PENALTYK": h.penalty,
                    "AR_PENALTYK": a.penalty,
                    "HR_FOUL": h.foul,
                    "AR_FOUL": a.foul,
                    "H_SCHEME_1": series.home_s1[i],
                    "A_SCHEME_1": series.away_s1[i],
                    "HAD_SCHEME_1": series.home_s1[i] - series.away_s1[i],
                    "H_SCHEME_2": series.home_s2[i],
                    "A_SCHEME_2": series.away_s2[i],
                    "HAD_SCHEME_2": series.home_s2[i] - series.away_s2[i],
                    "H_SCHEME_3": series.home_s3[i],
                    "A_SCHEME_3": series.away_s3[i],
                    "HAD_SCHEME_3": series.home_s3[i] - series.away_s3[i],
                }
            )
    return pd.DataFrame(rows, columns=PANEL_COLUMNS)
