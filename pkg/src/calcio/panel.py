"""Balanced 90-minute match panels with per-minute event intensity weights.

Count-type events are summed within each minute; state-type quantities
(formation, players on the pitch) take the last value inside the minute and
are forward-filled through empty minutes. Stoppage events fold into minute
45 (first half) or 90 (second half).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Sequence

from .errors import EmptyMatch, NoLineup
from .events import EventKind, Formation, MatchMeta, RawEvent, Role, ROLE_WEIGHT, Side

#: sum of per-minute weights over the 90 rows: 90 + sum(n_it / n_i) = 91
WEIGHT_TOTAL = 91.0


@dataclass
class SideCounts:
    cross: int = 0
    corner: int = 0
    cross_from_corner: int = 0
    corner_no_cross: int = 0
    shot: int = 0
    goal_kick: int = 0
    offside: int = 0
    goal: int = 0
    own_goal: int = 0
    substitution: int = 0
    foul: int = 0
    free_kick: int = 0
    penalty: int = 0
    yellow: int = 0
    red: int = 0

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class SideState:
    formation: Formation
    active_players: int = 11
    # cumulative offensiveness weight of dismissed outfield players
    dismissed_weight: int = 0
    dismissed_outfield: int = 0

    @property
    def active_outfield(self) -> int:
        return 10 - self.dismissed_outfield


@dataclass
class MinuteRow:
    match_id: str
    t: int
    n_events: int
    home: SideCounts
    away: SideCounts
    home_state: SideState
    away_state: SideState
    omega: float | None = None
    # roles dismissed this minute, kept so scheme series can locate card times
    home_red_roles: tuple[Role, ...] = ()
    away_red_roles: tuple[Role, ...] = ()


@dataclass
class MinutePanel:
    meta: MatchMeta
    rows: list[MinuteRow]
    warnings: list[str] = field(default_factory=list)
    # events recorded strictly beyond minute 45 of each half
    stoppage_1: int = 0
    stoppage_2: int = 0

    @property
    def match_id(self) -> str:
        return self.meta.match_id

    @property
    def n_events(self) -> int:
        return sum(row.n_events for row in self.rows)


_COUNTED = {
    EventKind.CROSS: "cross",
    EventKind.CORNER: "corner",
    EventKind.SHOT: "shot",
    EventKind.GOAL_KICK: "goal_kick",
    EventKind.OFFSIDE: "offside",
    EventKind.GOAL: "goal",
    EventKind.OWN_GOAL: "own_goal",
    EventKind.SUBSTITUTION: "substitution",
    EventKind.FOUL: "foul",
    EventKind.FREE_KICK: "free_kick",
    EventKind.PENALTY_KICK: "penalty",
    EventKind.YELLOW_CARD: "yellow",
    EventKind.RED_CARD: "red",
}


def panel_minute(event: RawEvent) -> int:
    """Map an event to its balanced-panel minute, folding stoppage into 45/90."""
    m = min(event.minute_in_half, 45)
    return m if event.half == 1 else 45 + m


def stoppage_event_counts(events: Sequence[RawEvent]) -> tuple[int, int]:
    """Events strictly beyond minute 45 of each half (true added time)."""
    n1 = sum(1 for e in events if e.half == 1 and e.minute_in_half > 45)
    n2 = sum(1 for e in events if e.half == 2 and e.minute_in_half > 45)
    return n1, n2


def balance_match(events: Sequence[RawEvent], meta: MatchMeta) -> MinutePanel:
    """Build the 90-row panel for one match.

    Events must all belong to ``meta``'s match and be sorted. A cross whose
    immediately preceding event (same half, in sequence order) is a corner by
    the same team counts as a corner-originated cross.
    """
    if meta.initial_formation_home is None or meta.initial_formation_away is None:
        raise NoLineup(meta.match_id)

    events = sorted(events)
    for ev in events:
        if ev.match_id != meta.match_id:
            raise ValueError(f"event for {ev.match_id!r} passed with meta {meta.match_id!r}")

    warnings: list[str] = []
    counts: dict[int, dict[Side, SideCounts]] = {
        t: {Side.HOME: SideCounts(), Side.AWAY: SideCounts()} for t in range(1, 91)
    }
    n_events = dict.fromkeys(range(1, 91), 0)
    red_roles: dict[int, dict[Side, list[Role]]] = {
        t: {Side.HOME: [], Side.AWAY: []} for t in range(1, 91)
    }
    formation_change: dict[int, dict[Side, Formation]] = {t: {} for t in range(1, 91)}

    prev: RawEvent | None = None
    for ev in events:
        t = panel_minute(ev)
        limit = 45 + (meta.extra_time_1 if ev.half == 1 else meta.extra_time_2)
        if ev.minute_in_half > limit:
            warnings.append(
                f"event beyond declared extra time (half {ev.half}, minute "
                f"{ev.minute_in_half} > {limit}); clamped into minute {t}"
            )
        n_events[t] += 1
        if ev.kind is EventKind.FORMATION_CHANGE:
            if ev.team_side in (Side.HOME, Side.AWAY) and ev.formation is not None:
                formation_change[t][ev.team_side] = ev.formation
        elif ev.team_side in (Side.HOME, Side.AWAY):
            side_counts = counts[t][ev.team_side]
            name = _COUNTED[ev.kind]
            setattr(side_counts, name, getattr(side_counts, name) + 1)
            if ev.kind is EventKind.CROSS and prev is not None:
                if prev.kind is EventKind.CORNER and prev.team_side is ev.team_side and prev.half == ev.half:
                    side_counts.cross_from_corner += 1
            if ev.kind is EventKind.RED_CARD and ev.carded_player_role is not None:
                red_roles[t][ev.team_side].append(ev.carded_player_role)
        prev = ev

    # corners with no immediately following same-team cross
    followed: dict[int, dict[Side, int]] = {t: {Side.HOME: 0, Side.AWAY: 0} for t in range(1, 91)}
    for first, second in zip(events, events[1:]):
        if (
            first.kind is EventKind.CORNER
            and second.kind is EventKind.CROSS
            and first.team_side is second.team_side
            and first.team_side in (Side.HOME, Side.AWAY)
            and first.half == second.half
        ):
            followed[panel_minute(first)][first.team_side] += 1
    for t in range(1, 91):
        for side in (Side.HOME, Side.AWAY):
            counts[t][side].corner_no_cross = counts[t][side].corner - followed[t][side]

    rows: list[MinuteRow] = []
    state = {
        Side.HOME: SideState(formation=meta.initial_formation_home),
        Side.AWAY: SideState(formation=meta.initial_formation_away),
    }
    for t in range(1, 91):
        for side in (Side.HOME, Side.AWAY):
            st = state[side]
            if side in formation_change[t]:
                st.formation = formation_change[t][side]
            for role in red_roles[t][side]:
                st.active_players -= 1
                if role in ROLE_WEIGHT:
                    st.dismissed_weight += ROLE_WEIGHT[role]
                    st.dismissed_outfield += 1
        rows.append(
            MinuteRow(
                match_id=meta.match_id,
                t=t,
                n_events=n_events[t],
                home=counts[t][Side.HOME],
                away=counts[t][Side.AWAY],
                home_state=replace(state[Side.HOME]),
                away_state=replace(state[Side.AWAY]),
                home_red_roles=tuple(red_roles[t][Side.HOME]),
                away_red_roles=tuple(red_roles[t][Side.AWAY]),
            )
        )
    n1, n2 = stoppage_event_counts(events)
    return MinutePanel(meta=meta, rows=rows, warnings=warnings, stoppage_1=n1, stoppage_2=n2)


def compute_weights(panel: MinutePanel) -> MinutePanel:
    """Attach omega = n_it / n_i + 1 to every row; the 90 weights sum to 91."""
    n_i = panel.n_events
    if n_i <= 0:
        raise EmptyMatch(panel.match_id)
    rows = [replace(row, omega=row.n_events / n_i + 1.0) for row in panel.rows]
    return MinutePanel(
        meta=panel.meta,
        rows=rows,
        warnings=list(panel.warnings),
        stoppage_1=panel.stoppage_1,
        stoppage_2=panel.stoppage_2,
    )


def weighted_extra_time(meta: MatchMeta, n1: int, n2: int, n_i: int) -> float:
    """Event-weighted added minutes: et1*(1 + n1/n_i) + et2*(1 + n2/n_i)."""
    if n_i <= 0:
        raise EmptyMatch(meta.match_id)
    if n1 + n2 > n_i:
        raise ValueError("stoppage events exceed the match total")
    return meta.extra_time_1 * (1.0 + n1 / n_i) + meta.extra_time_2 * (1.0 + n2 / n_i)
