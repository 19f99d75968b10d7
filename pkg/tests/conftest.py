import datetime as dt

import pytest

from calcio import features as feat
from calcio import synth
from calcio.events import EventKind, MatchMeta, RawEvent, Side


def make_meta(match_id="M1", **kwargs) -> MatchMeta:
    defaults = dict(
        match_id=match_id,
        season=2011,
        scheduled_league_day=1,
        actual_date=dt.date(2011, 9, 3),
        home_team="FC01",
        away_team="FC02",
        home_coach="Coach A",
        away_coach="Coach B",
        referee="Ref",
        attendance=30000,
        capacity=40000,
        extra_time_1=2,
        extra_time_2=4,
        initial_formation_home=(4, 4, 2),
        initial_formation_away=(4, 3, 3),
    )
    defaults.update(kwargs)
    return MatchMeta(**defaults)


def make_event(match_id="M1", half=1, minute=10, seq=1, side=Side.HOME, kind=EventKind.SHOT, **kw) -> RawEvent:
    return RawEvent(
        match_id=match_id,
        half=half,
        minute_in_half=minute,
        event_seq=seq,
        team_side=side,
        kind=kind,
        formation=kw.get("formation"),
        carded_player_role=kw.get("role"),
    )


@pytest.fixture(scope="session")
def full_league():
    return synth.generate_league(synth.LeagueConfig(seed=42))


@pytest.fixture(scope="session")
def full_cross_section(full_league):
    return feat.build_cross_section(full_league.events, full_league.metas)


