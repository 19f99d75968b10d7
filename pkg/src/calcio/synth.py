"""Synthetic league generator with known ground-truth coefficients.

Covariate events (actions, cards, formation changes, attendance, added
time) are drawn first; the match outcome is then drawn from the chosen
family's link applied to the true linear predictor, and goal events are
synthesized to agree with it. Downstream estimation of the true
specification is therefore correctly specified, which closes the
verification loop for the whole pipeline.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from . import features as feat
from .errors import InvalidConfig
from .estimators import GAUSSIAN, LOGIT, OLOGIT, INTERCEPT_LABEL, fit_logit, fit_ologit, fit_ols, sigmoid
from .events import EventKind, Formation, MatchMeta, RawEvent, Role, Side

FORMATION_MENU: tuple[Formation, ...] = ((4, 4, 2), (4, 3, 3), (3, 5, 2), (4, 5, 1), (5, 3, 2))
FORMATION_PROBS: tuple[float, ...] = (0.38, 0.18, 0.18, 0.16, 0.10)

# per-match Poisson means, (home, away); crosses exclude the corner-paired ones
DEFAULT_EVENT_MEANS: dict[str, tuple[float, float]] = {
    "cross": (21.0, 17.2),
    "corner": (5.77, 4.46),
    "shot": (13.41, 11.03),
    "goal_kick": (8.40, 9.56),
    "offside": (2.57, 2.28),
    "free_kick": (14.49, 14.66),
    "penalty": (0.09, 0.16),
    "foul": (5.0, 5.0),
    "yellow": (2.25, 2.47),
}

DEFAULT_TRUE_THETA: dict[str, float] = {
    INTERCEPT_LABEL: 0.00,
    "X2I": 0.50,
    "X2F": -0.45,
    "W1": -0.03,
    "W6": 0.07,
    "W7": 0.03,
    "Z1": -0.08,
    "Z2": -1.00,
    "Z4": 0.40,
    "RP_LHAD_REL": 1.50,
}


@dataclass
class LeagueConfig:
    n_teams: int = 20
    n_seasons: int = 3
    first_season: int = 2011
    outcome_family: str = LOGIT
    true_theta: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TRUE_THETA))
    thresholds: tuple[float, float] = (-1.0, 0.2)  # ologit cutpoints
    gaussian_sigma: float = 1.2
    event_means: dict[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_EVENT_MEANS))
    corner_cross_prob: float = 0.30
    formation_menu: tuple[Formation, ...] = FORMATION_MENU
    formation_probs: tuple[float, ...] = FORMATION_PROBS
    formation_change_prob: float = 0.60
    red_card_means: tuple[float, float] = (0.12, 0.16)
    goalkeeper_red_prob: float = 0.03
    own_goal_prob: float = 0.03
    substitution_mean: float = 2.6
    win_margin_mean: float = 0.75
    loss_margin_mean: float = 0.70
    draw_prob_nonwin: float = 0.49  # logit family only: tie share among non-wins
    base_goals_mean: float = 0.95
    attendance_beta: tuple[float, float] = (3.36, 2.34)
    seed: int = 0

    def validate(self) -> None:
        if self.n_teams < 2 or self.n_teams % 2:
            raise InvalidConfig("n_teams must be even and at least 2")
        if self.n_seasons < 1:
            raise InvalidConfig("n_seasons must be positive")
        if self.outcome_family not in (GAUSSIAN, LOGIT, OLOGIT):
            raise InvalidConfig(f"unknown family {self.outcome_family!r}")
        if abs(sum(self.formation_probs) - 1.0) > 1e-9 or len(self.formation_probs) != len(self.formation_menu):
            raise InvalidConfig("formation probabilities must match the menu and sum to 1")
        if any(rate < 0 for pair in self.event_means.values() for rate in pair):
            raise InvalidConfig("event intensities must be nonnegative")
        if not self.thresholds[0] < self.thresholds[1]:
            raise InvalidConfig("ologit thresholds must be ordered")


@dataclass
class GroundTruth:
    family: str
    theta: dict[str, float]
    thresholds: tuple[float, float] | None
    sigma: float | None
    seed: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)


@dataclass
class League:
    events: list[RawEvent]
    metas: list[MatchMeta]
    ground_truth: GroundTruth
    config: LeagueConfig


def round_robin_schedule(n_teams: int) -> list[list[tuple[int, int]]]:
    """Circle-method double round robin: 2*(n-1) rounds of n/2 pairings."""
    teams = list(range(n_teams))
    rounds = []
    for _ in range(n_teams - 1):
        pairs = []
        for k in range(n_teams // 2):
            pairs.append((teams[k], teams[n_teams - 1 - k]))
        rounds.append(pairs)
        teams = [teams[0]] + [teams[-1]] + teams[1:-1]
    mirrored = [[(away, home) for home, away in rnd] for rnd in rounds]
    return rounds + mirrored


def _draw_formation(rng: np.random.Generator, cfg: LeagueConfig) -> Formation:
    i = rng.choice(len(cfg.formation_menu), p=cfg.formation_probs)
    return cfg.formation_menu[i]


def _scatter_minutes(rng: np.random.Generator, count: int, et1: int, et2: int) -> list[tuple[int, int]]:
    """Random (half, minute_in_half) slots, stoppage included."""
    slots = []
    for _ in range(count):
        if rng.random() < 0.5:
            slots.append((1, int(rng.integers(1, 45 + et1 + 1))))
        else:
            slots.append((2, int(rng.integers(1, 45 + et2 + 1))))
    return slots


_KIND_OF = {
    "cross": EventKind.CROSS,
    "corner": EventKind.CORNER,
    "shot": EventKind.SHOT,
    "goal_kick": EventKind.GOAL_KICK,
    "offside": EventKind.OFFSIDE,
    "free_kick": EventKind.FREE_KICK,
    "penalty": EventKind.PENALTY_KICK,
    "foul": EventKind.FOUL,
    "yellow": EventKind.YELLOW_CARD,
}


def _simulate_match(
    rng: np.random.Generator,
    cfg: LeagueConfig,
    match_id: str,
    season: int,
    league_day: int,
    date: dt.date,
    home: str,
    away: str,
    capacity: int,
    rel_points: tuple[float, float],
) -> tuple[list[RawEvent], MatchMeta, dict[str, float], int, int]:
    et1 = int(min(rng.poisson(1.8), 5))
    et2 = int(min(rng.poisson(3.9), 6))
    lineup_home = _draw_formation(rng, cfg)
    lineup_away = _draw_formation(rng, cfg)

    raw: list[tuple[int, int, Side, EventKind, Formation | None, Role | None]] = []

    def emit(half: int, minute: int, side: Side, kind: EventKind, formation=None, role=None):
        raw.append((half, minute, side, kind, formation, role))

    # action events
    for name, (mu_h, mu_a) in cfg.event_means.items():
        kind = _KIND_OF[name]
        for side, mu in ((Side.HOME, mu_h), (Side.AWAY, mu_a)):
            count = int(rng.poisson(mu))
            for half, minute in _scatter_minutes(rng, count, et1, et2):
                emit(half, minute, side, kind)
                if kind is EventKind.CORNER and rng.random() < cfg.corner_cross_prob:
                    emit(half, minute, side, EventKind.CROSS)

    # substitutions
    for side in (Side.HOME, Side.AWAY):
        for half, minute in _scatter_minutes(rng, int(min(rng.poisson(cfg.substitution_mean), 3)), et1, et2):
            emit(half, minute, side, EventKind.SUBSTITUTION)

    # formation changes; drive variability of the final scheme
    formations = {Side.HOME: lineup_home, Side.AWAY: lineup_away}
    final_formation = dict(formations)
    for side in (Side.HOME, Side.AWAY):
        if rng.random() < cfg.formation_change_prob:
            n_changes = 1 + int(rng.random() < 0.25)
            for _ in range(n_changes):
                current = final_formation[side]
                options = [f for f in cfg.formation_menu if f != current]
                new = options[int(rng.integers(0, len(options)))]
                half, minute = _scatter_minutes(rng, 1, et1, et2)[0]
                emit(half, minute, side, EventKind.FORMATION_CHANGE, formation=new)
                final_formation[side] = new  # provisional; true last-change wins below

    # red cards with roles
    dismissed_weight = {Side.HOME: 0, Side.AWAY: 0}
    reds: dict[Side, int] = {}
    for side, mu in ((Side.HOME, cfg.red_card_means[0]), (Side.AWAY, cfg.red_card_means[1])):
        reds[side] = int(min(rng.poisson(mu), 2))
        for _ in range(reds[side]):
            if rng.random() < cfg.goalkeeper_red_prob:
                role = Role.GOALKEEPER
            else:
                d, m, f = formations[side]
                role = rng.choice(
                    [Role.DEFENDER, Role.MIDFIELDER, Role.FORWARD], p=np.array([d, m, f]) / 10.0
                )
                dismissed_weight[side] += {Role.DEFENDER: 1, Role.MIDFIELDER: 2, Role.FORWARD: 3}[role]
            half, minute = _scatter_minutes(rng, 1, et1, et2)[0]
            emit(half, minute, side, EventKind.RED_CARD, role=role)

    # true covariates as the pipeline will compute them
    order = sorted(range(len(raw)), key=lambda i: (raw[i][0], raw[i][1], i))
    last_formation = dict(formations)
    for i in order:
        half, minute, side, kind, formation, _ = raw[i]
        if kind is EventKind.FORMATION_CHANGE:
            last_formation[side] = formation

    def count_diff(kind: EventKind) -> float:
        h = sum(1 for r in raw if r[3] is kind and r[2] is Side.HOME)
        a = sum(1 for r in raw if r[3] is kind and r[2] is Side.AWAY)
        return float(h - a)

    s2i_h = feat.offensiveness_index(lineup_home)
    s2i_a = feat.offensiveness_index(lineup_away)
    s2f_h = feat.offensiveness_index(last_formation[Side.HOME]) - dismissed_weight[Side.HOME]
    s2f_a = feat.offensiveness_index(last_formation[Side.AWAY]) - dismissed_weight[Side.AWAY]
    covariates = {
        INTERCEPT_LABEL: 1.0,
        "X2I": float(s2i_h - s2i_a),
        "X2F": float(s2f_h - s2f_a),
        "W1": count_diff(EventKind.CROSS),
        "W2": count_diff(EventKind.CORNER),
        "W6": count_diff(EventKind.SHOT),
        "W7": count_diff(EventKind.GOAL_KICK),
        "W8": count_diff(EventKind.OFFSIDE),
        "Z1": count_diff(EventKind.YELLOW_CARD),
        "Z2": count_diff(EventKind.RED_CARD),
        "Z3": count_diff(EventKind.FREE_KICK),
        "Z4": count_diff(EventKind.PENALTY_KICK),
        "RP_LHAD_REL": rel_points[0] - rel_points[1],
    }
    missing = [k for k in cfg.true_theta if k not in covariates]
    if missing:
        raise InvalidConfig(f"true_theta references unsupported covariates: {missing}")
    eta = sum(cfg.true_theta[k] * covariates[k] for k in cfg.true_theta)

    # outcome draw through the family link
    if cfg.outcome_family == LOGIT:
        win = rng.random() < sigmoid(eta)
        if win:
            y1 = 1 + int(rng.poisson(cfg.win_margin_mean))
        elif rng.random() < cfg.draw_prob_nonwin:
            y1 = 0
        else:
            y1 = -(1 + int(rng.poisson(cfg.loss_margin_mean)))
    elif cfg.outcome_family == OLOGIT:
        u = rng.logistic()
        latent = eta + u
        if latent <= cfg.thresholds[0]:
            y1 = -(1 + int(rng.poisson(cfg.loss_margin_mean)))
        elif latent <= cfg.thresholds[1]:
            y1 = 0
        else:
            y1 = 1 + int(rng.poisson(cfg.win_margin_mean))
    else:
        y1 = int(np.clip(np.rint(eta + rng.normal(0.0, cfg.gaussian_sigma)), -9, 9))

    base = int(rng.poisson(cfg.base_goals_mean))
    if y1 > 0:
        away_goals, home_goals = base, base + y1
    elif y1 < 0:
        home_goals, away_goals = base, base - y1
    else:
        home_goals = away_goals = base

    for side, n_goals in ((Side.HOME, home_goals), (Side.AWAY, away_goals)):
        for half, minute in _scatter_minutes(rng, n_goals, et1, et2):
            if rng.random() < cfg.own_goal_prob:
                # an own goal by the opponent credits this side
                other = Side.AWAY if side is Side.HOME else Side.HOME
                emit(half, minute, other, EventKind.OWN_GOAL)
            else:
                emit(half, minute, side, EventKind.GOAL)

    # assign contiguous sequence numbers inside each minute
    order = sorted(range(len(raw)), key=lambda i: (raw[i][0], raw[i][1], i))
    seq: dict[tuple[int, int], int] = {}
    events = []
    for i in order:
        half, minute, side, kind, formation, role = raw[i]
        s = seq.get((half, minute), 0) + 1
        seq[(half, minute)] = s
        events.append(
            RawEvent(
                match_id=match_id,
                half=half,
                minute_in_half=minute,
                event_seq=s,
                team_side=side,
                kind=kind,
                formation=formation,
                carded_player_role=role,
            )
        )

    a, b = cfg.attendance_beta
    attendance = int(round(capacity * rng.beta(a, b)))
    meta = MatchMeta(
        match_id=match_id,
        season=season,
        scheduled_league_day=league_day,
        actual_date=date,
        home_team=home,
        away_team=away,
        home_coach=f"Coach {home}",
        away_coach=f"Coach {away}",
        referee=f"Referee {int(rng.integers(1, 21)):02d}",
        attendance=min(attendance, capacity),
        capacity=capacity,
        extra_time_1=et1,
        extra_time_2=et2,
        initial_formation_home=lineup_home,
        initial_formation_away=lineup_away,
        home_score=home_goals,
        away_score=away_goals,
    )
    return events, meta, covariates, home_goals, away_goals


def generate_league(config: LeagueConfig | None = None) -> League:
    """Generate events and metadata for n_seasons double round robins."""
    cfg = config or LeagueConfig()
    cfg.validate()
    teams = [f"FC{i + 1:02d}" for i in range(cfg.n_teams)]
    capacities = [int(20000 + 3000 * i) for i in range(cfg.n_teams)]
    schedule = round_robin_schedule(cfg.n_teams)
    matches_per_season = len(schedule) * (cfg.n_teams // 2)
    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(cfg.n_seasons * matches_per_season)

    all_events: list[RawEvent] = []
    all_metas: list[MatchMeta] = []
    match_index = 0
    for s in range(cfg.n_seasons):
        season = cfg.first_season + s
        start = dt.date(season, 9, 1)
        points = {t: 0 for t in teams}
        played = {t: 0 for t in teams}
        for day, pairings in enumerate(schedule, start=1):
            date = start + dt.timedelta(days=7 * (day - 1))
            day_results = []
            for home_i, away_i in pairings:
                home, away = teams[home_i], teams[away_i]
                rng = np.random.default_rng(children[match_index])
                rel_home = points[home] / (3.0 * played[home]) if played[home] else 0.0
                rel_away = points[away] / (3.0 * played[away]) if played[away] else 0.0
                match_id = f"S{season}D{day:02d}M{home_i:02d}{away_i:02d}"
                events, meta, _, hg, ag = _simulate_match(
                    rng,
                    cfg,
                    match_id,
                    season,
                    day,
                    date,
                    home,
                    away,
                    capacities[home_i],
                    (rel_home, rel_away),
                )
                all_events.extend(events)
                all_metas.append(meta)
                day_results.append((home, away, hg, ag))
                match_index += 1
            for home, away, hg, ag in day_results:
                if hg > ag:
                    points[home] += 3
                elif hg < ag:
                    points[away] += 3
                else:
                    points[home] += 1
                    points[away] += 1
                played[home] += 1
                played[away] += 1

    truth = GroundTruth(
        family=cfg.outcome_family,
        theta=dict(cfg.true_theta),
        thresholds=cfg.thresholds if cfg.outcome_family == OLOGIT else None,
        sigma=cfg.gaussian_sigma if cfg.outcome_family == GAUSSIAN else None,
        seed=cfg.seed,
    )
    all_events.sort()
    all_metas.sort(key=lambda m: m.match_id)
    return League(events=all_events, metas=all_metas, ground_truth=truth, config=cfg)


@dataclass
class RecoveryRow:
    label: str
    true_value: float
    estimate: float
    se: float
    z: float


@dataclass
class RecoveryReport:
    family: str
    rows: list[RecoveryRow]

    def fraction_within(self, z_bound: float = 2.0) -> float:
        return float(np.mean([abs(r.z) <= z_bound for r in self.rows]))


def recover_theta(league: League, family: str | None = None) -> RecoveryReport:
    """Run the full pipeline and fit the generating specification.

    Reports per-coefficient z-scores (estimate - truth) / SE using the
    model-based covariance of the correctly specified fit.
    """
    family = family or league.ground_truth.family
    if family != league.ground_truth.family:
        raise InvalidConfig(f"league was generated under {league.ground_truth.family!r}")
    cross = feat.build_cross_section(league.events, league.metas)
    frame = cross.frame
    theta = league.ground_truth.theta

    labels = [l for l in theta if l != INTERCEPT_LABEL]
    columns = [np.ones(len(frame)) if l == INTERCEPT_LABEL else frame[l].to_numpy(float) for l in theta]
    X = np.column_stack(columns)
    fit_labels = list(theta.keys())

    if family == GAUSSIAN:
        fit = fit_ols(X, frame["Y1"].to_numpy(float), fit_labels)
    elif family == LOGIT:
        fit = fit_logit(X, frame["Y2"].to_numpy(float), fit_labels)
    else:
        keep = [i for i, l in enumerate(fit_labels) if l != INTERCEPT_LABEL]
        fit = fit_ologit(X[:, keep], frame["Y3"].to_numpy(float), labels=[fit_labels[i] for i in keep])

    ses = fit.se("model")
    rows = []
    for i, label in enumerate(fit.labels):
        rows.append(
            RecoveryRow(
                label=label,
                true_value=theta.get(label, 0.0),
                estimate=float(fit.coef[i]),
                se=float(ses[i]),
                z=float((fit.coef[i] - theta.get(label, 0.0)) / ses[i]),
            )
        )
    if fit.thresholds is not None and league.ground_truth.thresholds is not None:
        for k, thr_label in enumerate(fit.threshold_labels):
            # the fitted thresholds absorb the generator's intercept
            true_thr = league.ground_truth.thresholds[k] - theta.get(INTERCEPT_LABEL, 0.0)
            se = float(ses[len(fit.labels) + k])
            rows.append(
                RecoveryRow(
                    label=thr_label,
                    true_value=true_thr,
                    estimate=float(fit.thresholds[k]),
                    se=se,
                    z=float((fit.thresholds[k] - true_thr) / se),
                )
            )
    return RecoveryReport(family=family, rows=rows)
