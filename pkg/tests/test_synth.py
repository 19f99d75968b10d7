import numpy as np
import pytest

from calcio import events as ev
from calcio import features as feat
from calcio import synth
from calcio.errors import InvalidConfig, Separation
from calcio.estimators import GAUSSIAN, OLOGIT


def test_league_shape(full_league):
    assert len(full_league.metas) == 1140  # 3 seasons x 380 matches
    per_season = {}
    for meta in full_league.metas:
        per_season[meta.season] = per_season.get(meta.season, 0) + 1
    assert per_season == {2011: 380, 2012: 380, 2013: 380}
    # double round robin: every team hosts every other team once per season
    home_counts = {}
    for meta in full_league.metas:
        if meta.season == 2011:
            home_counts[meta.home_team] = home_counts.get(meta.home_team, 0) + 1
    assert set(home_counts.values()) == {19}


def test_generated_log_validates_clean(full_league):
    report = ev.validate_log(full_league.events, full_league.metas)
    assert report.n_errors == 0


def test_seed_determinism():
    cfg = synth.LeagueConfig(seed=99, n_teams=6, n_seasons=1)
    a = synth.generate_league(cfg)
    b = synth.generate_league(synth.LeagueConfig(seed=99, n_teams=6, n_seasons=1))
    assert ev.serialize_events(a.events) == ev.serialize_events(b.events)
    assert ev.serialize_metas(a.metas) == ev.serialize_metas(b.metas)
    c = synth.generate_league(synth.LeagueConfig(seed=100, n_teams=6, n_seasons=1))
    assert ev.serialize_events(a.events) != ev.serialize_events(c.events)


def test_calibration_targets(full_cross_section):
    frame = full_cross_section.frame
    win_share = frame["Y2"].mean()
    assert 0.40 <= win_share <= 0.55
    crosses = frame["W1h"].mean()
    assert abs(crosses - 22.74) / 22.74 < 0.30
    assert 0 <= frame["METW"].max() <= 2 * 15


def test_zero_intensity_flags_empty_matches():
    cfg = synth.LeagueConfig(seed=1, n_teams=4, n_seasons=1)
    cfg.event_means = {k: (0.0, 0.0) for k in cfg.event_means}
    cfg.substitution_mean = 0.0
    cfg.red_card_means = (0.0, 0.0)
    cfg.formation_change_prob = 0.0
    cfg.base_goals_mean = 0.0
    cfg.win_margin_mean = 0.0
    cfg.loss_margin_mean = 0.0
    # keep outcomes deterministic draws at eta ~ 0
    league = synth.generate_league(cfg)
    cross = feat.build_cross_section(league.events, league.metas)
    assert cross.skipped  # empty matches excluded and reported
    assert all(p.n_events > 0 for p in cross.panels)


def test_invalid_config_rejected():
    with pytest.raises(InvalidConfig):
        synth.generate_league(synth.LeagueConfig(n_teams=5))
    with pytest.raises(InvalidConfig):
        synth.generate_league(synth.LeagueConfig(n_seasons=0))
    cfg = synth.LeagueConfig()
    cfg.true_theta = {"NOT_A_COLUMN": 1.0}
    with pytest.raises(InvalidConfig):
        synth.generate_league(cfg)


def test_huge_coefficients_surface_separation():
    # a deterministic outcome on a continuous covariate drives the logit
    # coefficient beyond the separation bound
    cfg = synth.LeagueConfig(seed=5, n_teams=8, n_seasons=2)
    cfg.true_theta = {"RP_LHAD_REL": 400.0}
    league = synth.generate_league(cfg)
    with pytest.raises(Separation):
        synth.recover_theta(league)


def test_recover_family_mismatch():
    cfg = synth.LeagueConfig(seed=2, n_teams=6, n_seasons=1)
    league = synth.generate_league(cfg)
    with pytest.raises(InvalidConfig):
        synth.recover_theta(league, family=GAUSSIAN)


def test_ologit_league_recovery():
    cfg = synth.LeagueConfig(seed=40, outcome_family=OLOGIT)
    league = synth.generate_league(cfg)
    report = synth.recover_theta(league)
    assert report.family == OLOGIT
    assert report.fraction_within(2.0) >= 0.85
    labels = [r.label for r in report.rows]
    assert "0|1" in labels and "1|3" in labels


def test_gaussian_league_recovery_is_sane():
    cfg = synth.LeagueConfig(seed=17, outcome_family=GAUSSIAN)
    league = synth.generate_league(cfg)
    report = synth.recover_theta(league)
    # rounding the latent outcome to integers adds noise; allow wide z-scores
    assert report.fraction_within(3.0) >= 0.8


def test_zero_coefficient_rejection_rate():
    # under a null DGP each coefficient's |z| exceeds 1.96 about 5% of the time
    zs = []
    for i in range(200):
        cfg = synth.LeagueConfig(seed=5000 + i, n_teams=10, n_seasons=1)
        cfg.true_theta = {k: 0.0 for k in cfg.true_theta}
        league = synth.generate_league(cfg)
        report = synth.recover_theta(league)
        zs.extend(r.z for r in report.rows)
    rate = float(np.mean(np.abs(zs) > 1.96))
    assert 0.02 <= rate <= 0.09, f"rejection rate {rate:.3f}"
