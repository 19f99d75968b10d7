import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from calcio import estimators as est
from calcio.errors import (
    InvalidDesign,
    LabelMismatch,
    LeverageOne,
    RankDeficient,
    Separation,
    TooManyFailures,
)
from calcio.estimators import fit_logit, fit_ologit, fit_ols, sigmoid


def test_ols_exact_fit():
    rng = np.random.default_rng(0)
    X = np.column_stack([np.ones(20), rng.normal(size=(20, 2))])
    beta = np.array([1.0, -2.0, 0.5])
    fit = fit_ols(X, X @ beta)
    assert np.allclose(fit.coef, beta)
    resid = X @ beta - X @ fit.coef
    assert np.max(np.abs(resid)) < 1e-12
    assert fit.sigma2 == pytest.approx(0.0, abs=1e-24)


def test_ols_intercept_only_is_mean():
    y = np.array([1.0, 2.0, 4.0, 9.0])
    fit = fit_ols(np.ones((4, 1)), y)
    assert fit.coef[0] == pytest.approx(y.mean())


def test_ols_normal_equations_oracle():
    rng = np.random.default_rng(5)
    for _ in range(20):
        X = np.column_stack([np.ones(50), rng.normal(size=(50, 5))])
        y = rng.normal(size=50)
        fit = fit_ols(X, y)
        oracle = np.linalg.solve(X.T @ X, X.T @ y)
        assert np.max(np.abs(fit.coef - oracle)) < 1e-8


def test_ols_rank_deficient_reports_columns():
    rng = np.random.default_rng(1)
    x = rng.normal(size=30)
    X = np.column_stack([np.ones(30), x, 2 * x])
    with pytest.raises(RankDeficient) as err:
        fit_ols(X, rng.normal(size=30), labels=["(Intercept)", "a", "b"])
    assert err.value.columns  # names the dependent set


def test_ols_scale_equivariance():
    rng = np.random.default_rng(2)
    X = np.column_stack([np.ones(40), rng.normal(size=(40, 3))])
    y = rng.normal(size=40)
    fit = fit_ols(X, y)
    X2 = X.copy()
    X2[:, 1] *= 10.0
    fit2 = fit_ols(X2, y)
    assert fit2.coef[1] == pytest.approx(fit.coef[1] / 10.0, abs=1e-12)
    assert np.max(np.abs(X @ fit.coef - X2 @ fit2.coef)) < 1e-10


def test_logit_balanced_slope_zero():
    X = np.column_stack([np.ones(40), np.repeat([0.0, 1.0], 20)])
    y = np.tile([0.0, 1.0], 20)  # P(y=1) = 0.5 in both cells
    fit = fit_logit(X, y)
    assert abs(fit.coef[1]) < 1e-8


def test_logit_separation_detected():
    x = np.linspace(-2, 2, 30)
    y = (x > 0).astype(float)
    with pytest.raises(Separation):
        fit_logit(np.column_stack([np.ones(30), x]), y)


def test_logit_two_by_two_log_odds_oracle():
    # counts: x=0: 30 of 100 success; x=1: 60 of 80 success
    x = np.concatenate([np.zeros(100), np.ones(80)])
    y = np.concatenate([np.ones(30), np.zeros(70), np.ones(60), np.zeros(20)])
    fit = fit_logit(np.column_stack([np.ones(180), x]), y)
    log_or = math.log((60 / 20) / (30 / 70))
    assert fit.coef[1] == pytest.approx(log_or, abs=1e-8)
    assert fit.coef[0] == pytest.approx(math.log(30 / 70), abs=1e-8)


def test_logit_score_matches_finite_differences():
    rng = np.random.default_rng(3)
    for _ in range(5):
        n, p = 40, 3
        X = rng.normal(size=(n, p))
        y = (rng.uniform(size=n) < 0.5).astype(float)
        beta = rng.normal(size=p) * 0.5

        def loglik(b):
            eta = X @ b
            return float(np.sum(y * eta - np.logaddexp(0.0, eta)))

        grad = X.T @ (y - sigmoid(X @ beta))
        eps = 1e-6
        for j in range(p):
            step = np.zeros(p)
            step[j] = eps
            fd = (loglik(beta + step) - loglik(beta - step)) / (2 * eps)
            assert abs(grad[j] - fd) / (1 + abs(fd)) < 1e-6


def test_ologit_score_matches_finite_differences():
    rng = np.random.default_rng(4)
    n, p = 60, 2
    X = rng.normal(size=(n, p))
    y = rng.choice([0, 1, 3], size=n, p=[0.3, 0.3, 0.4])
    kidx = np.searchsorted(np.array([0, 1, 3]), y)
    theta = np.array([0.3, -0.2])
    alpha = np.array([-0.6, 0.5])
    grad, _ = est._ologit_score_hess(theta, alpha, X, kidx, 3)
    v0 = np.concatenate([theta, alpha])
    eps = 1e-6
    for j in range(4):
        step = np.zeros(4)
        step[j] = eps
        up = est._ologit_loglik((v0 + step)[:p], (v0 + step)[p:], X, kidx, 3)
        dn = est._ologit_loglik((v0 - step)[:p], (v0 - step)[p:], X, kidx, 3)
        fd = (up - dn) / (2 * eps)
        assert abs(grad[j] - fd) / (1 + abs(fd)) < 1e-6


def test_ologit_threshold_probabilities():
    # with zero covariates the thresholds fix the category probabilities
    fit = est.FitResult(
        family=est.OLOGIT,
        labels=[],
        coef=np.zeros(0),
        loglik=0.0,
        vcov_model=np.zeros((2, 2)),
        n=1,
        n_params=2,
        converged=True,
        iterations=0,
        thresholds=np.array([-1.54, 0.17]),
        threshold_labels=["0|1", "1|3"],
        categories=(0, 1, 3),
    )
    probs = est.predict(fit, np.zeros(0))
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(probs, [0.177, 0.366, 0.458], atol=1e-3)


def test_ologit_binary_reduction():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(200, 2))
    y = (rng.uniform(size=200) < sigmoid(0.3 + X @ np.array([0.8, -0.5]))).astype(float)
    logit = fit_logit(np.column_stack([np.ones(200), X]), y)
    ologit = fit_ologit(X, y, categories=(0, 1))
    assert np.max(np.abs(logit.coef[1:] - ologit.coef)) < 1e-6
    assert ologit.thresholds[0] == pytest.approx(-logit.coef[0], abs=1e-6)


def test_ologit_rejects_intercept_column():
    X = np.column_stack([np.ones(30), np.linspace(0, 1, 30)])
    y = np.tile([0, 1, 3], 10)
    with pytest.raises(InvalidDesign):
        fit_ologit(X, y)


def test_gradient_at_optimum_small():
    rng = np.random.default_rng(7)
    n = 300
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    y_gauss = X @ np.array([1.0, 0.5, -0.3]) + rng.normal(size=n)
    ols = fit_ols(X, y_gauss)
    grad = X.T @ (y_gauss - X @ ols.coef) / ols.sigma2
    assert np.max(np.abs(grad)) < 1e-6

    y_bin = (rng.uniform(size=n) < sigmoid(X @ np.array([0.2, 0.7, -0.4]))).astype(float)
    logit = fit_logit(X, y_bin)
    assert np.max(np.abs(X.T @ (y_bin - sigmoid(X @ logit.coef)))) < 1e-6

    Xo = X[:, 1:]
    latent = Xo @ np.array([0.6, -0.4]) + rng.logistic(size=n)
    y_ord = np.where(latent < -0.5, 0, np.where(latent < 0.5, 1, 3))
    olog = fit_ologit(Xo, y_ord)
    kidx = np.searchsorted(np.array(olog.categories), y_ord)
    grad, _ = est._ologit_score_hess(olog.coef, olog.thresholds, Xo, kidx, 3)
    assert np.max(np.abs(grad)) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_ologit_probabilities_simplex(seed):
    rng = np.random.default_rng(seed)
    n = 120
    X = rng.normal(size=(n, 2))
    latent = X @ np.array([0.5, -0.5]) + rng.logistic(size=n)
    y = np.where(latent < -0.7, 0, np.where(latent < 0.7, 1, 3))
    if len(np.unique(y)) < 3:
        return
    fit = fit_ologit(X, y)
    probs = est.predict(fit, X)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(probs > 0) and np.all(probs < 1)
    assert np.all(np.diff(fit.thresholds) > 0)


def test_affine_reparameterization_invariance():
    rng = np.random.default_rng(8)
    n = 250
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    y = (rng.uniform(size=n) < sigmoid(X @ np.array([0.1, 0.6, -0.3]))).astype(float)
    base = fit_logit(X, y)
    X2 = X.copy()
    X2[:, 1] = 3.0 + 2.0 * X[:, 1]
    shifted = fit_logit(X2, y)
    p1 = sigmoid(X @ base.coef)
    p2 = sigmoid(X2 @ shifted.coef)
    assert np.max(np.abs(p1 - p2)) < 1e-10

    Xo = X[:, 1:]
    latent = Xo @ np.array([0.7, -0.5]) + rng.logistic(size=n)
    y_ord = np.where(latent < -0.6, 0, np.where(latent < 0.6, 1, 3))
    base_o = fit_ologit(Xo, y_ord)
    Xo2 = Xo.copy()
    Xo2[:, 0] = -1.0 + 0.5 * Xo[:, 0]
    shifted_o = fit_ologit(Xo2, y_ord)
    pr1 = est.predict(base_o, Xo)
    pr2 = est.predict(shifted_o, Xo2)
    assert np.max(np.abs(pr1 - pr2)) < 1e-10


# --- HC3 ---------------------------------------------------------------------


def _hc3_gaussian_oracle(X, y):
    """Textbook formula, written with explicit loops."""
    n, p = X.shape
    xtx_inv = np.linalg.inv(X.T @ X)
    beta = xtx_inv @ X.T @ y
    resid = y - X @ beta
    meat = np.zeros((p, p))
    for i in range(n):
        xi = X[i]
        h_ii = float(xi @ xtx_inv @ xi)
        meat += np.outer(xi, xi) * (resid[i] ** 2) / (1.0 - h_ii) ** 2
    return xtx_inv @ meat @ xtx_inv


def test_hc3_hand_dataset_oracle():
    X = np.column_stack([np.ones(5), np.array([1.0, 2.0, 3.0, 4.0, 5.0])])
    y = np.array([2.0, 1.0, 4.0, 3.0, 7.0])
    fit = fit_ols(X, y)
    vcov = est.hc3_vcov(X, y, fit)
    oracle = _hc3_gaussian_oracle(X, y)
    assert np.max(np.abs(vcov - oracle)) < 1e-10


def test_hc3_matches_model_vcov_homoskedastic():
    rng = np.random.default_rng(9)
    n = 40_000
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    y = X @ np.array([1.0, 0.5, -0.5]) + rng.normal(size=n)
    fit = fit_ols(X, y)
    hc3 = est.hc3_vcov(X, y, fit)
    ratio = np.diag(hc3) / np.diag(fit.vcov_model)
    assert np.all(np.abs(ratio - 1.0) < 0.10)


def test_hc3_leverage_one():
    # a dummy column selecting a single observation pins its fit exactly
    X = np.column_stack([np.ones(10), np.eye(10)[:, 0]])
    y = np.arange(10.0)
    fit = fit_ols(X, y)
    with pytest.raises(LeverageOne):
        est.hc3_vcov(X, y, fit)


def test_hc3_logit_oracle():
    rng = np.random.default_rng(10)
    n = 200
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    y = (rng.uniform(size=n) < sigmoid(X @ np.array([0.2, 0.8, -0.6]))).astype(float)
    fit = fit_logit(X, y)
    vcov = est.hc3_vcov(X, y, fit)
    # scripted oracle with explicit loops
    mu = 1.0 / (1.0 + np.exp(-(X @ fit.coef)))
    w = mu * (1 - mu)
    info = np.zeros((3, 3))
    for i in range(n):
        info += w[i] * np.outer(X[i], X[i])
    bread = np.linalg.inv(info)
    meat = np.zeros((3, 3))
    for i in range(n):
        xi_w = X[i] * math.sqrt(w[i])
        h_ii = float(xi_w @ bread @ xi_w)
        meat += np.outer(X[i], X[i]) * (y[i] - mu[i]) ** 2 / (1.0 - h_ii) ** 2
    oracle = bread @ meat @ bread
    assert np.max(np.abs(vcov - oracle)) < 1e-10


# --- bootstrap -----------------------------------------------------------------


def test_bootstrap_exact_fit_zero_matrix():
    rng = np.random.default_rng(11)
    X = np.column_stack([np.ones(30), rng.normal(size=30)])
    y = X @ np.array([2.0, -1.0])
    boot = est.bootstrap_vcov(fit_ols, X, y, B=100, seed=1)
    assert np.max(np.abs(boot.vcov)) < 1e-20
    assert boot.n_failed == 0


def test_bootstrap_se_close_to_analytic():
    rng = np.random.default_rng(12)
    n = 200
    X = np.column_stack([np.ones(n), rng.normal(size=n)])
    y = X @ np.array([1.0, 0.8]) + rng.normal(size=n)
    fit = fit_ols(X, y)
    boot = est.bootstrap_vcov(fit_ols, X, y, B=1000, seed=2)
    analytic = math.sqrt(fit.vcov_model[1, 1])
    bootstrap_se = math.sqrt(boot.vcov[1, 1])
    assert abs(bootstrap_se - analytic) / analytic < 0.15


def test_bootstrap_deterministic_and_seed_sensitive():
    rng = np.random.default_rng(13)
    X = np.column_stack([np.ones(50), rng.normal(size=50)])
    y = X @ np.array([0.5, 1.0]) + rng.normal(size=50)
    b1 = est.bootstrap_vcov(fit_ols, X, y, B=120, seed=7)
    b2 = est.bootstrap_vcov(fit_ols, X, y, B=120, seed=7)
    b3 = est.bootstrap_vcov(fit_ols, X, y, B=120, seed=8)
    assert np.array_equal(b1.vcov, b2.vcov)
    assert np.array_equal(b1.replicates, b2.replicates)
    assert not np.array_equal(b1.vcov, b3.vcov)


def test_bootstrap_median_substitution_policy():
    rng = np.random.default_rng(14)
    X = np.column_stack([np.ones(40), rng.normal(size=40)])
    y = X @ np.array([1.0, 0.5]) + rng.normal(size=40)

    calls = {"n": 0}

    def flaky_fit(Xb, yb):
        calls["n"] += 1
        if calls["n"] % 10 == 0:  # deterministic 10% failure rate
            raise Separation("synthetic failure")
        return fit_ols(Xb, yb)

    boot = est.bootstrap_vcov(flaky_fit, X, y, B=100, seed=3)
    assert boot.n_failed == 10
    good = np.array([boot.replicates[i] for i in range(100) if i not in boot.failed_indices])
    median = np.median(good, axis=0)
    for i in boot.failed_indices:
        assert np.array_equal(boot.replicates[i], median)


def test_bootstrap_too_many_failures():
    def always_fail(Xb, yb):
        raise Separation("nope")

    X = np.ones((20, 1))
    y = np.arange(20.0)
    with pytest.raises(TooManyFailures):
        est.bootstrap_vcov(always_fail, X, y, B=100, seed=4)


# --- prediction and marginal effects -------------------------------------------


def test_predict_logit_at_zero():
    fit = est.FitResult(
        family=est.LOGIT,
        labels=["a", "b"],
        coef=np.array([1.0, -1.0]),
        loglik=0.0,
        vcov_model=np.eye(2),
        n=1,
        n_params=2,
        converged=True,
        iterations=1,
    )
    assert est.predict(fit, np.zeros(2)) == pytest.approx(0.5)
    assert est.predict(fit, {"a": 0.0, "b": 0.0}) == pytest.approx(0.5)
    with pytest.raises(LabelMismatch):
        est.predict(fit, np.zeros(3))
    with pytest.raises(LabelMismatch):
        est.predict(fit, {"a": 1.0})


def test_predict_gaussian_identity():
    fit = est.FitResult(
        family=est.GAUSSIAN,
        labels=["x"],
        coef=np.array([1.0]),
        loglik=0.0,
        vcov_model=np.eye(1),
        n=1,
        n_params=2,
        converged=True,
        iterations=0,
    )
    assert est.predict(fit, np.array([3.7])) == pytest.approx(3.7)


def _logit_fit_with(coef, labels):
    k = len(coef)
    return est.FitResult(
        family=est.LOGIT,
        labels=labels,
        coef=np.asarray(coef, dtype=float),
        loglik=0.0,
        vcov_model=np.eye(k),
        n=1,
        n_params=k,
        converged=True,
        iterations=1,
    )


def test_marginal_effects_at_mean():
    rng = np.random.default_rng(15)
    x = rng.normal(size=400)
    X = np.column_stack([x - x.mean()])  # mean exactly zero
    fit = _logit_fit_with([0.54], ["x"])
    at_mean = est.marginal_effects(fit, X, est.AT_MEAN)
    assert at_mean["x"] == pytest.approx(0.25 * 0.54, abs=1e-12)
    avg = est.marginal_effects(fit, X, est.AVERAGE)
    assert avg["x"] <= at_mean["x"]  # density is maximized at zero
    zero = est.marginal_effects(_logit_fit_with([0.0], ["x"]), X, est.AT_MEAN)
    assert zero["x"] == 0.0


def test_fit_result_json_round_trip():
    rng = np.random.default_rng(16)
    X = rng.normal(size=(100, 2))
    latent = X @ np.array([0.6, -0.4]) + rng.logistic(size=100)
    y = np.where(latent < -0.5, 0, np.where(latent < 0.5, 1, 3))
    fit = fit_ologit(X, y, labels=["a", "b"])
    restored = est.FitResult.from_json(fit.to_json())
    assert restored.family == fit.family
    assert np.allclose(restored.coef, fit.coef)
    assert np.allclose(restored.thresholds, fit.thresholds)
    assert restored.threshold_labels == fit.threshold_labels
    assert np.allclose(restored.vcov_model, fit.vcov_model)
    assert restored.n_params == fit.n_params
