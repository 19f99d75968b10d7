"""Specification tests, association measures, descriptive summaries and fit
metrics for the three model families.

Conventions: the Shapiro-Wilk test uses Royston's approximation (n <= 5000);
the Kolmogorov-Smirnov test compares against a normal with the sample's own
mean and SD (estimated-parameter variant, anti-conservative); Jarque-Bera is
the textbook n*(skew^2/6 + (kurt-3)^2/24) statistic on chi-squared(2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
import scipy.stats as ss

from . import estimators as est
from .errors import (
    CollinearAugmentation,
    DegenerateCategories,
    DegenerateVariance,
    EmptyGroup,
    InvalidDesign,
    NonConvergence,
    NullFitFailure,
    RankDeficient,
    SampleSizeOutOfRange,
    Separation,
    TooFewObservations,
    TooManyFailures,
)
from .estimators import FitResult, GAUSSIAN, LOGIT, OLOGIT, fit_logit, fit_ologit, predict, sigmoid

CLASSICAL = "CLASSICAL"
BOOTSTRAP = "BOOTSTRAP"


@dataclass
class TestResult:
    name: str
    statistic: float
    df: float | tuple | None
    p_value: float
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "details": {k: v for k, v in self.details.items() if not isinstance(v, np.ndarray)},
        }


def report_json(results) -> str:
    """Serialize a batch of test results as a JSON array."""
    import json

    return json.dumps([r.as_dict() for r in results], sort_keys=True, indent=2)


# --- descriptive statistics -------------------------------------------------


@dataclass
class Summary:
    n: int
    minimum: float
    q1: float
    median: float
    mean: float
    q3: float
    maximum: float
    sd: float
    cv: float | None
    skewness: float
    skew_p: float | None
    kurtosis: float
    kurt_p: float | None


def describe(series: Sequence[float]) -> Summary:
    """Location, dispersion and moment-test summary of a numeric series.

    Moment tests (D'Agostino skewness, Anscombe-Glynn kurtosis) require
    n >= 8; their null is Gaussian moments. CV and test p-values degrade to
    None on degenerate input.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 2:
        raise TooFewObservations(f"need n >= 2, got {n}")
    sd = float(np.std(x, ddof=1))
    mean = float(np.mean(x))
    cv = sd / mean if (sd > 0 and mean != 0) else None
    skewness = float(ss.skew(x)) if sd > 0 else 0.0
    kurtosis = float(ss.kurtosis(x, fisher=False)) if sd > 0 else 0.0
    skew_p = kurt_p = None
    if sd > 0 and n >= 8:
        try:
            skew_p = float(ss.skewtest(x).pvalue)
        except ValueError:
            skew_p = None
        try:
            kurt_p = float(ss.kurtosistest(x).pvalue)
        except ValueError:
            kurt_p = None
    return Summary(
        n=n,
        minimum=float(x.min()),
        q1=float(np.percentile(x, 25)),
        median=float(np.median(x)),
        mean=mean,
        q3=float(np.percentile(x, 75)),
        maximum=float(x.max()),
        sd=sd,
        cv=cv,
        skewness=skewness,
        skew_p=skew_p,
        kurtosis=kurtosis,
        kurt_p=kurt_p,
    )


NUMERIC = "NUMERIC"
BINARY = "BINARY"
ORDINAL = "ORDINAL"


def associations(x: Sequence[float], y: Sequence[float], y_kind: str = NUMERIC) -> list[TestResult]:
    """Association measures between a covariate and a response.

    NUMERIC: Pearson and Spearman with t-based p-values. BINARY: point-
    biserial correlation plus a chi-squared independence test on the
    contingency of (discretized) x against y. ORDINAL: Kruskal-Wallis across
    the response categories.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 3:
        raise ValueError("equal lengths >= 3 required")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DegenerateVariance("constant input")

    if y_kind == NUMERIC:
        pearson = ss.pearsonr(x, y)
        spearman = ss.spearmanr(x, y)
        return [
            TestResult("pearson", float(pearson.statistic), x.size - 2, float(pearson.pvalue)),
            TestResult("spearman", float(spearman.statistic), x.size - 2, float(spearman.pvalue)),
        ]
    if y_kind == BINARY:
        pb = ss.pointbiserialr(y.astype(int), x)
        # crosstab of x (quartile-binned when effectively continuous) against y
        if np.unique(x).size > 12:
            bins = pd.qcut(x, 4, duplicates="drop", labels=False)
        else:
            bins = x
        table = pd.crosstab(pd.Series(bins), pd.Series(y.astype(int))).to_numpy()
        chi2 = ss.chi2_contingency(table)
        return [
            TestResult("point_biserial", float(pb.statistic), x.size - 2, float(pb.pvalue)),
            TestResult("chi2_independence", float(chi2.statistic), float(chi2.dof), float(chi2.pvalue)),
        ]
    if y_kind == ORDINAL:
        groups = [x[y == cat] for cat in np.unique(y)]
        if len(groups) < 2:
            raise DegenerateVariance("fewer than two response categories")
        kw = ss.kruskal(*groups)
        return [TestResult("kruskal_wallis", float(kw.statistic), len(groups) - 1, float(kw.pvalue))]
    raise ValueError(f"unknown y_kind {y_kind!r}")


# --- residual normality -----------------------------------------------------


def normality_tests(residuals: Sequence[float]) -> dict[str, TestResult]:
    """Shapiro-Wilk, Kolmogorov-Smirnov (estimated parameters) and Jarque-Bera."""
    x = np.asarray(residuals, dtype=float)
    n = x.size
    if not 8 <= n <= 5000:
        raise SampleSizeOutOfRange(f"Shapiro-Wilk needs 8 <= n <= 5000, got {n}")
    sw = ss.shapiro(x)
    ks = ss.kstest(x, "norm", args=(float(x.mean()), float(x.std(ddof=1))))
    skew = float(ss.skew(x))
    kurt = float(ss.kurtosis(x, fisher=False))
    jb_stat = n * (skew**2 / 6.0 + (kurt - 3.0) ** 2 / 24.0)
    return {
        "SW": TestResult("shapiro_wilk", float(sw.statistic), None, float(sw.pvalue)),
        "KS": TestResult("kolmogorov_smirnov", float(ks.statistic), None, float(ks.pvalue)),
        "JB": TestResult("jarque_bera", float(jb_stat), 2, float(ss.chi2.sf(jb_stat, 2))),
    }


# --- regression specification tests ------------------------------------------


def _r_squared(X: np.ndarray, y: np.ndarray) -> float:
    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    tss = float(np.sum((y - y.mean()) ** 2))
    if tss == 0:
        return 0.0
    return 1.0 - float(resid @ resid) / tss


def breusch_pagan(X: np.ndarray, y: np.ndarray, fit: FitResult) -> TestResult:
    """LM = n * R^2 of the squared residuals regressed on the design."""
    if fit.family != GAUSSIAN:
        raise ValueError("Breusch-Pagan applies to gaussian fits")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    resid = y - X @ fit.coef
    if np.allclose(resid, 0.0):
        return TestResult("breusch_pagan", 0.0, max(X.shape[1] - 1, 1), 1.0)
    r2 = _r_squared(X, resid**2)
    df = max(X.shape[1] - 1, 1)
    stat = X.shape[0] * r2
    return TestResult("breusch_pagan", float(stat), df, float(ss.chi2.sf(stat, df)))


def reset_test(fit: FitResult, X: np.ndarray, y: np.ndarray, max_power: int = 3) -> TestResult:
    """Ramsey RESET: add powers 2..max_power of the fitted index.

    GAUSSIAN uses an F test on the augmented regression; LOGIT a likelihood
    ratio chi-squared with max_power - 1 degrees of freedom.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    eta = X @ fit.coef
    if np.ptp(eta) == 0.0:
        raise CollinearAugmentation("fitted values are constant")
    powers = np.column_stack([eta**k for k in range(2, max_power + 1)])
    # standardize to keep the augmented design well conditioned
    powers = (powers - powers.mean(axis=0)) / powers.std(axis=0)
    X_aug = np.column_stack([X, powers])
    q = powers.shape[1]
    if np.linalg.matrix_rank(X_aug) < X_aug.shape[1]:
        raise CollinearAugmentation("power terms are collinear with the design")

    if fit.family == GAUSSIAN:
        resid0 = y - X @ fit.coef
        rss0 = float(resid0 @ resid0)
        coef1, _, _, _ = np.linalg.lstsq(X_aug, y, rcond=None)
        resid1 = y - X_aug @ coef1
        rss1 = float(resid1 @ resid1)
        df2 = n - X_aug.shape[1]
        if df2 <= 0 or rss1 <= 0:
            raise CollinearAugmentation("augmented regression is saturated")
        stat = ((rss0 - rss1) / q) / (rss1 / df2)
        return TestResult("reset", float(stat), (q, df2), float(ss.f.sf(stat, q, df2)))
    if fit.family == LOGIT:
        aug = fit_logit(X_aug, y)
        stat = 2.0 * (aug.loglik - fit.loglik)
        stat = max(stat, 0.0)
        return TestResult("reset", float(stat), q, float(ss.chi2.sf(stat, q)))
    raise ValueError("RESET applies to gaussian or logit fits")


def _quantile_groups(scores: np.ndarray, groups: int, min_groups: int) -> tuple[np.ndarray, int]:
    """Assign observations to near-equal groups by score; ties collapse bins."""
    if np.unique(scores).size < 2:
        raise EmptyGroup("scores are all identical")
    binned = pd.qcut(scores, groups, labels=False, duplicates="drop")
    binned = np.asarray(binned)
    effective = int(binned.max()) + 1
    if effective < min_groups:
        raise EmptyGroup(f"only {effective} distinct score groups")
    return binned, effective


def hosmer_lemeshow(
    fit: FitResult, X: np.ndarray, y: np.ndarray, groups: int = 10, generalized: bool = False
) -> TestResult:
    """Hosmer-Lemeshow C statistic on deciles of fitted probability.

    The generalized (ordinal) version groups on the expected score
    sum(category * P) and sums (O-E)^2/E over groups and categories with
    (g-2)(J-1) degrees of freedom.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n = X.shape[0]
    if n < 10 * groups:
        raise ValueError(f"need n >= {10 * groups} for {groups} groups")
    if fit.family == LOGIT and not generalized:
        p_hat = sigmoid(X @ fit.coef)
        binned, g = _quantile_groups(p_hat, groups, min_groups=3)
        stat = 0.0
        for b in range(g):
            mask = binned == b
            n_g = int(mask.sum())
            obs = float(np.sum(y[mask]))
            exp = float(np.sum(p_hat[mask]))
            pbar = exp / n_g
            denom = n_g * pbar * (1.0 - pbar)
            if denom <= 0:
                raise EmptyGroup(f"group {b} has degenerate expected frequency")
            stat += (obs - exp) ** 2 / denom
        df = g - 2
        return TestResult(
            "hosmer_lemeshow", float(stat), df, float(ss.chi2.sf(stat, df)), {"groups": g}
        )
    if fit.family == OLOGIT or generalized:
        cats = np.asarray(fit.categories, dtype=float)
        probs = predict(fit, X)
        scores = probs @ cats
        binned, g = _quantile_groups(scores, groups, min_groups=3)
        stat = 0.0
        for b in range(g):
            mask = binned == b
            for j, cat in enumerate(cats):
                obs = float(np.sum(y[mask] == cat))
                expc = float(np.sum(probs[mask, j]))
                if expc <= 0:
                    raise EmptyGroup(f"group {b} has zero expected count for category {cat}")
                stat += (obs - expc) ** 2 / expc
        df = (g - 2) * (len(cats) - 1)
        return TestResult(
            "hosmer_lemeshow_generalized", float(stat), df, float(ss.chi2.sf(stat, df)), {"groups": g}
        )
    raise ValueError("Hosmer-Lemeshow applies to logit or ordered-logit fits")


def lipsitz_test(fit: FitResult, X: np.ndarray, y: np.ndarray, groups: int = 10) -> TestResult:
    """Likelihood-ratio test adding score-group indicators to an ordered logit."""
    if fit.family != OLOGIT:
        raise ValueError("Lipsitz test applies to ordered-logit fits")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n = X.shape[0]
    if n < 10 * groups:
        raise ValueError(f"need n >= {10 * groups} for {groups} groups")
    cats = np.asarray(fit.categories, dtype=float)
    scores = predict(fit, X) @ cats
    binned, g = _quantile_groups(scores, groups, min_groups=2)
    dummies = np.column_stack([(binned == b).astype(float) for b in range(1, g)])
    X_aug = np.column_stack([X, dummies])
    if np.linalg.matrix_rank(X_aug) < X_aug.shape[1]:
        raise EmptyGroup("group indicators collinear with the design")
    aug = fit_ologit(X_aug, y, categories=fit.categories)
    stat = max(2.0 * (aug.loglik - fit.loglik), 0.0)
    df = g - 1
    return TestResult("lipsitz", float(stat), df, float(ss.chi2.sf(stat, df)), {"groups": g})


# --- Brant proportional-odds test --------------------------------------------


def _stacked_binary_fits(X1: np.ndarray, y: np.ndarray, cats: Sequence) -> list[FitResult]:
    fits = []
    for cat in cats[:-1]:
        z = (np.asarray(y) > cat).astype(float)
        fits.append(fit_logit(X1, z))
    return fits


def brant_test(
    fit: FitResult,
    X: np.ndarray,
    y: np.ndarray,
    mode: str = CLASSICAL,
    B: int = 200,
    seed: int = 0,
) -> TestResult:
    """Wald test of coefficient equality across cutpoint-specific binary logits.

    CLASSICAL assembles the joint covariance of the stacked estimates from
    the fitted cutpoint probabilities; BOOTSTRAP replaces it with the
    empirical covariance over case resamples. The omnibus statistic is
    chi-squared with (J-2)*p degrees of freedom; per-variable components have
    J-2 each.
    """
    if fit.family != OLOGIT:
        raise ValueError("Brant test applies to ordered-logit fits")
    cats = list(fit.categories)
    J = len(cats)
    p = len(fit.labels)
    if J <= 2:
        raise DegenerateCategories("the Brant contrast is empty for J <= 2 categories")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n = X.shape[0]
    X1 = np.column_stack([np.ones(n), X])
    m = J - 1  # number of cutpoint fits
    k = p + 1  # parameters per binary fit, intercept first

    fits = _stacked_binary_fits(X1, y, cats)
    beta = np.concatenate([f.coef for f in fits])

    if mode == CLASSICAL:
        pis = [sigmoid(X1 @ f.coef) for f in fits]
        infos = [np.linalg.inv(X1.T @ (X1 * (pi * (1 - pi))[:, None])) for pi in pis]
        V = np.zeros((m * k, m * k))
        for j in range(m):
            for l in range(j, m):
                w = pis[l] * (1.0 - pis[j])
                middle = X1.T @ (X1 * w[:, None])
                block = infos[j] @ middle @ infos[l]
                V[j * k : (j + 1) * k, l * k : (l + 1) * k] = block
                V[l * k : (l + 1) * k, j * k : (j + 1) * k] = block.T
        n_failed = 0
    elif mode == BOOTSTRAP:
        children = np.random.SeedSequence(seed).spawn(B)
        rows: list[np.ndarray | None] = []
        failed = 0
        for b in range(B):
            rng = np.random.default_rng(children[b])
            idx = rng.integers(0, n, size=n)
            try:
                fits_b = _stacked_binary_fits(X1[idx], y[idx], cats)
                rows.append(np.concatenate([f.coef for f in fits_b]))
            except (Separation, NonConvergence, RankDeficient, InvalidDesign, np.linalg.LinAlgError):
                rows.append(None)
                failed += 1
        if failed > 0.2 * B:
            raise TooManyFailures(f"{failed} of {B} bootstrap replicates failed")
        good = np.array([r for r in rows if r is not None])
        median = np.median(good, axis=0)
        reps = np.array([r if r is not None else median for r in rows])
        centered = reps - reps.mean(axis=0)
        V = centered.T @ centered / (B - 1)
        n_failed = failed
    else:
        raise ValueError(f"unknown mode {mode!r}")

    # successive differences of the slope blocks (intercepts excluded)
    D = np.zeros(((m - 1) * p, m * k))
    for j in range(m - 1):
        for i in range(p):
            D[j * p + i, j * k + 1 + i] = 1.0
            D[j * p + i, (j + 1) * k + 1 + i] = -1.0
    delta = D @ beta
    cov = D @ V @ D.T
    stat = float(delta @ np.linalg.solve(cov, delta))
    df = (J - 2) * p
    per_variable = {}
    for i, label in enumerate(fit.labels):
        rows_i = [j * p + i for j in range(m - 1)]
        d_i = delta[rows_i]
        c_i = cov[np.ix_(rows_i, rows_i)]
        s_i = float(d_i @ np.linalg.solve(c_i, d_i))
        per_variable[label] = (s_i, float(ss.chi2.sf(s_i, J - 2)))
    return TestResult(
        "brant",
        stat,
        df,
        float(ss.chi2.sf(stat, df)),
        {"mode": mode, "per_variable": per_variable, "n_failed": n_failed},
    )


# --- fit metrics --------------------------------------------------------------


@dataclass
class FitMetrics:
    aic: float
    bic: float
    deviance: float
    r2: float | None = None
    adj_r2: float | None = None
    mcfadden_r2: float | None = None
    nagelkerke_r2: float | None = None
    accuracy: float | None = None
    sensitivity: float | list[float] | None = None
    specificity: float | list[float] | None = None
    precision: float | list[float] | None = None
    f1: float | list[float] | None = None


def _binary_confusion(y: np.ndarray, pred: np.ndarray) -> tuple[float, float, float, float, float]:
    tp = float(np.sum((pred == 1) & (y == 1)))
    tn = float(np.sum((pred == 0) & (y == 0)))
    fp = float(np.sum((pred == 1) & (y == 0)))
    fn = float(np.sum((pred == 0) & (y == 1)))
    acc = (tp + tn) / y.size
    sens = tp / (tp + fn) if tp + fn > 0 else float("nan")
    spec = tn / (tn + fp) if tn + fp > 0 else float("nan")
    prec = tp / (tp + fp) if tp + fp > 0 else float("nan")
    f1 = 2 * prec * sens / (prec + sens) if prec + sens > 0 else 0.0
    return acc, sens, spec, prec, f1


def _null_loglik(fit: FitResult, y: np.ndarray) -> float:
    n = y.size
    try:
        if fit.family == GAUSSIAN:
            rss0 = float(np.sum((y - y.mean()) ** 2))
            if rss0 <= 0:
                raise NullFitFailure("response is constant")
            return -0.5 * n * (math.log(2.0 * math.pi * rss0 / n) + 1.0)
        if fit.family == LOGIT:
            pbar = float(np.mean(y))
            if pbar in (0.0, 1.0):
                raise NullFitFailure("response has one class")
            return n * (pbar * math.log(pbar) + (1 - pbar) * math.log(1 - pbar))
        null = fit_ologit(np.empty((n, 0)), y, categories=fit.categories)
        return null.loglik
    except (InvalidDesign, NonConvergence) as exc:
        raise NullFitFailure(str(exc)) from exc


def fit_metrics(fit: FitResult, X: np.ndarray, y: np.ndarray, threshold: float = 0.5) -> FitMetrics:
    """Information criteria, pseudo-R2 and classification metrics.

    OLOGIT classification metrics are one-vs-rest per category, reported in
    ascending category order.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = fit.n
    p = fit.n_params
    aic = -2.0 * fit.loglik + 2.0 * p
    bic = -2.0 * fit.loglik + p * math.log(n)

    if fit.family == GAUSSIAN:
        resid = y - X @ fit.coef
        rss = float(resid @ resid)
        tss = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - rss / tss if tss > 0 else 0.0
        k = len(fit.coef)
        adj = 1.0 - (1.0 - r2) * (n - 1) / (n - k)
        ll0 = _null_loglik(fit, y)
        mcf = 1.0 - fit.loglik / ll0 if ll0 != 0 else float("nan")
        nag = _nagelkerke(fit.loglik, ll0, n)
        return FitMetrics(aic=aic, bic=bic, deviance=rss, r2=r2, adj_r2=adj, mcfadden_r2=mcf, nagelkerke_r2=nag)

    ll0 = _null_loglik(fit, y)
    mcf = 1.0 - fit.loglik / ll0 if ll0 != 0 else float("nan")
    nag = _nagelkerke(fit.loglik, ll0, n)
    deviance = -2.0 * fit.loglik

    if fit.family == LOGIT:
        pred = (sigmoid(X @ fit.coef) >= threshold).astype(float)
        acc, sens, spec, prec, f1 = _binary_confusion(y, pred)
        return FitMetrics(
            aic=aic,
            bic=bic,
            deviance=deviance,
            mcfadden_r2=mcf,
            nagelkerke_r2=nag,
            accuracy=acc,
            sensitivity=sens,
            specificity=spec,
            precision=prec,
            f1=f1,
        )

    cats = np.asarray(fit.categories, dtype=float)
    probs = predict(fit, X)
    pred_cat = cats[np.argmax(probs, axis=1)]
    acc = float(np.mean(pred_cat == y))
    sens, spec, prec, f1 = [], [], [], []
    for cat in cats:
        yy = (y == cat).astype(int)
        pp = (pred_cat == cat).astype(int)
        _, se, sp, pr, f = _binary_confusion(yy, pp)
        sens.append(se)
        spec.append(sp)
        prec.append(pr)
        f1.append(f)
    return FitMetrics(
        aic=aic,
        bic=bic,
        deviance=deviance,
        mcfadden_r2=mcf,
        nagelkerke_r2=nag,
        accuracy=acc,
        sensitivity=sens,
        specificity=spec,
        precision=prec,
        f1=f1,
    )


def _nagelkerke(ll1: float, ll0: float, n: int) -> float:
    denom = 1.0 - math.exp(2.0 * ll0 / n)
    if denom == 0:
        return float("nan")
    return (1.0 - math.exp(2.0 * (ll0 - ll1) / n)) / denom
