"""Maximum-likelihood fitting of the three model families with model-based,
leverage-adjusted sandwich (HC3) and nonparametric-bootstrap covariance.

Families: GAUSSIAN (identity link), LOGIT (binary), OLOGIT (proportional
odds with ordered thresholds). Optimization is Newton with step-halving;
convergence is declared at gradient sup-norm < 1e-8.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    InvalidDesign,
    LabelMismatch,
    LeverageOne,
    NonConvergence,
    RankDeficient,
    Separation,
    TooManyFailures,
)

GAUSSIAN = "gaussian"
LOGIT = "logit"
OLOGIT = "ologit"

GRAD_TOL = 1e-8
MAX_ITER = 100
SEPARATION_BOUND = 30.0
INTERCEPT_LABEL = "(Intercept)"


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _default_labels(p: int) -> list[str]:
    return [f"x{j}" for j in range(p)]


@dataclass
class DesignMatrix:
    """A labeled design with its response; validated before fitting."""

    X: np.ndarray
    y: np.ndarray
    labels: list[str]

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise InvalidDesign("X must be n x p with matching response length")
        if len(self.labels) != self.X.shape[1]:
            raise InvalidDesign("one label per column required")
        if len(set(self.labels)) != len(self.labels):
            raise InvalidDesign("labels must be unique")
        if not np.all(np.isfinite(self.X)) or not np.all(np.isfinite(self.y)):
            raise InvalidDesign("design contains non-finite entries")
        for j, label in enumerate(self.labels):
            if label != INTERCEPT_LABEL and np.ptp(self.X[:, j]) == 0.0:
                raise InvalidDesign(f"column {label!r} is constant")


@dataclass
class FitResult:
    family: str
    labels: list[str]
    coef: np.ndarray
    loglik: float
    vcov_model: np.ndarray
    n: int
    n_params: int
    converged: bool
    iterations: int
    thresholds: np.ndarray | None = None
    threshold_labels: list[str] = field(default_factory=list)
    categories: tuple | None = None
    sigma2: float | None = None
    vcov_hc3: np.ndarray | None = None
    vcov_boot: np.ndarray | None = None
    boot_B: int | None = None
    boot_seed: int | None = None

    @property
    def params(self) -> np.ndarray:
        """Coefficients followed by thresholds (OLOGIT), matching vcov order."""
        if self.thresholds is None:
            return self.coef
        return np.concatenate([self.coef, self.thresholds])

    @property
    def param_labels(self) -> list[str]:
        return list(self.labels) + list(self.threshold_labels)

    def se(self, vcov: str = "model") -> np.ndarray:
        matrix = {"model": self.vcov_model, "hc3": self.vcov_hc3, "boot": self.vcov_boot}[vcov]
        if matrix is None:
            raise ValueError(f"{vcov} covariance not available")
        return np.sqrt(np.diag(matrix))

    def to_json(self) -> str:
        payload = {
            "family": self.family,
            "labels": self.labels,
            "coef": self.coef.tolist(),
            "thresholds": None if self.thresholds is None else self.thresholds.tolist(),
            "threshold_labels": self.threshold_labels,
            "vcov": self.vcov_model.ravel().tolist(),
            "loglik": self.loglik,
            "n": self.n,
            "p": self.n_params,
            "converged": self.converged,
            "B": self.boot_B,
            "seed": self.boot_seed,
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FitResult":
        d = json.loads(text)
        k = len(d["labels"]) + len(d["threshold_labels"])
        return cls(
            family=d["family"],
            labels=d["labels"],
            coef=np.array(d["coef"]),
            loglik=d["loglik"],
            vcov_model=np.array(d["vcov"]).reshape(k, k),
            n=d["n"],
            n_params=d["p"],
            converged=d["converged"],
            iterations=0,
            thresholds=None if d["thresholds"] is None else np.array(d["thresholds"]),
            threshold_labels=d["threshold_labels"],
            boot_B=d["B"],
            boot_seed=d["seed"],
        )


def _dependent_columns(X: np.ndarray, labels: Sequence[str]) -> list[str]:
    """Columns past the numerical rank under QR with column pivoting."""
    _, r, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0:
        return []
    tol = diag[0] * max(X.shape) * np.finfo(float).eps
    rank = int(np.sum(diag > tol))
    return [labels[j] for j in sorted(piv[rank:])]


def _check_rank(X: np.ndarray, labels: Sequence[str]) -> None:
    if X.shape[1] == 0:
        return
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise RankDeficient(_dependent_columns(X, labels))


def fit_ols(X: np.ndarray, y: np.ndarray, labels: Sequence[str] | None = None) -> FitResult:
    """Gaussian maximum likelihood (OLS); loglik uses the ML variance RSS/n."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    labels = list(labels) if labels is not None else _default_labels(p)
    if n <= p:
        raise InvalidDesign(f"need n > p, got n={n}, p={p}")
    _check_rank(X, labels)

    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    rss = float(resid @ resid)
    sigma2 = rss / (n - p)
    if rss > 0:
        loglik = -0.5 * n * (math.log(2.0 * math.pi * rss / n) + 1.0)
    else:
        loglik = math.inf
    xtx_inv = np.linalg.inv(X.T @ X)
    return FitResult(
        family=GAUSSIAN,
        labels=labels,
        coef=coef,
        loglik=loglik,
        vcov_model=sigma2 * xtx_inv,
        n=n,
        n_params=p + 1,  # sigma counts as an estimated parameter
        converged=True,
        iterations=0,
        sigma2=sigma2,
    )


def _logit_loglik(eta: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def fit_logit(X: np.ndarray, y: np.ndarray, labels: Sequence[str] | None = None) -> FitResult:
    """Binary logistic regression via Newton iterations with step-halving."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    labels = list(labels) if labels is not None else _default_labels(p)
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise InvalidDesign("logit response must be 0/1")
    if y.min() == y.max():
        raise InvalidDesign("both response classes must be present")
    _check_rank(X, labels)

    beta = np.zeros(p)
    loglik = _logit_loglik(X @ beta, y)
    converged = False
    iterations = 0
    for iterations in range(1, MAX_ITER + 1):
        eta = X @ beta
        mu = sigmoid(eta)
        grad = X.T @ (y - mu)
        if np.max(np.abs(grad)) < GRAD_TOL:
            converged = True
            break
        w = mu * (1.0 - mu)
        hess = X.T @ (X * w[:, None])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        scale = 1.0
        for _ in range(40):
            candidate = beta + scale * step
            cand_ll = _logit_loglik(X @ candidate, y)
            if cand_ll >= loglik - 1e-12:
                break
            scale *= 0.5
        beta = beta + scale * step
        loglik = _logit_loglik(X @ beta, y)

    if np.max(np.abs(beta)) > SEPARATION_BOUND:
        raise Separation(f"coefficient magnitude exceeds {SEPARATION_BOUND}; data look separated")
    if not converged:
        raise NonConvergence(f"logit did not converge in {MAX_ITER} iterations")

    mu = sigmoid(X @ beta)
    w = mu * (1.0 - mu)
    info = X.T @ (X * w[:, None])
    return FitResult(
        family=LOGIT,
        labels=labels,
        coef=beta,
        loglik=loglik,
        vcov_model=np.linalg.inv(info),
        n=n,
        n_params=p,
        converged=converged,
        iterations=iterations,
    )


def _ologit_parts(theta, alpha, X, kidx, J):
    """Per-observation category probabilities and link densities."""
    eta = X @ theta if theta.size else np.zeros(X.shape[0])
    edges = np.concatenate([[-np.inf], alpha, [np.inf]])
    upper = edges[kidx + 1] - eta
    lower = edges[kidx] - eta
    fu = sigmoid(upper)
    fl = sigmoid(lower)
    prob = np.clip(fu - fl, 1e-300, None)
    du = fu * (1.0 - fu)
    dl = fl * (1.0 - fl)
    return eta, prob, fu, fl, du, dl, upper, lower


def _ologit_loglik(theta, alpha, X, kidx, J) -> float:
    _, prob, *_ = _ologit_parts(theta, alpha, X, kidx, J)
    return float(np.sum(np.log(prob)))


def _ologit_score_hess(theta, alpha, X, kidx, J):
    n, p = X.shape
    m = J - 1
    _, prob, fu, fl, du, dl, upper, lower = _ologit_parts(theta, alpha, X, kidx, J)
    # derivative of the logistic density: f'(x) = f(x) (1 - 2 F(x))
    dpu = du * (1.0 - 2.0 * fu)
    dpl = dl * (1.0 - 2.0 * fl)

    num = -(du - dl)  # dP/deta
    g_eta = num / prob
    grad_theta = X.T @ g_eta if p else np.zeros(0)

    grad_alpha = np.zeros(m)
    upper_mask = [kidx == h for h in range(m)]  # alpha_h is the upper edge of category h
    lower_mask = [kidx == h + 1 for h in range(m)]  # and the lower edge of category h+1
    for h in range(m):
        grad_alpha[h] = np.sum(du[upper_mask[h]] / prob[upper_mask[h]]) - np.sum(
            dl[lower_mask[h]] / prob[lower_mask[h]]
        )

    # Hessian
    d_num_deta = dpu - dpl
    h_eta = d_num_deta / prob - (num / prob) ** 2
    H = np.zeros((p + m, p + m))
    if p:
        H[:p, :p] = X.T @ (X * h_eta[:, None])
    for h in range(m):
        um, lm = upper_mask[h], lower_mask[h]
        # cross eta x alpha_h
        cross = np.zeros(n)
        cross[um] = (-dpu[um] * prob[um] - num[um] * du[um]) / prob[um] ** 2
        cross[lm] = (dpl[lm] * prob[lm] + num[lm] * dl[lm]) / prob[lm] ** 2
        if p:
            H[:p, p + h] = X.T @ cross
            H[p + h, :p] = H[:p, p + h]
        # alpha_h x alpha_h
        H[p + h, p + h] = np.sum((dpu[um] * prob[um] - du[um] ** 2) / prob[um] ** 2) + np.sum(
            (-dpl[lm] * prob[lm] - dl[lm] ** 2) / prob[lm] ** 2
        )
        # alpha_h x alpha_{h-1}: both edges bound category h
        if h > 0:
            both = kidx == h
            val = np.sum(du[both] * dl[both] / prob[both] ** 2)
            H[p + h, p + h - 1] += val
            H[p + h - 1, p + h] += val
    grad = np.concatenate([grad_theta, grad_alpha])
    return grad, H


def fit_ologit(
    X: np.ndarray,
    y: np.ndarray,
    categories: Sequence = (0, 1, 3),
    labels: Sequence[str] | None = None,
) -> FitResult:
    """Proportional-odds logistic regression, P(y <= h) = g(pi_h - X theta).

    The design must not contain an intercept column; the thresholds absorb
    it. Categories absent from ``y`` are dropped before fitting.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n, p = X.shape
    labels = list(labels) if labels is not None else _default_labels(p)
    observed = [c for c in categories if np.any(y == c)]
    J = len(observed)
    if J < 2:
        raise InvalidDesign("need at least two observed categories")
    if not np.all(np.isin(y, observed)):
        raise InvalidDesign(f"response outside categories {tuple(categories)}")
    for j in range(p):
        if np.ptp(X[:, j]) == 0.0:
            raise InvalidDesign("intercept-like constant column; thresholds absorb the intercept")
    if p:
        _check_rank(X, labels)

    kidx = np.searchsorted(np.asarray(observed), y)
    cum = np.cumsum([np.mean(kidx == k) for k in range(J - 1)])
    cum = np.clip(cum, 1e-6, 1 - 1e-6)
    alpha = np.log(cum / (1.0 - cum))
    theta = np.zeros(p)

    loglik = _ologit_loglik(theta, alpha, X, kidx, J)
    converged = False
    iterations = 0
    for iterations in range(1, MAX_ITER + 1):
        grad, H = _ologit_score_hess(theta, alpha, X, kidx, J)
        if np.max(np.abs(grad)) < GRAD_TOL:
            converged = True
            break
        try:
            step = np.linalg.solve(-H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(-H, grad, rcond=None)[0]
        scale = 1.0
        for _ in range(40):
            cand_theta = theta + scale * step[:p]
            cand_alpha = alpha + scale * step[p:]
            if np.all(np.diff(cand_alpha) > 0) or (J - 1) == 1:
                cand_ll = _ologit_loglik(cand_theta, cand_alpha, X, kidx, J)
                if cand_ll >= loglik - 1e-12:
                    break
            scale *= 0.5
        theta = theta + scale * step[:p]
        alpha = alpha + scale * step[p:]
        loglik = _ologit_loglik(theta, alpha, X, kidx, J)

    if p and np.max(np.abs(theta)) > SEPARATION_BOUND:
        raise Separation(f"coefficient magnitude exceeds {SEPARATION_BOUND}; data look separated")
    if not converged:
        raise NonConvergence(f"ordered logit did not converge in {MAX_ITER} iterations")
    if np.any(np.diff(alpha) <= 0):
        raise NonConvergence("thresholds not strictly ordered at the reported optimum")

    _, H = _ologit_score_hess(theta, alpha, X, kidx, J)
    vcov = np.linalg.inv(-H)
    threshold_labels = [f"{observed[k]}|{observed[k + 1]}" for k in range(J - 1)]
    return FitResult(
        family=OLOGIT,
        labels=labels,
        coef=theta,
        loglik=loglik,
        vcov_model=vcov,
        n=n,
        n_params=p + (J - 1),
        converged=converged,
        iterations=iterations,
        thresholds=alpha,
        threshold_labels=threshold_labels,
        categories=tuple(observed),
    )


def hc3_vcov(X: np.ndarray, y: np.ndarray, fit: FitResult) -> np.ndarray:
    """Leverage-adjusted sandwich: bread * sum x x' r_i^2 / (1-h_ii)^2 * bread.

    GAUSSIAN uses OLS residuals and the plain hat matrix; LOGIT uses response
    residuals y - mu with leverages from the weighted hat matrix and bread
    equal to the inverse observed information.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if fit.family == GAUSSIAN:
        bread = np.linalg.inv(X.T @ X)
        h = np.einsum("ij,jk,ik->i", X, bread, X)
        if np.any(h >= 1.0 - 1e-12):
            raise LeverageOne("a hat diagonal equals 1; HC3 undefined")
        resid = y - X @ fit.coef
        meat = X.T @ (X * (resid**2 / (1.0 - h) ** 2)[:, None])
        return bread @ meat @ bread
    if fit.family == LOGIT:
        mu = sigmoid(X @ fit.coef)
        w = mu * (1.0 - mu)
        bread = np.linalg.inv(X.T @ (X * w[:, None]))
        xw = X * np.sqrt(w)[:, None]
        h = np.einsum("ij,jk,ik->i", xw, bread, xw)
        if np.any(h >= 1.0 - 1e-12):
            raise LeverageOne("a hat diagonal equals 1; HC3 undefined")
        resid = y - mu
        meat = X.T @ (X * (resid**2 / (1.0 - h) ** 2)[:, None])
        return bread @ meat @ bread
    raise ValueError(f"HC3 defined for gaussian and logit fits, not {fit.family}")


@dataclass
class BootstrapVcov:
    vcov: np.ndarray
    replicates: np.ndarray  # B x k, failed rows replaced by the median vector
    n_failed: int
    failed_indices: list[int]
    B: int
    seed: int


def bootstrap_vcov(
    fit_fn: Callable[[np.ndarray, np.ndarray], FitResult],
    X: np.ndarray,
    y: np.ndarray,
    B: int,
    seed: int,
) -> BootstrapVcov:
    """Case-resampling bootstrap covariance of the full parameter vector.

    Replicates are driven by per-replicate seeds spawned from ``seed`` in
    index order, so the result does not depend on execution order. Replicates
    that fail (separation, rank loss, non-convergence) are replaced by the
    elementwise median over successful ones; more than 20% failures raise.
    """
    if B < 100:
        raise ValueError("B must be at least 100")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n = X.shape[0]
    children = np.random.SeedSequence(seed).spawn(B)

    rows: list[np.ndarray | None] = []
    failed: list[int] = []
    for b in range(B):
        rng = np.random.default_rng(children[b])
        idx = rng.integers(0, n, size=n)
        try:
            fit_b = fit_fn(X[idx], y[idx])
            rows.append(fit_b.params)
        except (Separation, NonConvergence, RankDeficient, InvalidDesign, np.linalg.LinAlgError):
            rows.append(None)
            failed.append(b)

    if len(failed) > 0.2 * B:
        raise TooManyFailures(f"{len(failed)} of {B} bootstrap replicates failed")
    good = np.array([r for r in rows if r is not None])
    median = np.median(good, axis=0)
    replicates = np.array([r if r is not None else median for r in rows])
    centered = replicates - replicates.mean(axis=0)
    vcov = centered.T @ centered / (B - 1)
    return BootstrapVcov(
        vcov=vcov,
        replicates=replicates,
        n_failed=len(failed),
        failed_indices=failed,
        B=B,
        seed=seed,
    )


def _align_row(fit: FitResult, x) -> np.ndarray:
    if isinstance(x, dict):
        try:
            return np.array([x[label] for label in fit.labels], dtype=float)
        except KeyError as exc:
            raise LabelMismatch(f"missing predictor {exc.args[0]!r}") from exc
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != len(fit.labels):
        raise LabelMismatch(f"expected {len(fit.labels)} predictors, got {x.shape[-1]}")
    return x


def predict(fit: FitResult, x) -> float | np.ndarray:
    """Point prediction: mean (GAUSSIAN), P(y=1) (LOGIT), or the category
    probability vector (OLOGIT)."""
    row = _align_row(fit, x)
    single = row.ndim == 1
    rows = np.atleast_2d(row)
    eta = rows @ fit.coef if fit.coef.size else np.zeros(rows.shape[0])
    if fit.family == GAUSSIAN:
        return float(eta[0]) if single else eta
    if fit.family == LOGIT:
        out = sigmoid(eta)
        return float(out[0]) if single else out
    if fit.family == OLOGIT:
        edges = np.concatenate([fit.thresholds, [np.inf]])
        cum = sigmoid(edges[None, :] - eta[:, None])
        cum[:, -1] = 1.0
        probs = np.diff(np.concatenate([np.zeros((cum.shape[0], 1)), cum], axis=1), axis=1)
        return probs[0] if single else probs
    raise ValueError(fit.family)


AT_MEAN = "AT_MEAN"
AVERAGE = "AVERAGE"


def marginal_effects(fit: FitResult, X: np.ndarray, mode: str = AT_MEAN) -> dict[str, float]:
    """Logit marginal effects g'(eta) * theta_j, at the mean row or averaged."""
    if fit.family != LOGIT:
        raise ValueError("marginal effects implemented for logit fits")
    X = np.asarray(X, dtype=float)
    if X.shape[1] != len(fit.labels):
        raise LabelMismatch(f"expected {len(fit.labels)} predictors, got {X.shape[1]}")
    if mode == AT_MEAN:
        mu = sigmoid(X.mean(axis=0) @ fit.coef)
        density = mu * (1.0 - mu)
    elif mode == AVERAGE:
        mu = sigmoid(X @ fit.coef)
        density = float(np.mean(mu * (1.0 - mu)))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return {label: float(density * b) for label, b in zip(fit.labels, fit.coef)}
