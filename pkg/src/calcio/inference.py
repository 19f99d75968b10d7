"""Akaike-weight model averaging and bootstrap confidence intervals.

The averaged (shrinkage) estimate combines candidate-model coefficients by
their information-criterion weights; its variance adds the within-model
variance and the between-model squared dispersion. Bootstrap intervals come
in classical (normal-theory with bootstrap SE), percentile and BCa flavors;
BCa acceleration uses the jackknife skewness estimate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.stats as ss

from .errors import CalcioError, DegenerateDf, TooManyFailures

CLASSICAL = "CLASSICAL"
PERCENTILE = "PERCENTILE"
BCA = "BCA"


def akaike_weights(criterion_values: Sequence[float]) -> np.ndarray:
    """w_l = exp(-delta_l / 2) normalized; deltas are taken from the minimum."""
    values = np.asarray(criterion_values, dtype=float)
    if values.size == 0 or not np.all(np.isfinite(values)):
        raise ValueError("criterion values must be a non-empty finite list")
    delta = values - values.min()
    raw = np.exp(-0.5 * delta)
    return raw / raw.sum()


@dataclass
class AveragedEstimate:
    label: str
    theta_tilde: float
    var_tilde: float
    df: float
    t_stat: float
    p_value: float
    L: int
    set_id: str = ""


def model_average(
    fits: Sequence[tuple[Mapping[str, float], Mapping[str, float], int]],
    weights: Sequence[float],
    n: int,
    set_id: str = "",
) -> dict[str, AveragedEstimate]:
    """Combine per-model (coefficients, variances, parameter count) triples.

    A coefficient absent from a candidate enters with estimate 0 and
    variance 0. Inference is Student-t with df = n - mean parameter count.
    """
    weights = np.asarray(weights, dtype=float)
    if len(fits) != weights.size:
        raise ValueError("one weight per candidate model required")
    labels: list[str] = []
    for coefs, _, _ in fits:
        for label in coefs:
            if label not in labels:
                labels.append(label)
    mean_p = float(np.mean([p for _, _, p in fits]))
    df = n - mean_p
    if df <= 0:
        raise DegenerateDf(f"df = {df}")

    out: dict[str, AveragedEstimate] = {}
    for label in labels:
        theta = np.array([coefs.get(label, 0.0) for coefs, _, _ in fits])
        var = np.array([variances.get(label, 0.0) for _, variances, _ in fits])
        theta_tilde = float(weights @ theta)
        var_tilde = float(weights @ (var + (theta - theta_tilde) ** 2))
        if var_tilde > 0:
            t_stat = theta_tilde / np.sqrt(var_tilde)
            p_value = 2.0 * float(ss.t.sf(abs(t_stat), df))
        else:
            t_stat = np.inf if theta_tilde != 0 else 0.0
            p_value = 0.0 if theta_tilde != 0 else 1.0
        out[label] = AveragedEstimate(
            label=label,
            theta_tilde=theta_tilde,
            var_tilde=var_tilde,
            df=df,
            t_stat=float(t_stat),
            p_value=p_value,
            L=len(fits),
            set_id=set_id,
        )
    return out


def averaged_ci(avg: AveragedEstimate, level: float = 0.95) -> tuple[float, float]:
    """theta_tilde +/- t_{df,(1+level)/2} * sqrt(var_tilde)."""
    if avg.df <= 0:
        raise DegenerateDf(f"df = {avg.df}")
    half = float(ss.t.ppf(0.5 * (1.0 + level), avg.df)) * np.sqrt(avg.var_tilde)
    return avg.theta_tilde - half, avg.theta_tilde + half


@dataclass
class BootstrapCI:
    method: str
    level: float
    lower: float
    upper: float
    B: int
    seed: int
    z0: float | None = None
    accel: float | None = None
    n_failed: int = 0
    warning: str | None = None


def bca_alpha(z0: float, accel: float, alpha: float) -> float:
    """The BCa quantile map; identity when z0 = accel = 0."""
    if z0 == 0.0 and accel == 0.0:
        return alpha
    z = ss.norm.ppf(alpha)
    adj = z0 + (z0 + z) / (1.0 - accel * (z0 + z))
    return float(ss.norm.cdf(adj))


def _order_statistic(sorted_reps: np.ndarray, q: float) -> float:
    """The floor(q * B) order statistic, clipped into range."""
    B = sorted_reps.size
    idx = int(np.floor(q * B + 1e-9))
    return float(sorted_reps[min(max(idx, 0), B - 1)])


def bootstrap_ci(
    statistic: Callable[[np.ndarray], float],
    data: np.ndarray,
    method: str = BCA,
    level: float = 0.95,
    B: int = 2000,
    seed: int = 0,
) -> BootstrapCI:
    """Case-resampling bootstrap interval for a scalar statistic of the rows.

    Replicates use per-index seeds spawned from ``seed``; failed replicates
    are replaced by the median of the successful ones (at most 20% may
    fail). A degenerate BCa bias correction (all replicates on one side of
    the estimate) falls back to the percentile interval with a warning.
    """
    data = np.asarray(data)
    n = data.shape[0]
    if method == BCA and B < 500:
        raise ValueError("BCa needs B >= 500")
    theta_hat = float(statistic(data))

    children = np.random.SeedSequence(seed).spawn(B)
    reps = np.empty(B)
    failed: list[int] = []
    for b in range(B):
        rng = np.random.default_rng(children[b])
        idx = rng.integers(0, n, size=n)
        try:
            reps[b] = float(statistic(data[idx]))
        except (CalcioError, np.linalg.LinAlgError):
            reps[b] = np.nan
            failed.append(b)
    if len(failed) > 0.2 * B:
        raise TooManyFailures(f"{len(failed)} of {B} replicates failed")
    if failed:
        median = float(np.nanmedian(reps))
        reps[np.isnan(reps)] = median

    alpha1 = 0.5 * (1.0 - level)
    alpha2 = 0.5 * (1.0 + level)
    sorted_reps = np.sort(reps)

    if method == CLASSICAL:
        se = float(np.std(reps, ddof=1))
        z = float(ss.norm.ppf(alpha2))
        return BootstrapCI(CLASSICAL, level, theta_hat - z * se, theta_hat + z * se, B, seed, n_failed=len(failed))
    if method == PERCENTILE:
        return BootstrapCI(
            PERCENTILE,
            level,
            _order_statistic(sorted_reps, alpha1),
            _order_statistic(sorted_reps, alpha2),
            B,
            seed,
            n_failed=len(failed),
        )
    if method == BCA:
        below = int(np.sum(reps < theta_hat))
        if below == 0 or below == B:
            lower = _order_statistic(sorted_reps, alpha1)
            upper = _order_statistic(sorted_reps, alpha2)
            return BootstrapCI(
                PERCENTILE,
                level,
                lower,
                upper,
                B,
                seed,
                n_failed=len(failed),
                warning="bias correction undefined (all replicates on one side); percentile fallback",
            )
        z0 = float(ss.norm.ppf(below / B))
        accel = _jackknife_acceleration(statistic, data)
        lower = _order_statistic(sorted_reps, bca_alpha(z0, accel, alpha1))
        upper = _order_statistic(sorted_reps, bca_alpha(z0, accel, alpha2))
        return BootstrapCI(BCA, level, lower, upper, B, seed, z0=z0, accel=accel, n_failed=len(failed))
    raise ValueError(f"unknown method {method!r}")


def _jackknife_acceleration(statistic: Callable[[np.ndarray], float], data: np.ndarray) -> float:
    """a = sum(d_i^3) / (6 * (sum(d_i^2))^(3/2)) with d_i = mean(theta_-) - theta_-i."""
    n = data.shape[0]
    loo = np.empty(n)
    mask = np.ones(n, dtype=bool)
    for i in range(n):
        mask[i] = False
        loo[i] = float(statistic(data[mask]))
        mask[i] = True
    d = loo.mean() - loo
    denom = np.sum(d**2) ** 1.5
    if denom == 0:
        return 0.0
    return float(np.sum(d**3) / (6.0 * denom))
