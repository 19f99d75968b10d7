"""Batch command-line surface for the whole pipeline.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Progress and errors go to stderr; tables additionally land in the output
directory as fixed-width text, JSON and plot-ready CSV.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import scipy.stats as ss

from . import diagnostics as diag
from . import estimators as est
from . import features as feat
from . import inference as inf
from . import selection as sel
from . import synth
from .errors import (
    DegenerateDf,
    DuplicateEventKey,
    EmptyMatch,
    InvalidDesign,
    LeverageOne,
    MalformedRecord,
    MissingLineup,
    MissingStandings,
    NonConvergence,
    RankDeficient,
    Separation,
    TooManyFailures,
    UnknownMatchId,
)
from .estimators import GAUSSIAN, LOGIT, OLOGIT
from .events import parse_event_log, serialize_events, serialize_metas, validate_log

USAGE_ERROR, DATA_ERROR, NUMERIC_ERROR = 1, 2, 3

DATA_ERRORS = (
    MalformedRecord,
    UnknownMatchId,
    DuplicateEventKey,
    MissingLineup,
    EmptyMatch,
    MissingStandings,
    FileNotFoundError,
    KeyError,
)
NUMERIC_ERRORS = (
    Separation,
    NonConvergence,
    RankDeficient,
    InvalidDesign,
    LeverageOne,
    TooManyFailures,
    DegenerateDf,
    np.linalg.LinAlgError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _read(path: str) -> bytes:
    return Path(path).read_bytes()


def _jobs(args) -> int:
    if args.jobs is not None:
        return args.jobs
    env = os.environ.get("CALCIO_JOBS")
    return int(env) if env else 1


BASELINE_SCHEME_INDEX = {"s1": 0, "s2": 1, "s3": 2}


def baseline_spec(family: str, scheme: str = "s2", weighted: bool = False) -> sel.ModelSpec:
    """The baseline design: one scheme pair, the w1/z1 action sets, cubic
    stadium filling, weighted added time, relative team effect, season
    dummies, scaled league day and split extreme dummies."""
    return sel.ModelSpec(
        family=family,
        a=BASELINE_SCHEME_INDEX[scheme],
        b=0,
        c=0,
        d=1,
        intercept=False,
        f=1,
        g=3,
        j=1,
        i=1,
        h=4,
        interaction=None,
        weighted=weighted,
    )


def _coef_table(fit: est.FitResult, se: np.ndarray, p_values: np.ndarray) -> str:
    lines = [f"{'Variable':<22}{'Coef.':>10}{'SE':>10}  p-value", "-" * 52]
    k = len(fit.labels)
    for i, label in enumerate(fit.labels):
        lines.append(f"{label:<22}{fit.coef[i]:>10.4f}{se[i]:>10.4f}  ({p_values[i]:.3f})")
    if fit.thresholds is not None:
        lines.append("Thresholds")
        for j, tl in enumerate(fit.threshold_labels):
            lines.append(
                f"{tl:<22}{fit.thresholds[j]:>10.4f}{se[k + j]:>10.4f}  ({p_values[k + j]:.3f})"
            )
    return "\n".join(lines)


def _metric_lines(metrics: diag.FitMetrics) -> list[str]:
    def fmt(v):
        if v is None:
            return "-"
        if isinstance(v, list):
            return ", ".join(f"{x:.2f}" for x in v)
        return f"{v:.2f}"

    lines = [f"AIC {metrics.aic:.1f}  BIC {metrics.bic:.1f}  Deviance {metrics.deviance:.1f}"]
    if metrics.adj_r2 is not None:
        lines.append(f"Adjusted R2 {metrics.adj_r2:.2f}")
    if metrics.mcfadden_r2 is not None:
        lines.append(f"McFadden R2 {fmt(metrics.mcfadden_r2)}  Nagelkerke R2 {fmt(metrics.nagelkerke_r2)}")
    if metrics.accuracy is not None:
        lines.append(
            f"Accuracy {fmt(metrics.accuracy)}  Sensitivity {fmt(metrics.sensitivity)}  "
            f"Specificity {fmt(metrics.specificity)}  Precision {fmt(metrics.precision)}  F1 {fmt(metrics.f1)}"
        )
    return lines


def _diagnostic_panel(fit, design, args) -> dict[str, float]:
    """Family-specific residual diagnostics, mirrored from the reports."""
    X, y = design.X, design.y
    panel: dict[str, float] = {}
    if fit.family == GAUSSIAN:
        resid = y - X @ fit.coef
        if 8 <= len(resid) <= 5000:
            tests = diag.normality_tests(resid)
            panel["SW"] = tests["SW"].p_value
            panel["KS"] = tests["KS"].p_value
            panel["JB"] = tests["JB"].p_value
        panel["BP"] = diag.breusch_pagan(X, y, fit).p_value
        panel["RR"] = diag.reset_test(fit, X, y).p_value
    elif fit.family == LOGIT:
        panel["RR"] = diag.reset_test(fit, X, y).p_value
        panel["HL"] = diag.hosmer_lemeshow(fit, X, y).p_value
    else:
        panel["HL"] = diag.hosmer_lemeshow(fit, X, y, generalized=True).p_value
        panel["LI"] = diag.lipsitz_test(fit, X, y).p_value
        mode = diag.BOOTSTRAP if args.boot else diag.CLASSICAL
        panel["Brant"] = diag.brant_test(fit, X, y, mode=mode, B=args.boot or 200, seed=args.seed).p_value
    return panel


def _fit_one(frame: pd.DataFrame, spec: sel.ModelSpec, boot_B: int | None, seed: int):
    fit, design = sel.fit_spec(frame, spec)
    k = len(fit.labels)
    if fit.family in (GAUSSIAN, LOGIT):
        vcov = est.hc3_vcov(design.X, design.y, fit)
        se_all = np.sqrt(np.diag(vcov))
        fit.vcov_hc3 = vcov
    else:
        se_all = fit.se("model")
    if boot_B:
        fitter = {
            GAUSSIAN: est.fit_ols,
            LOGIT: est.fit_logit,
            OLOGIT: lambda X, y: est.fit_ologit(X, y),
        }[fit.family]
        boot = est.bootstrap_vcov(fitter, design.X, design.y, B=boot_B, seed=seed)
        fit.vcov_boot = boot.vcov
        fit.boot_B = boot_B
        fit.boot_seed = seed
        se_all = np.sqrt(np.diag(boot.vcov))
    if fit.family == GAUSSIAN:
        t = fit.params / se_all
        p = 2.0 * ss.t.sf(np.abs(t), fit.n - k)
    else:
        z = fit.params / se_all
        p = 2.0 * ss.norm.sf(np.abs(z))
    return fit, design, se_all, p


def _write_fit_outputs(outdir: Path, name: str, fit, se, p, metrics, panel) -> str:
    table = _coef_table(fit, se, p)
    text = table + "\n" + "-" * 52 + "\n" + "\n".join(_metric_lines(metrics))
    if panel:
        text += "\nResidual diagnostics (p-values): " + "  ".join(f"{k} {v:.2f}" for k, v in panel.items())
    (outdir / f"{name}.txt").write_text(text + "\n")
    rows = [
        {"label": label, "estimate": float(v), "se": float(s), "p_value": float(q)}
        for label, v, s, q in zip(fit.param_labels, fit.params, se, p)
    ]
    pd.DataFrame(rows).to_csv(outdir / f"{name}_coefficients.csv", index=False, lineterminator="\n")
    payload = json.loads(fit.to_json())
    payload["metrics"] = {
        key: val for key, val in vars(metrics).items() if val is not None
    }
    payload["diagnostics"] = panel
    (outdir / f"{name}.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return text


# --- subcommands ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = synth.LeagueConfig(
        n_teams=args.teams, n_seasons=args.seasons, outcome_family=args.family, seed=args.seed
    )
    league = synth.generate_league(cfg)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "events.jsonl").write_text(serialize_events(league.events))
    (outdir / "metas.jsonl").write_text(serialize_metas(league.metas))
    (outdir / "ground_truth.json").write_text(league.ground_truth.to_json() + "\n")
    _log(f"wrote {len(league.events)} events for {len(league.metas)} matches to {outdir}")
    return 0


def cmd_ingest(args) -> int:
    events, metas = parse_event_log(_read(args.events), _read(args.metas), args.format)
    report = validate_log(events, metas)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    lines = [f"{e.severity:5s} {e.match_id}: {e.message}" for e in report.entries]
    (outdir / "validation_report.txt").write_text("\n".join(lines) + "\n")
    (outdir / "events_canonical.jsonl").write_text(serialize_events(events))
    (outdir / "metas_canonical.jsonl").write_text(serialize_metas(metas))
    _log(
        f"{len(events)} events / {len(metas)} matches; "
        f"{report.n_errors} errors, {report.n_warnings} warnings"
    )
    return 0


def _load_cross_section(args) -> feat.CrossSection:
    events, metas = parse_event_log(_read(args.events), _read(args.metas), args.format)
    return feat.build_cross_section(events, metas)


def cmd_balance(args) -> int:
    cross = _load_cross_section(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    feat.balanced_panel_frame(cross.panels).to_csv(outdir / "panel.csv", index=False, lineterminator="\n")
    _log(f"balanced {len(cross.panels)} matches ({len(cross.skipped)} skipped, no events)")
    return 0


def cmd_features(args) -> int:
    cross = _load_cross_section(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    cross.frame.to_csv(outdir / "cross_section.csv", index=False, lineterminator="\n")
    _log(f"wrote {len(cross.frame)} match records, {cross.frame.shape[1]} columns")
    return 0


def _load_frame(args) -> pd.DataFrame:
    return pd.read_csv(args.data)


def cmd_fit(args) -> int:
    frame = _load_frame(args)
    if args.spec:
        spec = sel.ModelSpec.decode(args.spec)
    else:
        spec = baseline_spec(args.family, args.scheme, args.weighted)
    fit, design, se, p = _fit_one(frame, spec, args.boot, args.seed)
    metrics = diag.fit_metrics(fit, design.X, design.y)
    panel = _diagnostic_panel(fit, design, args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    text = _write_fit_outputs(outdir, "fit", fit, se, p, metrics, panel)
    print(f"spec: {spec.encode()}")
    print(text)
    return 0


def cmd_search(args) -> int:
    restrict = json.loads(args.restrict) if args.restrict else None
    if args.dry_run:
        _, count = sel.enumerate_specs(args.family, args.interactions, args.weighted, restrict)
        print(count)
        return 0
    if not args.data:
        raise UsageError("--data is required unless --dry-run is given")
    frame = _load_frame(args)
    ranked = sel.search(
        frame,
        args.family,
        args.criterion.upper(),
        jobs=_jobs(args),
        budget=args.budget,
        include_interactions=args.interactions,
        weighted=args.weighted,
        restrict=restrict,
        reference_team=args.reference_team,
    )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    ranked.to_csv(outdir / "ranking.csv")
    if ranked.failures:
        pd.DataFrame(ranked.failures, columns=["spec_encoding", "reason"]).to_csv(
            outdir / "failures.csv", index=False, lineterminator="\n"
        )
    _log(
        f"ranked {len(ranked.rows)} specs ({len(ranked.failures)} failures"
        + (", partial" if ranked.partial else "")
        + f"); best {args.criterion.upper()} = {ranked.rows[0].value:.2f}"
        if ranked.rows
        else "no successful fits"
    )
    if ranked.rows:
        print(ranked.rows[0].encoding)
    return 0


def cmd_average(args) -> int:
    frame = _load_frame(args)
    ranking = pd.read_csv(args.ranking)
    rows = [
        sel.RankRow(
            encoding=r.spec_encoding,
            value=float(r.value),
            loglik=0.0,
            n_params=int(r.n_params),
            converged=bool(r.converged),
        )
        for r in ranking.itertuples()
    ]
    ranked = sel.RankedSearch(
        family=args.family, criterion=args.criterion.upper(), rows=rows, failures=[], fingerprint=""
    )
    top = sel.top_fraction(ranked, args.fraction)
    set1, set2 = sel.partition_sets(top)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for set_id, subset in (("Set1", set1), ("Set2", set2)):
        if not subset:
            _log(f"{set_id}: empty")
            continue
        fits = []
        for row in subset:
            spec = sel.ModelSpec.decode(row.encoding)
            fit, design = sel.fit_spec(frame, spec)
            if fit.family in (GAUSSIAN, LOGIT):
                vcov = est.hc3_vcov(design.X, design.y, fit)
            else:
                vcov = fit.vcov_model
            var = np.diag(vcov)
            coefs = dict(zip(fit.param_labels, fit.params))
            variances = dict(zip(fit.param_labels, var))
            fits.append((coefs, variances, fit.n_params))
        weights = inf.akaike_weights([row.value for row in subset])
        averaged = inf.model_average(fits, weights, n=len(frame), set_id=set_id)
        table = pd.DataFrame(
            [
                {
                    "label": a.label,
                    "estimate": a.theta_tilde,
                    "se": np.sqrt(a.var_tilde),
                    "t": a.t_stat,
                    "p_value": a.p_value,
                    "L": a.L,
                }
                for a in averaged.values()
            ]
        )
        table.to_csv(outdir / f"averaged_{set_id.lower()}.csv", index=False, lineterminator="\n")
        print(f"{set_id}: L={len(subset)} models, {len(averaged)} coefficients")
    return 0


def cmd_ci(args) -> int:
    frame = _load_frame(args)
    spec = sel.ModelSpec.decode(args.spec)
    fit, design = sel.fit_spec(frame, spec)
    if args.label not in fit.param_labels:
        raise UsageError(f"label {args.label!r} not in the spec's parameters")
    idx = fit.param_labels.index(args.label)
    fitter = {
        GAUSSIAN: est.fit_ols,
        LOGIT: est.fit_logit,
        OLOGIT: lambda X, y: est.fit_ologit(X, y),
    }[fit.family]

    def statistic(rows: np.ndarray) -> float:
        return float(fitter(rows[:, 1:], rows[:, 0]).params[idx])

    data = np.column_stack([design.y, design.X])
    ci = inf.bootstrap_ci(statistic, data, method=args.method.upper(), level=args.level, B=args.B, seed=args.seed)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    row = {
        "label": args.label,
        "method": ci.method,
        "level": ci.level,
        "lower": ci.lower,
        "upper": ci.upper,
        "B": ci.B,
        "z0": ci.z0,
        "accel": ci.accel,
    }
    pd.DataFrame([row]).to_csv(outdir / "ci.csv", index=False, lineterminator="\n")
    if ci.warning:
        _log(f"warning: {ci.warning}")
    print(f"{args.label} {ci.method} {int(ci.level*100)}% CI: [{ci.lower:.4f}, {ci.upper:.4f}]")
    return 0


def cmd_report(args) -> int:
    cross = _load_cross_section(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    cross.frame.to_csv(outdir / "cross_section.csv", index=False, lineterminator="\n")
    feat.balanced_panel_frame(cross.panels).to_csv(outdir / "panel.csv", index=False, lineterminator="\n")
    for family in (GAUSSIAN, LOGIT, OLOGIT):
        spec = baseline_spec(family, args.scheme, args.weighted)
        try:
            fit, design, se, p = _fit_one(cross.frame, spec, args.boot, args.seed)
            metrics = diag.fit_metrics(fit, design.X, design.y)
            panel = _diagnostic_panel(fit, design, args)
        except NUMERIC_ERRORS as exc:
            _log(f"{family}: fit failed ({exc})")
            continue
        _write_fit_outputs(outdir, f"baseline_{family}", fit, se, p, metrics, panel)
        _log(f"{family}: AIC {metrics.aic:.1f}, BIC {metrics.bic:.1f}")
    print(f"report written to {outdir}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="calcio", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    def add_common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--config", type=str, default=None, help="JSON file with default argument values")

    p = sub.add_parser("simulate", help="generate a synthetic league")
    add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--teams", type=int, default=20)
    p.add_argument("--seasons", type=int, default=3)
    p.add_argument("--family", choices=(GAUSSIAN, LOGIT, OLOGIT), default=LOGIT)

    for name in ("ingest", "balance", "features", "report"):
        p = sub.add_parser(name)
        add_common(p)
        p.add_argument("--events", required=True)
        p.add_argument("--metas", required=True)
        p.add_argument("--format", choices=("JSONL", "CSV", "jsonl", "csv"), default="JSONL")
        p.add_argument("--out", required=True)
        if name == "report":
            p.add_argument("--scheme", choices=("s1", "s2", "s3"), default="s2")
            p.add_argument("--weighted", action="store_true")
            p.add_argument("--boot", type=int, default=None)

    p = sub.add_parser("fit", help="fit one spec and print the coefficient table")
    add_common(p)
    p.add_argument("--data", required=True, help="cross-section CSV")
    p.add_argument("--family", choices=(GAUSSIAN, LOGIT, OLOGIT), required=True)
    p.add_argument("--scheme", choices=("s1", "s2", "s3"), default="s2")
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--spec", type=str, default=None, help="explicit spec encoding")
    p.add_argument("--boot", type=int, default=None, help="bootstrap SEs with this many replicates")
    p.add_argument("--out", required=True)

    p = sub.add_parser("search", help="exhaustive specification search")
    add_common(p)
    p.add_argument("--data")
    p.add_argument("--family", choices=(GAUSSIAN, LOGIT, OLOGIT), required=True)
    p.add_argument("--criterion", choices=("aic", "bic", "AIC", "BIC"), default="aic")
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--interactions", action="store_true")
    p.add_argument("--restrict", type=str, default=None, help='JSON, e.g. {"A":[1],"H":[0,4]}')
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--reference-team", default=sel.DEFAULT_REFERENCE_TEAM)
    p.add_argument("--out", default=".")

    p = sub.add_parser("average", help="Akaike-weight averaging of a ranking's top fraction")
    add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--ranking", required=True, help="ranking.csv from `search`")
    p.add_argument("--family", choices=(GAUSSIAN, LOGIT, OLOGIT), required=True)
    p.add_argument("--criterion", choices=("aic", "bic", "AIC", "BIC"), default="aic")
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("ci", help="bootstrap confidence interval for one coefficient")
    add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--method", choices=("classical", "percentile", "bca"), default="bca")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--B", type=int, default=2000)
    p.add_argument("--out", required=True)

    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "ingest": cmd_ingest,
    "balance": cmd_balance,
    "features": cmd_features,
    "fit": cmd_fit,
    "search": cmd_search,
    "average": cmd_average,
    "ci": cmd_ci,
    "report": cmd_report,
}


def _apply_config(args) -> None:
    if getattr(args, "config", None):
        defaults = json.loads(Path(args.config).read_text())
        for key, value in defaults.items():
            attr = key.replace("-", "_")
            if hasattr(args, attr) and getattr(args, attr) in (None, False):
                setattr(args, attr, value)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return USAGE_ERROR
        _apply_config(args)
        if getattr(args, "fraction", None) is not None and not 0 < args.fraction <= 1:
            raise UsageError("fraction must lie in (0, 1]")
        if getattr(args, "B", None) is not None and args.B < 100:
            raise UsageError("B must be at least 100")
        if getattr(args, "boot", None) is not None and args.boot < 100:
            raise UsageError("--boot must be at least 100")
        if getattr(args, "format", None):
            args.format = args.format.upper()
        return COMMANDS[args.command](args)
    except UsageError as exc:
        _log(f"usage error: {exc}")
        return USAGE_ERROR
    except DATA_ERRORS as exc:
        _log(f"data error: {exc}")
        return DATA_ERROR
    except NUMERIC_ERRORS as exc:
        _log(f"numerical failure: {exc}")
        return NUMERIC_ERROR


if __name__ == "__main__":
    sys.exit(main())
