#!/usr/bin/env python3
"""End-to-end demo: simulate a league, ingest it, build features, fit the
three baseline models and compute a BCa interval for the scheme effect.

Usage: python scripts/run_pipeline.py [OUTDIR] [SEED]
"""

import sys
from pathlib import Path

from calcio.cli import main

outdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("pipeline_demo")
seed = sys.argv[2] if len(sys.argv) > 2 else "11"

league = outdir / "league"
steps = [
    ["simulate", "--out", str(league), "--seed", seed],
    ["ingest", "--events", str(league / "events.jsonl"), "--metas", str(league / "metas.jsonl"),
     "--out", str(outdir / "ingest")],
    ["features", "--events", str(league / "events.jsonl"), "--metas", str(league / "metas.jsonl"),
     "--out", str(outdir / "features")],
    ["report", "--events", str(league / "events.jsonl"), "--metas", str(league / "metas.jsonl"),
     "--weighted", "--out", str(outdir / "report"), "--seed", seed],
    ["fit", "--data", str(outdir / "features" / "cross_section.csv"), "--family", "ologit",
     "--scheme", "s2", "--weighted", "--out", str(outdir / "fit_ologit"), "--seed", seed],
    ["ci", "--data", str(outdir / "features" / "cross_section.csv"),
     "--spec", "G|A=s2diff|B=w1|C=z1|D=split|E=0|F=dummies|G=k2d|J=poly|I=wet|H=c4|X=none|W=0",
     "--label", "X2I", "--method", "bca", "--B", "2000", "--seed", seed,
     "--out", str(outdir / "ci")],
]

for argv in steps:
    print(f"\n$ calcio {' '.join(argv)}", file=sys.stderr)
    code = main(argv)
    if code != 0:
        print(f"step failed with exit code {code}", file=sys.stderr)
        sys.exit(code)

print(f"\nartifacts in {outdir}/", file=sys.stderr)
