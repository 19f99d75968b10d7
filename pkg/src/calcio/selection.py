"""Block-structured specification space and exhaustive AIC/BIC search.

Each candidate design is assembled from fixed blocks: A coach schemes (6),
B team actions (4), C referee actions (4), D extreme-score dummies (2),
E intercept (2; always excluded for ordered logit), F season effects (3),
G calendar effects (5), J stadium filling (2), I extra time (2), H team
effects (8), plus at most one pairwise-interaction block drawn from
A x B (24), A x C (24) or B x C (16). The no-interaction space therefore
holds 6*4*4*2*2*3*5*2*2*8 = 184,320 designs (92,160 for ordered logit).
"""

from __future__ import annotations

import hashlib
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
import pandas as pd

from . import estimators as est
from .errors import (
    InvalidDesign,
    NonConvergence,
    RankDeficient,
    Separation,
)
from .estimators import GAUSSIAN, LOGIT, OLOGIT, DesignMatrix, FitResult, INTERCEPT_LABEL

AIC = "AIC"
BIC = "BIC"

DEFAULT_REFERENCE_TEAM = "Juventus"

_A = [
    ("s1diff", ("X1I", "X1F")),
    ("s2diff", ("X2I", "X2F")),
    ("s3diff", ("X3I", "X3F")),
    ("s1split", ("X1Ih", "X1Ia", "X1Fh", "X1Fa")),
    ("s2split", ("X2Ih", "X2Ia", "X2Fh", "X2Fa")),
    ("s3split", ("X3Ih", "X3Ia", "X3Fh", "X3Fa")),
]
_B = [
    ("w1", ("W1", "W2", "W6", "W7", "W8")),
    ("w3", ("W3", "W4", "W5", "W6", "W7", "W8")),
    ("w1split", ("W1h", "W2h", "W6h", "W7h", "W8h", "W1a", "W2a", "W6a", "W7a", "W8a")),
    ("w3split", ("W3h", "W4h", "W5h", "W6h", "W7h", "W8h", "W3a", "W4a", "W5a", "W6a", "W7a", "W8a")),
]
_C = [
    ("z1", ("Z1", "Z2", "Z3", "Z4")),
    ("z3", ("Z3", "Z4", "Z5")),
    ("z1split", ("Z1h", "Z2h", "Z3h", "Z4h", "Z1a", "Z2a", "Z3a", "Z4a")),
    ("z3split", ("Z3h", "Z4h", "Z5h", "Z3a", "Z4a", "Z5a")),
]
_D = [("abs", ("DUM_EXTR",)), ("split", ("DUM_P", "DUM_N"))]
_F = [("none", ()), ("dummies", ("@SEASONS",)), ("numeric", ("SEAS",))]
_G = [
    ("none", ()),
    ("k1d", ("DATE_RANK",)),
    ("k1d2", ("DATE_RANK2",)),
    ("k2d", ("RELATIVE_DATE",)),
    ("k2d2", ("RELATIVE_DATE2",)),
]
_J = [("0", ()), ("poly", ("EXR1", "EXR12", "EXR13"))]
_I = [("et", ("MET",)), ("wet", ("METW",))]
_H = [
    ("none", ()),
    ("teamFE", ("@TEAMS",)),
    ("c3", ("RP_LHAD",)),
    ("c32", ("RP_LHAD2",)),
    ("c4", ("RP_LHAD_REL",)),
    ("c42", ("RP_LHAD_REL2",)),
    ("c3split", ("RP_LH", "RP_LA")),
    ("c4split", ("RP_HOME_REL_P", "RP_AWAY_REL_P")),
]

BLOCKS = {"A": _A, "B": _B, "C": _C, "D": _D, "F": _F, "G": _G, "J": _J, "I": _I, "H": _H}

_FAMILY_CODE = {GAUSSIAN: "G", LOGIT: "L", OLOGIT: "O"}
_FAMILY_FROM_CODE = {v: k for k, v in _FAMILY_CODE.items()}
RESPONSE_COLUMN = {GAUSSIAN: "Y1", LOGIT: "Y2", OLOGIT: "Y3"}


def _weighted_name(name: str) -> str:
    """Map an action column to its omega-weighted counterpart."""
    if name.startswith("X"):
        # X2I -> X2wI, X2Fh -> X2wFh
        return name[:2] + "w" + name[2:]
    if name.startswith(("W", "Z")):
        # W1 -> W1W, W1h -> W1Wh, Z3a -> Z3Wa
        head, tail = name[:2], name[2:]
        return head + "W" + tail
    return name


@dataclass(frozen=True)
class ModelSpec:
    """One point of the block grammar; immutable and canonically encodable."""

    family: str
    a: int
    b: int
    c: int
    d: int
    intercept: bool
    f: int
    g: int
    j: int
    i: int
    h: int
    interaction: tuple[str, int, int] | None = None
    weighted: bool = False

    def __post_init__(self):
        if self.family == OLOGIT and self.intercept:
            raise InvalidDesign("ordered logit absorbs the intercept into the thresholds")

    def encode(self) -> str:
        if self.interaction is None:
            inter = "none"
        else:
            block, i1, i2 = self.interaction
            first = {"K": _A, "L": _A, "M": _B}[block][i1][0]
            second = {"K": _B, "L": _C, "M": _C}[block][i2][0]
            inter = f"{block}:{first}x{second}"
        return "|".join(
            [
                _FAMILY_CODE[self.family],
                f"A={_A[self.a][0]}",
                f"B={_B[self.b][0]}",
                f"C={_C[self.c][0]}",
                f"D={_D[self.d][0]}",
                f"E={int(self.intercept)}",
                f"F={_F[self.f][0]}",
                f"G={_G[self.g][0]}",
                f"J={_J[self.j][0]}",
                f"I={_I[self.i][0]}",
                f"H={_H[self.h][0]}",
                f"X={inter}",
                f"W={int(self.weighted)}",
            ]
        )

    @classmethod
    def decode(cls, text: str) -> "ModelSpec":
        parts = text.split("|")
        family = _FAMILY_FROM_CODE[parts[0]]
        kv = dict(p.split("=", 1) for p in parts[1:])

        def index_of(block: list, name: str) -> int:
            for i, (label, _) in enumerate(block):
                if label == name:
                    return i
            raise ValueError(f"unknown block choice {name!r}")

        interaction = None
        if kv["X"] != "none":
            block, names = kv["X"].split(":", 1)
            first, second = names.split("x", 1)
            lookup = {"K": (_A, _B), "L": (_A, _C), "M": (_B, _C)}[block]
            interaction = (block, index_of(lookup[0], first), index_of(lookup[1], second))
        return cls(
            family=family,
            a=index_of(_A, kv["A"]),
            b=index_of(_B, kv["B"]),
            c=index_of(_C, kv["C"]),
            d=index_of(_D, kv["D"]),
            intercept=kv["E"] == "1",
            f=index_of(_F, kv["F"]),
            g=index_of(_G, kv["G"]),
            j=index_of(_J, kv["J"]),
            i=index_of(_I, kv["I"]),
            h=index_of(_H, kv["H"]),
            interaction=interaction,
            weighted=kv["W"] == "1",
        )

    @property
    def scheme_is_split(self) -> bool:
        return self.a >= 3


@dataclass
class DatasetSchema:
    """Concrete column names behind the placeholder blocks of one dataset."""

    season_columns: list[str]
    team_columns: list[str]
    reference_team_column: str

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, reference_team: str = DEFAULT_REFERENCE_TEAM) -> "DatasetSchema":
        seasons = sorted(c for c in frame.columns if c.startswith("SEASON_"))
        teams = sorted(c for c in frame.columns if c.startswith("H_") and c != "HOME")
        ref = f"H_{reference_team}"
        if teams and ref not in teams:
            ref = teams[0]
        return cls(season_columns=seasons, team_columns=teams, reference_team_column=ref)


def spec_columns(spec: ModelSpec, schema: DatasetSchema) -> tuple[list[str], list[tuple[str, str]]]:
    """Resolve a spec into plain column names plus interaction pairs.

    Full dummy blocks span the constant; only the first such block in a
    design without an explicit intercept keeps all its levels, any further
    one (and every dummy block when an intercept or ordered-logit thresholds
    are present) drops its reference level.
    """
    weighted = spec.weighted

    def action(names: Sequence[str]) -> list[str]:
        return [_weighted_name(n) if weighted else n for n in names]

    columns: list[str] = []
    if spec.intercept:
        columns.append(INTERCEPT_LABEL)
    columns += action(_A[spec.a][1])
    columns += action(_B[spec.b][1])
    columns += action(_C[spec.c][1])
    columns += list(_D[spec.d][1])

    spans_constant = spec.intercept or spec.family == OLOGIT
    if _F[spec.f][0] == "dummies":
        cols = list(schema.season_columns)
        if spans_constant and cols:
            cols = cols[1:]
        spans_constant = True
        columns += cols
    else:
        columns += list(_F[spec.f][1])
    columns += list(_G[spec.g][1])
    columns += list(_J[spec.j][1])
    columns += list(_I[spec.i][1])
    if _H[spec.h][0] == "teamFE":
        cols = list(schema.team_columns)
        if spans_constant and cols:
            cols = [c for c in cols if c != schema.reference_team_column]
        columns += cols
    else:
        columns += list(_H[spec.h][1])

    interactions: list[tuple[str, str]] = []
    if spec.interaction is not None:
        block, i1, i2 = spec.interaction
        left = {"K": _A, "L": _A, "M": _B}[block][i1][1]
        right = {"K": _B, "L": _C, "M": _C}[block][i2][1]
        for u in action(left):
            for v in action(right):
                interactions.append((u, v))
    return columns, interactions


def enumerate_specs(
    family: str,
    include_interactions: bool = False,
    weighted: bool = False,
    restrict: dict[str, Sequence[int]] | None = None,
) -> tuple[Iterator[ModelSpec], int]:
    """Canonical-order spec generator and its exact count.

    ``restrict`` optionally narrows a block to selected choice indices,
    e.g. ``{"A": [1], "H": [0, 4]}``; the letter "X" restricts interaction
    variants by position in the none+K+L+M sequence.
    """
    restrict = restrict or {}

    def choices(letter: str, block: list) -> list[int]:
        allowed = restrict.get(letter)
        return list(allowed) if allowed is not None else list(range(len(block)))

    intercept_options = [False] if family == OLOGIT else [False, True]
    if "E" in restrict:
        intercept_options = [bool(v) for v in restrict["E"]]

    inter_options: list[tuple[str, int, int] | None] = [None]
    if include_interactions:
        inter_options += [("K", i, j) for i in range(len(_A)) for j in range(len(_B))]
        inter_options += [("L", i, j) for i in range(len(_A)) for j in range(len(_C))]
        inter_options += [("M", i, j) for i in range(len(_B)) for j in range(len(_C))]
    if "X" in restrict:
        inter_options = [inter_options[i] for i in restrict["X"]]

    axes = {
        "A": choices("A", _A),
        "B": choices("B", _B),
        "C": choices("C", _C),
        "D": choices("D", _D),
        "F": choices("F", _F),
        "G": choices("G", _G),
        "J": choices("J", _J),
        "I": choices("I", _I),
        "H": choices("H", _H),
    }
    count = (
        len(axes["A"])
        * len(axes["B"])
        * len(axes["C"])
        * len(axes["D"])
        * len(intercept_options)
        * len(axes["F"])
        * len(axes["G"])
        * len(axes["J"])
        * len(axes["I"])
        * len(axes["H"])
        * len(inter_options)
    )

    def generator() -> Iterator[ModelSpec]:
        for a, b, c, d, e, f, g, j, i, h, x in itertools.product(
            axes["A"],
            axes["B"],
            axes["C"],
            axes["D"],
            intercept_options,
            axes["F"],
            axes["G"],
            axes["J"],
            axes["I"],
            axes["H"],
            inter_options,
        ):
            yield ModelSpec(
                family=family,
                a=a,
                b=b,
                c=c,
                d=d,
                intercept=e,
                f=f,
                g=g,
                j=j,
                i=i,
                h=h,
                interaction=x,
                weighted=weighted,
            )

    return generator(), count


# --- design materialization and fitting --------------------------------------


class _ColumnStore:
    """Caches base and interaction columns pulled from the dataset."""

    def __init__(self, frame: pd.DataFrame):
        self._frame = frame
        self._cache: dict[str, np.ndarray] = {}
        self.n = len(frame)

    def column(self, name: str) -> np.ndarray:
        got = self._cache.get(name)
        if got is None:
            if name == INTERCEPT_LABEL:
                got = np.ones(self.n)
            else:
                if name not in self._frame.columns:
                    raise KeyError(f"dataset lacks column {name!r}")
                got = self._frame[name].to_numpy(dtype=float)
            self._cache[name] = got
        return got

    def product(self, u: str, v: str) -> tuple[str, np.ndarray]:
        name = f"{u}:{v}"
        got = self._cache.get(name)
        if got is None:
            got = self.column(u) * self.column(v)
            self._cache[name] = got
        return name, got


def build_design(
    frame: pd.DataFrame,
    spec: ModelSpec,
    schema: DatasetSchema | None = None,
    store: _ColumnStore | None = None,
) -> DesignMatrix:
    schema = schema or DatasetSchema.from_frame(frame)
    store = store or _ColumnStore(frame)
    names, interactions = spec_columns(spec, schema)
    arrays = [store.column(n) for n in names]
    labels = list(names)
    for u, v in interactions:
        name, arr = store.product(u, v)
        labels.append(name)
        arrays.append(arr)
    y = frame[RESPONSE_COLUMN[spec.family]].to_numpy(dtype=float)
    return DesignMatrix(X=np.column_stack(arrays), y=y, labels=labels)


def fit_spec(frame: pd.DataFrame, spec: ModelSpec, schema: DatasetSchema | None = None) -> tuple[FitResult, DesignMatrix]:
    """Materialize and fit a single spec on the dataset."""
    design = build_design(frame, spec, schema)
    if spec.family == GAUSSIAN:
        fit = est.fit_ols(design.X, design.y, design.labels)
    elif spec.family == LOGIT:
        fit = est.fit_logit(design.X, design.y, design.labels)
    else:
        fit = est.fit_ologit(design.X, design.y, labels=design.labels)
    return fit, design


def criterion_value(fit: FitResult, criterion: str) -> float:
    if criterion == AIC:
        return -2.0 * fit.loglik + 2.0 * fit.n_params
    if criterion == BIC:
        return -2.0 * fit.loglik + fit.n_params * math.log(fit.n)
    raise ValueError(f"unknown criterion {criterion!r}")


@dataclass(frozen=True)
class RankRow:
    encoding: str
    value: float
    loglik: float
    n_params: int
    converged: bool


@dataclass
class RankedSearch:
    family: str
    criterion: str
    rows: list[RankRow]
    failures: list[tuple[str, str]]
    fingerprint: str
    partial: bool = False

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "spec_encoding": r.encoding,
                    "criterion": self.criterion,
                    "value": f"{r.value:.9f}",
                    "converged": int(r.converged),
                    "n_params": r.n_params,
                }
                for r in self.rows
            ]
        )

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n")


def dataset_fingerprint(frame: pd.DataFrame) -> str:
    digest = hashlib.sha256()
    digest.update(",".join(map(str, frame.columns)).encode())
    digest.update(pd.util.hash_pandas_object(frame, index=False).to_numpy().tobytes())
    return digest.hexdigest()


_WORKER: dict = {}


def _init_worker(columns: dict[str, np.ndarray], n: int, family: str, criterion: str, schema: DatasetSchema):
    _WORKER["columns"] = columns
    _WORKER["n"] = n
    _WORKER["family"] = family
    _WORKER["criterion"] = criterion
    _WORKER["schema"] = schema


def _fit_encoded(encodings: list[str]) -> list[tuple]:
    columns = _WORKER["columns"]
    n = _WORKER["n"]
    family = _WORKER["family"]
    criterion = _WORKER["criterion"]
    schema = _WORKER["schema"]
    y = columns[RESPONSE_COLUMN[family]]
    out = []
    for encoding in encodings:
        spec = ModelSpec.decode(encoding)
        try:
            names, interactions = spec_columns(spec, schema)
            arrays = [np.ones(n) if c == INTERCEPT_LABEL else columns[c] for c in names]
            labels = list(names)
            for u, v in interactions:
                arrays.append(columns[u] * columns[v])
                labels.append(f"{u}:{v}")
            design = DesignMatrix(X=np.column_stack(arrays), y=y, labels=labels)
            if family == GAUSSIAN:
                fit = est.fit_ols(design.X, design.y, design.labels)
            elif family == LOGIT:
                fit = est.fit_logit(design.X, design.y, design.labels)
            else:
                fit = est.fit_ologit(design.X, design.y, labels=design.labels)
            out.append((encoding, criterion_value(fit, criterion), fit.loglik, fit.n_params, fit.converged, None))
        except (InvalidDesign, RankDeficient, Separation, NonConvergence, KeyError, np.linalg.LinAlgError) as exc:
            out.append((encoding, None, None, None, None, f"{type(exc).__name__}: {exc}"))
    return out


def search(
    frame: pd.DataFrame,
    family: str,
    criterion: str = AIC,
    jobs: int = 1,
    budget: int | None = None,
    include_interactions: bool = False,
    weighted: bool = False,
    restrict: dict[str, Sequence[int]] | None = None,
    reference_team: str = DEFAULT_REFERENCE_TEAM,
) -> RankedSearch:
    """Fit every enumerable spec and rank by the information criterion.

    Failed fits are recorded and excluded from the ranking. Results are
    sorted by (value, encoding), so the ranking is identical for any degree
    of parallelism; ``budget`` caps the number of attempted fits and flags
    the result as partial when exceeded.
    """
    schema = DatasetSchema.from_frame(frame, reference_team)
    specs, _ = enumerate_specs(family, include_interactions, weighted, restrict)
    encodings = [spec.encode() for spec in specs]
    partial = False
    if budget is not None and len(encodings) > budget:
        encodings = encodings[:budget]
        partial = True

    needed = set()
    for encoding in encodings:
        names, inter = spec_columns(ModelSpec.decode(encoding), schema)
        needed.update(c for c in names if c != INTERCEPT_LABEL)
        for u, v in inter:
            needed.add(u)
            needed.add(v)
    needed.add(RESPONSE_COLUMN[family])
    missing = sorted(c for c in needed if c not in frame.columns)
    if missing:
        raise KeyError(f"dataset lacks columns required by the search space: {missing[:8]}")
    columns = {c: frame[c].to_numpy(dtype=float) for c in needed}

    chunk = 512
    chunks = [encodings[i : i + chunk] for i in range(0, len(encodings), chunk)]
    results: list[tuple] = []
    if jobs <= 1:
        _init_worker(columns, len(frame), family, criterion, schema)
        for ch in chunks:
            results.extend(_fit_encoded(ch))
    else:
        with ProcessPoolExecutor(
            max_workers=jobs,
            initializer=_init_worker,
            initargs=(columns, len(frame), family, criterion, schema),
        ) as pool:
            for part in pool.map(_fit_encoded, chunks):
                results.extend(part)

    rows = [
        RankRow(encoding=r[0], value=r[1], loglik=r[2], n_params=r[3], converged=r[4])
        for r in results
        if r[5] is None
    ]
    failures = [(r[0], r[5]) for r in results if r[5] is not None]
    rows.sort(key=lambda r: (r.value, r.encoding))
    return RankedSearch(
        family=family,
        criterion=criterion,
        rows=rows,
        failures=failures,
        fingerprint=dataset_fingerprint(frame),
        partial=partial,
    )


def top_fraction(ranked: RankedSearch, fraction: float) -> list[RankRow]:
    """The ceil(fraction * L) best specs of a ranking."""
    if not ranked.rows:
        raise ValueError("empty ranking")
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    keep = math.ceil(fraction * len(ranked.rows))
    return ranked.rows[:keep]


def partition_sets(rows: Sequence[RankRow]) -> tuple[list[RankRow], list[RankRow]]:
    """Split by block-A flavor: home-away differences (Set 1) vs separate
    home and away schemes (Set 2)."""
    set1 = [r for r in rows if not ModelSpec.decode(r.encoding).scheme_is_split]
    set2 = [r for r in rows if ModelSpec.decode(r.encoding).scheme_is_split]
    return set1, set2
