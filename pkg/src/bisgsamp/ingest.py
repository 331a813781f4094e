"""Input parsing, name canonicalization and count aggregation.

All name keys are canonicalized the same way so the minority-name data, the
frame counts and the roster join exactly: Unicode compatibility folding to
ASCII, apostrophes removed, whitespace collapsed, uppercase.
"""

from __future__ import annotations

import csv
import logging
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
import pandas as pd
from scipy import sparse

log = logging.getLogger(__name__)

RENORMALIZE_TOL = 1e-6


class InputError(ValueError):
    """Malformed or inconsistent input data."""


class DropRow(ValueError):
    """Raised by a normalizer to signal that a record should be discarded."""


# --------------------------------------------------------------------------
# Domain types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GeoPrior:
    strata: tuple[str, ...]
    p_r_given_g: np.ndarray
    p_g_given_r: np.ndarray

    def __post_init__(self):
        if len(set(self.strata)) != len(self.strata):
            raise InputError("duplicate stratum in geo prior")
        p = np.asarray(self.p_r_given_g, dtype=float)
        q = np.asarray(self.p_g_given_r, dtype=float)
        if p.shape != (len(self.strata),) or q.shape != p.shape:
            raise InputError("geo prior arrays must have one entry per stratum")
        if np.any(~(p > 0) | ~(p < 1)):
            raise InputError("p_r_given_g must lie strictly inside (0, 1)")
        if np.any(~(q > 0) | ~(q < 1)) and len(q) > 1:
            raise InputError("p_g_given_r must lie strictly inside (0, 1)")
        gap = abs(q.sum() - 1.0)
        if gap > RENORMALIZE_TOL:
            raise InputError(f"p_g_given_r sums to {q.sum():.9f}; |sum - 1| exceeds {RENORMALIZE_TOL}")
        if gap > 0:
            if gap > 1e-9:
                log.warning("renormalizing p_g_given_r (sum was %.9f)", q.sum())
            q = q / q.sum()
        object.__setattr__(self, "p_r_given_g", p)
        object.__setattr__(self, "p_g_given_r", q)

    @property
    def n_strata(self) -> int:
        return len(self.strata)

    def index(self) -> dict[str, int]:
        return {g: i for i, g in enumerate(self.strata)}

    def p_g_given_not_r(self) -> np.ndarray:
        """Pr(G=g | R=0), implied by Bayes rule from the two stored columns."""
        w = self.p_g_given_r * (1.0 - self.p_r_given_g) / self.p_r_given_g
        return w / w.sum()


@dataclass
class SurnameCountMatrix:
    """Sparse stratum x surname counts m_gs with cached marginals."""

    strata: tuple[str, ...]
    surnames: tuple[str, ...]
    counts: sparse.csr_matrix

    def __post_init__(self):
        self.counts = sparse.csr_matrix(self.counts, dtype=np.int64)
        self.counts.sum_duplicates()
        self.counts.eliminate_zeros()
        if self.counts.shape != (len(self.strata), len(self.surnames)):
            raise InputError("count matrix shape does not match labels")
        if self.counts.nnz and self.counts.data.min() < 0:
            raise InputError("negative count")
        self.row_totals = np.asarray(self.counts.sum(axis=1)).ravel().astype(np.int64)
        self.col_totals = np.asarray(self.counts.sum(axis=0)).ravel().astype(np.int64)
        self.total = int(self.row_totals.sum())

    @classmethod
    def from_dense(cls, strata, surnames, dense) -> "SurnameCountMatrix":
        return cls(tuple(strata), tuple(surnames), sparse.csr_matrix(np.asarray(dense, dtype=np.int64)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    def toarray(self) -> np.ndarray:
        return self.counts.toarray()

    def get(self, stratum: str, surname: str) -> int:
        g = self.strata.index(stratum)
        s = self.surnames.index(surname)
        return int(self.counts[g, s])

    def by_surname(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSC-style (indptr, stratum index, count) over surnames, nonzero cells only."""
        csc = self.counts.tocsc()
        csc.sort_indices()
        return (
            csc.indptr.astype(np.int64),
            csc.indices.astype(np.int64),
            csc.data.astype(np.float64),
        )

    def surname_index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.surnames)}

    def __eq__(self, other) -> bool:
        if not isinstance(other, SurnameCountMatrix):
            return NotImplemented
        return (
            self.strata == other.strata
            and self.surnames == other.surnames
            and (self.counts != other.counts).nnz == 0
        )


@dataclass
class FrameAggregate:
    """Frame counts N_gs. with stratum totals and the training-data filter H(s)."""

    strata: tuple[str, ...]
    surnames: tuple[str, ...]
    counts: sparse.csr_matrix
    first_name_counts: dict[str, int] = field(default_factory=dict)
    keep: np.ndarray | None = None

    def __post_init__(self):
        self.counts = sparse.csr_matrix(self.counts, dtype=np.int64)
        self.counts.sum_duplicates()
        self.counts.eliminate_zeros()
        if self.counts.shape != (len(self.strata), len(self.surnames)):
            raise InputError("frame count matrix shape does not match labels")
        self.stratum_totals = np.asarray(self.counts.sum(axis=1)).ravel().astype(np.int64)
        self.total = int(self.stratum_totals.sum())
        if self.keep is None:
            self.keep = np.ones(len(self.surnames), dtype=bool)
        self.keep = np.asarray(self.keep, dtype=bool)

    def with_filter(self, minority: SurnameCountMatrix) -> "FrameAggregate":
        """Set H(s) = 1 exactly for surnames with m_.s > 0."""
        seen = {s for s, c in zip(minority.surnames, minority.col_totals) if c > 0}
        keep = np.array([s in seen for s in self.surnames], dtype=bool)
        return FrameAggregate(self.strata, self.surnames, self.counts, dict(self.first_name_counts), keep)

    def filtered_stratum_totals(self) -> np.ndarray:
        """N*_g: frame units whose surname passes the filter."""
        return np.asarray(self.counts @ self.keep.astype(np.int64)).ravel()

    def surname_index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.surnames)}

    def share(self) -> sparse.csr_matrix:
        """P-hat(s | g) = N_gs. / N_g. as a sparse matrix."""
        if np.any(self.stratum_totals == 0):
            bad = [g for g, n in zip(self.strata, self.stratum_totals) if n == 0]
            raise InputError(f"frame stratum with no units: {bad[:5]}")
        inv = sparse.diags(1.0 / self.stratum_totals.astype(float))
        return sparse.csr_matrix(inv @ self.counts.astype(float))


@dataclass
class UnitRoster:
    frame: pd.DataFrame

    def __post_init__(self):
        need = {"unit_id", "first_name", "surname", "stratum"}
        missing = need - set(self.frame.columns)
        if missing:
            raise InputError(f"roster missing columns: {sorted(missing)}")
        if self.frame["unit_id"].duplicated().any():
            dup = self.frame.loc[self.frame["unit_id"].duplicated(), "unit_id"].iloc[0]
            raise InputError(f"duplicate unit_id {dup!r}")
        if self.frame[["surname", "stratum"]].isna().any().any():
            raise InputError("roster rows must have surname and stratum")

    def __len__(self) -> int:
        return len(self.frame)

    def first_name_counts(self) -> dict[str, int]:
        return Counter(self.frame["first_name"].dropna().tolist())

    def to_frame_aggregate(self, strata: Sequence[str] | None = None) -> FrameAggregate:
        strata = tuple(strata) if strata is not None else tuple(sorted(self.frame["stratum"].unique()))
        grouped = self.frame.groupby(["stratum", "surname"]).size()
        records = ((s, g, int(n)) for (g, s), n in grouped.items())
        agg = frame_from_counts(records, strata)
        agg.first_name_counts = dict(self.first_name_counts())
        return agg


# --------------------------------------------------------------------------
# Canonicalization
# --------------------------------------------------------------------------

_WS = re.compile(r"\s+")


def fold(raw: str) -> str:
    """Uppercase ASCII after NFKD folding, apostrophes removed, whitespace collapsed."""
    text = unicodedata.normalize("NFKD", str(raw))
    text = text.encode("ascii", "ignore").decode("ascii")
    text = text.replace("'", "").replace("`", "")
    return _WS.sub(" ", text).strip().upper()


def normalize_surname(raw: str, reference: Iterable[str] | None = None) -> list[str]:
    """Canonical surname(s) for one raw value.

    A hyphenated name is split into its components only when every component
    already exists in `reference`; otherwise the hyphenated form is kept.
    """
    name = fold(raw)
    name = re.sub(r"\s*-\s*", "-", name)
    if not name:
        raise InputError("empty surname")
    if "-" not in name:
        return [name]
    parts = [p for p in name.split("-") if p]
    ref = reference if reference is not None else ()
    if len(parts) > 1 and all(p in ref for p in parts):
        return parts
    return [name]


def load_nicknames(path: str | Path | None = None) -> dict[str, str]:
    if path is None:
        text = resources.files("bisgsamp.data").joinpath("nicknames.csv").read_text()
    else:
        text = Path(path).read_text(encoding="utf-8")
    rows = csv.DictReader(text.splitlines())
    return {fold(r["nickname"]): fold(r["canonical"]) for r in rows}


def load_deny_list(path: str | Path | None = None) -> list[re.Pattern]:
    if path is None:
        text = resources.files("bisgsamp.data").joinpath("deny_list.txt").read_text()
    else:
        text = Path(path).read_text(encoding="utf-8")
    pats = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            pats.append(re.compile(line))
    return pats


_DEFAULT_NICK: dict[str, str] | None = None
_DEFAULT_DENY: list[re.Pattern] | None = None


def _defaults() -> tuple[dict[str, str], list[re.Pattern]]:
    global _DEFAULT_NICK, _DEFAULT_DENY
    if _DEFAULT_NICK is None:
        _DEFAULT_NICK = load_nicknames()
        _DEFAULT_DENY = load_deny_list()
    return _DEFAULT_NICK, _DEFAULT_DENY


def normalize_first_name(
    raw: str,
    nicknames: Mapping[str, str] | None = None,
    deny: Sequence[re.Pattern] | None = None,
) -> str:
    """Canonical first name; raises DropRow for deny-listed tokens."""
    default_nick, default_deny = _defaults()
    nicknames = default_nick if nicknames is None else nicknames
    deny = default_deny if deny is None else deny

    name = fold(raw)
    if not name:
        raise DropRow("empty first name")
    tokens = name.split(" ")
    if len(tokens) > 1:
        # "E ADELE" and "ADELE E" both reduce to the multi-character part
        kept = [t for t in tokens if len(t) > 1]
        if kept:
            tokens = kept
    name = " ".join(tokens)
    for pat in deny:
        if pat.search(name):
            raise DropRow(f"non-name token {name!r}")
    return nicknames.get(name, name)


# --------------------------------------------------------------------------
# Aggregation
# --------------------------------------------------------------------------


def expand_hyphenated(
    records: Iterable[tuple[str | None, str, str]], reference: Iterable[str]
) -> Iterator[tuple[str | None, str, str]]:
    """Replace splittable hyphenated surnames by one pseudo-row per component.

    The first name rides on the first component only, so first-name totals
    still count people rather than pseudo-rows.
    """
    ref = set(reference)
    for f, s, g in records:
        for k, part in enumerate(normalize_surname(s, ref)):
            yield (f if k == 0 else None), part, g


def aggregate_counts(
    records: Iterable[tuple[str | None, str, str]],
    strata: Sequence[str],
    reference: Iterable[str] | None = None,
    unknown: str = "drop",
) -> tuple[SurnameCountMatrix, dict[str, int]]:
    """Count (first name, surname, stratum) records into m_gs and first-name totals.

    Records are assumed normalized. When `reference` is given, hyphenated
    surnames whose components all appear in it are split first. Records in
    a stratum outside `strata` are dropped with a logged count, or raise
    when `unknown="abort"`.
    """
    if unknown not in ("drop", "abort"):
        raise ValueError("unknown must be 'drop' or 'abort'")
    if reference is not None:
        records = expand_hyphenated(records, reference)
    gidx = {g: i for i, g in enumerate(strata)}
    cells: Counter = Counter()
    first: Counter = Counter()
    dropped = 0
    for f, s, g in records:
        if g not in gidx:
            if unknown == "abort":
                raise InputError(f"unknown stratum {g!r}")
            dropped += 1
            continue
        cells[(gidx[g], s)] += 1
        if f:
            first[f] += 1
    if dropped:
        log.warning("dropped %d records with strata outside the geo prior", dropped)
    surnames = tuple(sorted({s for _, s in cells}))
    sidx = {s: j for j, s in enumerate(surnames)}
    if cells:
        rows, cols, vals = zip(*((gi, sidx[s], n) for (gi, s), n in sorted(cells.items(), key=lambda kv: (kv[0][0], kv[0][1]))))
    else:
        rows, cols, vals = (), (), ()
    mat = sparse.csr_matrix(
        (np.asarray(vals, dtype=np.int64), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(len(strata), len(surnames)),
    )
    return SurnameCountMatrix(tuple(strata), surnames, mat), dict(sorted(first.items()))


def frame_from_counts(records: Iterable[tuple[str, str, int]], strata: Sequence[str]) -> FrameAggregate:
    """Build a FrameAggregate from (surname, stratum, count) triples."""
    gidx = {g: i for i, g in enumerate(strata)}
    cells: Counter = Counter()
    dropped = 0
    for s, g, n in records:
        if g not in gidx:
            dropped += 1
            continue
        if n < 0:
            raise InputError(f"negative frame count for {s!r} in {g!r}")
        cells[(gidx[g], s)] += int(n)
    if dropped:
        log.warning("dropped %d frame rows with strata outside the geo prior", dropped)
    surnames = tuple(sorted({s for _, s in cells}))
    sidx = {s: j for j, s in enumerate(surnames)}
    items = sorted(cells.items())
    rows = np.fromiter((gi for (gi, _), _ in items), dtype=np.int64, count=len(items))
    cols = np.fromiter((sidx[s] for (_, s), _ in items), dtype=np.int64, count=len(items))
    vals = np.fromiter((n for _, n in items), dtype=np.int64, count=len(items))
    mat = sparse.csr_matrix((vals, (rows, cols)), shape=(len(strata), len(surnames)))
    return FrameAggregate(tuple(strata), surnames, mat)


# --------------------------------------------------------------------------
# CSV loaders
# --------------------------------------------------------------------------


def _read_csv(path: str | Path, required: Sequence[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    df.columns = [c.strip() for c in df.columns]
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise InputError(f"{path.name}: missing column(s) {missing}")
    return df


def load_geo_prior(path: str | Path) -> GeoPrior:
    df = _read_csv(path, ["stratum", "p_r_given_g", "p_g_given_r"])
    strata = [s.strip() for s in df["stratum"]]
    if len(set(strata)) != len(strata):
        dup = pd.Series(strata)[pd.Series(strata).duplicated()].iloc[0]
        raise InputError(f"duplicate stratum {dup!r}")
    try:
        p = df["p_r_given_g"].astype(float).to_numpy()
        q = df["p_g_given_r"].astype(float).to_numpy()
    except ValueError as exc:
        raise InputError(f"non-numeric probability: {exc}") from None
    return GeoPrior(tuple(strata), p, q)


def default_geo_prior() -> GeoPrior:
    """Illustrative 51-stratum prior shipped with the package (not survey data)."""
    path = resources.files("bisgsamp.data").joinpath("geo_prior_us51.csv")
    with resources.as_file(path) as p:
        return load_geo_prior(p)


def load_minority_names(
    path: str | Path,
    strata: Sequence[str],
    nicknames: Mapping[str, str] | None = None,
    deny: Sequence[re.Pattern] | None = None,
    unknown: str = "drop",
) -> tuple[SurnameCountMatrix, dict[str, int]]:
    """Parse minority_names.csv (surname, stratum[, first_name]) into counts.

    Hyphenated surnames are split only into components that occur as
    standalone surnames elsewhere in the same file. A deny-listed first name
    drops the first-name entry but keeps the surname row.
    """
    df = _read_csv(path, ["surname", "stratum"])
    has_first = "first_name" in df.columns
    raw = []
    for row in df.itertuples(index=False):
        s = fold(row.surname)
        if not s:
            continue
        s = re.sub(r"\s*-\s*", "-", s)
        f = None
        if has_first and str(row.first_name).strip():
            try:
                f = normalize_first_name(row.first_name, nicknames, deny)
            except DropRow:
                f = None
        raw.append((f, s, str(row.stratum).strip()))
    reference = {s for _, s, _ in raw if "-" not in s}
    return aggregate_counts(raw, strata, reference=reference, unknown=unknown)


def load_frame_counts(path: str | Path, strata: Sequence[str]) -> FrameAggregate:
    df = _read_csv(path, ["surname", "stratum", "count"])
    try:
        n = df["count"].astype(np.int64)
    except ValueError as exc:
        raise InputError(f"non-integer frame count: {exc}") from None
    recs = zip((fold(s) for s in df["surname"]), (g.strip() for g in df["stratum"]), n)
    return frame_from_counts(recs, strata)


def load_roster(
    path: str | Path,
    nicknames: Mapping[str, str] | None = None,
    deny: Sequence[re.Pattern] | None = None,
) -> UnitRoster:
    """Parse roster.csv; extra columns are kept as covariates.

    Deny-listed first names are blanked (the unit stays in the frame).
    """
    df = _read_csv(path, ["unit_id", "first_name", "surname", "stratum"])
    df["unit_id"] = df["unit_id"].str.strip()
    df["stratum"] = df["stratum"].str.strip()
    df["surname"] = [fold(s) for s in df["surname"]]

    def _first(x: str) -> str | None:
        if not x.strip():
            return None
        try:
            return normalize_first_name(x, nicknames, deny)
        except DropRow:
            return None

    df["first_name"] = [_first(x) for x in df["first_name"]]
    if (df["surname"] == "").any():
        raise InputError("roster row with empty surname")
    return UnitRoster(df)
