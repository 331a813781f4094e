"""Assemble Pr(R=1 | F=f, S=s, G=g) from posterior surname distributions.

The surname layer comes from Bayes rule,

    Pr(R=1 | s, g) = Pr(s | g, R=1) Pr(R=1 | g) / Pr(s | g),

with Pr(s | g, R=1) the clamped posterior mean theta_gs and Pr(s | g) the
frame share N_gs. / N_g.. A first-name ratio r_f multiplies the surname
layer at lookup time, and the product is truncated at 1. Frame surnames
absent from the training data (H(s) = 0) get probability exactly 0.

Everything is keyed by the frame's nonzero (g, s) cells, so the table never
materializes a dense first-name x surname x stratum product.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

from .hiermodel import PosteriorSummary
from .ingest import FrameAggregate, GeoPrior, InputError

log = logging.getLogger(__name__)


def bound_interval(share: float, p_r_given_g: float) -> tuple[float, float]:
    """Feasible range of Pr(s | g, R=1) given the frame share Pr(s | g) and Pr(R=1 | g)."""
    lo = max((share - (1.0 - p_r_given_g)) / p_r_given_g, 0.0)
    hi = min(share / p_r_given_g, 1.0)
    return lo, hi


@dataclass
class ThetaBounds:
    """Bounds on theta_gs for frame cells with H(s) = 1 and N_gs. > 0."""

    strata: tuple[str, ...]
    surnames: tuple[str, ...]
    g: np.ndarray
    s: np.ndarray
    share: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def _prior_for(frame: FrameAggregate, prior: GeoPrior) -> np.ndarray:
    idx = prior.index()
    missing = [g for g in frame.strata if g not in idx]
    if missing:
        raise InputError(f"frame strata missing from geo prior: {missing[:5]}")
    return prior.p_r_given_g[[idx[g] for g in frame.strata]]


def theta_bounds(frame: FrameAggregate, prior: GeoPrior) -> ThetaBounds:
    p = _prior_for(frame, prior)
    coo = frame.counts.tocoo()
    sel = frame.keep[coo.col] & (coo.data > 0)
    g, s, n = coo.row[sel], coo.col[sel], coo.data[sel].astype(np.float64)
    order = np.lexsort((s, g))
    g, s, n = g[order], s[order], n[order]
    Ng = frame.stratum_totals[g].astype(np.float64)
    if np.any(Ng == 0):
        raise InputError("frame stratum total is 0")
    share = n / Ng
    pg = p[g]
    lower = np.maximum((share - (1.0 - pg)) / pg, 0.0)
    upper = np.minimum(share / pg, 1.0)
    return ThetaBounds(frame.strata, frame.surnames, g.astype(np.int64), s.astype(np.int64), share, lower, upper)


@dataclass
class ClampedTheta:
    bounds: ThetaBounds
    theta: np.ndarray  # clamped, per bounds cell
    theta_raw: np.ndarray
    n_below: int
    n_above: int

    @property
    def n_clamped(self) -> int:
        return self.n_below + self.n_above


def _summary_theta_for_cells(summary: PosteriorSummary, bounds: ThetaBounds) -> np.ndarray:
    gi = {g: i for i, g in enumerate(summary.strata)}
    si = {s: i for i, s in enumerate(summary.surnames)}
    g_map = np.array([gi.get(g, -1) for g in bounds.strata], dtype=np.int64)
    s_map = np.array([si.get(s, -1) for s in bounds.surnames], dtype=np.int64)
    rows = g_map[bounds.g]
    cols = s_map[bounds.s]
    if np.any(rows < 0):
        raise InputError("frame stratum absent from the posterior summary")
    if np.any(cols < 0):
        raise InputError("a kept frame surname is absent from the posterior summary")
    return summary.theta_hat[rows, cols]


def clamp_theta(summary: PosteriorSummary, bounds: ThetaBounds) -> ClampedTheta:
    """Move each theta_gs to its nearest bound when outside; no renormalization."""
    raw = _summary_theta_for_cells(summary, bounds)
    below = raw < bounds.lower
    above = raw > bounds.upper
    theta = np.minimum(np.maximum(raw, bounds.lower), bounds.upper)
    if below.any() or above.any():
        log.info("clamped %d theta cells (%d up, %d down)", int(below.sum() + above.sum()), int(below.sum()), int(above.sum()))
    return ClampedTheta(bounds, theta, raw, int(below.sum()), int(above.sum()))


@dataclass
class RatioTable:
    ratios: dict[str, float]
    min_count: int = 10
    cap: float = 10.0
    n_capped: int = 0
    excluded: list[str] = field(default_factory=list)

    def get(self, name: str | None) -> float:
        if name is None:
            return 1.0
        return self.ratios.get(name, 1.0)

    def lookup(self, names) -> np.ndarray:
        return np.array([self.get(f if isinstance(f, str) else None) for f in names], dtype=np.float64)

    def to_csv(self, path: str | Path) -> None:
        df = pd.DataFrame({"first_name": list(self.ratios.keys()), "ratio": list(self.ratios.values())})
        df.to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def read_csv(cls, path: str | Path, min_count: int = 10, cap: float = 10.0) -> "RatioTable":
        df = pd.read_csv(path, dtype={"first_name": str}, keep_default_na=False, float_precision="round_trip")
        return cls(dict(zip(df["first_name"], df["ratio"].astype(float))), min_count, cap)


def first_name_ratio(
    minority_fn: Mapping[str, int],
    frame_fn: Mapping[str, int],
    min_count: int = 10,
    cap: float = 10.0,
) -> RatioTable:
    """Ratio of each first name's share among minority records to its share in the frame.

    Only names whose combined count reaches `min_count` get a ratio; a name
    missing from either side has no defined ratio and is left out (it
    multiplies by 1 downstream).
    """
    M = float(sum(minority_fn.values()))
    N = float(sum(frame_fn.values()))
    if M <= 0 or N <= 0:
        raise InputError("first-name totals must be positive")
    if cap <= 0:
        raise ValueError("cap must be positive")
    ratios: dict[str, float] = {}
    excluded = []
    n_capped = 0
    for name in sorted(set(minority_fn) | set(frame_fn)):
        m = minority_fn.get(name, 0)
        n = frame_fn.get(name, 0)
        if m + n < min_count or m == 0:
            continue
        if n == 0:
            excluded.append(name)
            continue
        r = (m / M) / (n / N)
        if r > cap:
            r = cap
            n_capped += 1
        ratios[name] = r
    if excluded:
        log.warning("%d first names absent from the frame have no ratio: %s", len(excluded), excluded[:5])
    return RatioTable(ratios, min_count, cap, n_capped, excluded)


@dataclass
class BisgTable:
    """Surname-layer probabilities over frame cells plus the first-name ratios."""

    strata: tuple[str, ...]
    surnames: tuple[str, ...]
    g: np.ndarray
    s: np.ndarray
    frame_count: np.ndarray
    theta: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    p_surname: np.ndarray
    ratios: RatioTable
    keep: np.ndarray  # H(s) over self.surnames

    def __post_init__(self):
        self._index = {(int(a), int(b)): k for k, (a, b) in enumerate(zip(self.g, self.s))}
        self._gidx = {g: i for i, g in enumerate(self.strata)}
        self._sidx = {s: i for i, s in enumerate(self.surnames)}

    def surname_prob(self, stratum: str, surname: str) -> float:
        """Pr(R=1 | s, g); 0 for filtered or unseen cells."""
        gi = self._gidx.get(stratum)
        si = self._sidx.get(surname)
        if gi is None or si is None:
            return 0.0
        k = self._index.get((gi, si))
        return 0.0 if k is None else float(self.p_surname[k])

    def prob(self, first_name: str | None, surname: str, stratum: str) -> float:
        return min(self.surname_prob(stratum, surname) * self.ratios.get(first_name), 1.0)

    def unit_probabilities(self, roster_frame: pd.DataFrame, use_first_names: bool = True) -> np.ndarray:
        """p-hat for every roster row (columns first_name, surname, stratum)."""
        gi = roster_frame["stratum"].map(self._gidx)
        si = roster_frame["surname"].map(self._sidx)
        out = np.zeros(len(roster_frame), dtype=np.float64)
        ok = gi.notna().to_numpy() & si.notna().to_numpy()
        keys = zip(gi[ok].astype(int), si[ok].astype(int))
        cell = np.array([self._index.get(k, -1) for k in keys], dtype=np.int64)
        vals = np.where(cell >= 0, self.p_surname[np.maximum(cell, 0)], 0.0) if cell.size else np.zeros(0)
        out[ok] = vals
        if use_first_names:
            out = np.minimum(out * self.ratios.lookup(roster_frame["first_name"].tolist()), 1.0)
        return out

    def to_csv(self, path: str | Path) -> None:
        df = pd.DataFrame(
            {
                "stratum": np.asarray(self.strata, dtype=object)[self.g],
                "surname": np.asarray(self.surnames, dtype=object)[self.s],
                "theta_hat": self.theta,
                "theta_lower": self.lower,
                "theta_upper": self.upper,
                "p_surname_layer": self.p_surname,
                "frame_count": self.frame_count,
            }
        )
        df.to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def read_csv(cls, path: str | Path, ratios: RatioTable, frame: FrameAggregate) -> "BisgTable":
        """Rebuild from bisg.csv; cell keys are re-indexed against `frame`."""
        df = pd.read_csv(path, dtype={"stratum": str, "surname": str}, keep_default_na=False, float_precision="round_trip")
        gi = {g: i for i, g in enumerate(frame.strata)}
        si = {s: i for i, s in enumerate(frame.surnames)}
        g = df["stratum"].map(gi)
        s = df["surname"].map(si)
        if g.isna().any() or s.isna().any():
            raise InputError("bisg.csv has cells not present in the frame")
        keep = np.zeros(len(frame.surnames), dtype=bool)
        keep[s.to_numpy(dtype=np.int64)] = True
        keep &= frame.keep
        return cls(
            frame.strata, frame.surnames, g.to_numpy(dtype=np.int64), s.to_numpy(dtype=np.int64),
            df["frame_count"].to_numpy(dtype=np.int64), df["theta_hat"].to_numpy(float),
            df["theta_lower"].to_numpy(float), df["theta_upper"].to_numpy(float),
            df["p_surname_layer"].to_numpy(float), ratios, keep,
        )


def assemble(
    clamped: ClampedTheta,
    prior: GeoPrior,
    frame: FrameAggregate,
    ratios: RatioTable | None = None,
) -> BisgTable:
    """Surname layer theta * Pr(R=1|g) / Pr(s|g) on every kept frame cell."""
    b = clamped.bounds
    if b.strata != frame.strata or b.surnames != frame.surnames:
        raise InputError("bounds were computed on a different frame")
    p = _prior_for(frame, prior)
    layer = clamped.theta * p[b.g] / b.share
    counts = np.asarray(frame.counts[b.g, b.s]).ravel().astype(np.int64)
    ratios = ratios if ratios is not None else RatioTable({})
    return BisgTable(
        frame.strata, frame.surnames, b.g, b.s, counts, clamped.theta, b.lower, b.upper,
        layer, ratios, frame.keep.copy(),
    )


def build_table(
    summary: PosteriorSummary,
    prior: GeoPrior,
    frame: FrameAggregate,
    ratios: RatioTable | None = None,
) -> BisgTable:
    """Bounds, clamping and assembly in one call."""
    bounds = theta_bounds(frame, prior)
    return assemble(clamp_theta(summary, bounds), prior, frame, ratios)
