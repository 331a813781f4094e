"""Design-based estimates from survey responses.

Weights start from inverse inclusion probabilities and may be trimmed,
post-stratified or raked to known margins before a Hajek ratio estimate.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .ingest import GeoPrior, InputError

log = logging.getLogger(__name__)


class EstimationError(ValueError):
    """Estimator undefined on the given data."""


@dataclass(frozen=True)
class WeightVector:
    values: np.ndarray
    tag: str = "ipw"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise EstimationError("weights must be positive and finite")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]

    def summary(self) -> dict:
        v = self.values
        return {
            "tag": self.tag,
            "n": int(v.size),
            "sum": float(v.sum()),
            "min": float(v.min()),
            "max": float(v.max()),
            # Kish effective sample size
            "ess": float(v.sum() ** 2 / np.dot(v, v)),
        }


class ResponseSet:
    """Survey responses joined to their inclusion probabilities.

    Expects columns unit_id, responded, r plus any y_* and x_* columns;
    `sample` supplies unit_id and pi (and stratum).
    """

    def __init__(self, responses: pd.DataFrame, sample: pd.DataFrame):
        need = {"unit_id", "responded", "r"}
        missing = need - set(responses.columns)
        if missing:
            raise InputError(f"responses missing columns: {sorted(missing)}")
        resp = responses.copy()
        resp["unit_id"] = resp["unit_id"].astype(str)
        smp = sample[["unit_id", "pi"] + (["stratum"] if "stratum" in sample.columns else [])].copy()
        smp["unit_id"] = smp["unit_id"].astype(str)
        if "stratum" in resp.columns and "stratum" in smp.columns:
            smp = smp.drop(columns="stratum")
        df = resp.merge(smp, on="unit_id", how="left", validate="one_to_one")
        if df["pi"].isna().any():
            bad = df.loc[df["pi"].isna(), "unit_id"].iloc[0]
            raise InputError(f"response unit {bad!r} not in the sample draw")
        if np.any((df["pi"] <= 0) | (df["pi"] > 1)):
            raise InputError("inclusion probabilities must lie in (0, 1]")
        df["responded"] = df["responded"].astype(int).astype(bool)
        df["r"] = df["r"].astype(float)
        self.frame = df

    def minority_respondents(self) -> pd.DataFrame:
        d = self.frame
        return d[d["responded"] & (d["r"] == 1)].reset_index(drop=True)

    def ipw(self, rows: pd.DataFrame | None = None) -> WeightVector:
        rows = self.minority_respondents() if rows is None else rows
        return WeightVector(1.0 / rows["pi"].to_numpy(dtype=np.float64), "ipw")


def hajek_mean(y, weights) -> float:
    """sum w y / sum w."""
    y = np.asarray(y, dtype=np.float64)
    w = weights.values if isinstance(weights, WeightVector) else np.asarray(weights, dtype=np.float64)
    if y.size == 0:
        raise EstimationError("no respondents")
    if y.shape != w.shape:
        raise EstimationError("y and weights differ in length")
    ok = ~np.isnan(y)
    if not ok.any():
        raise EstimationError("no non-missing outcomes")
    return float(np.dot(w[ok], y[ok]) / w[ok].sum())


def hajek_from_pi(y, pi) -> float:
    return hajek_mean(y, WeightVector(1.0 / np.asarray(pi, dtype=np.float64)))


def stratified_mean(y, strata: Sequence[str], prior: GeoPrior, strict: bool = False) -> float:
    """sum over g of (stratum mean of y) * Pr(G=g | R=1).

    Strata with prior mass but no respondents make the estimator undefined;
    by default they are dropped and the remaining prior mass renormalized.
    """
    y = np.asarray(y, dtype=np.float64)
    s = pd.Series(list(strata), dtype=object)
    if y.size == 0:
        raise EstimationError("no respondents")
    means = pd.Series(y).groupby(s).mean()
    q = pd.Series(prior.p_g_given_r, index=list(prior.strata))
    q = q[q > 0]
    empty = [g for g in q.index if g not in means.index]
    if empty:
        if strict:
            raise EstimationError(f"strata with prior mass but no respondents: {empty[:5]}")
        msg = f"dropping {len(empty)} strata without respondents and renormalizing ({empty[:5]})"
        log.warning(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        q = q.drop(index=empty)
    if q.sum() <= 0:
        raise EstimationError("no stratum with both prior mass and respondents")
    q = q / q.sum()
    return float((means.reindex(q.index) * q).sum())


@dataclass
class RakeResult:
    weights: WeightVector
    converged: bool
    iterations: int
    max_gap: float

    def diagnostics(self) -> dict:
        return {"converged": self.converged, "iterations": self.iterations, "max_gap": self.max_gap}


def rake(
    X: pd.DataFrame,
    margins: Sequence[tuple[str, Mapping]],
    init: WeightVector | np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int = 1000,
) -> RakeResult:
    """Iterative proportional fitting of weights to target margin distributions.

    Margins are visited in the given order each cycle. The total weight of
    `init` is preserved. Stops when every weighted margin is within `tol`
    of its target share.
    """
    n = len(X)
    if init is None:
        w = np.ones(n)
    else:
        w = np.array(init.values if isinstance(init, WeightVector) else init, dtype=np.float64)
    if w.shape[0] != n:
        raise EstimationError("init weights and X differ in length")
    total = w.sum()
    prepared = []
    for var, target in margins:
        t = pd.Series(dict(target), dtype=float)
        if np.any(t < 0) or abs(t.sum() - 1.0) > 1e-9:
            raise EstimationError(f"target for {var!r} is not a probability distribution")
        col = X[var]
        codes = pd.Categorical(col, categories=list(t.index))
        if np.any(codes.codes < 0):
            bad = col[codes.codes < 0].iloc[0]
            raise EstimationError(f"{var}={bad!r} observed in the sample but absent from the target")
        support = np.bincount(codes.codes, minlength=len(t))
        zero = [c for c, k, p in zip(t.index, support, t.values) if k == 0 and p > 0]
        if zero:
            raise EstimationError(f"target category {var}={zero[0]!r} has no sample support")
        prepared.append((var, codes.codes, t.to_numpy()))

    def gap(w):
        g = 0.0
        for _, codes, t in prepared:
            share = np.bincount(codes, weights=w, minlength=len(t)) / w.sum()
            g = max(g, float(np.max(np.abs(share - t))))
        return g

    it = 0
    g = gap(w)
    while g >= tol and it < max_iter:
        for _, codes, t in prepared:
            cur = np.bincount(codes, weights=w, minlength=len(t))
            with np.errstate(divide="ignore", invalid="ignore"):
                f = np.where(cur > 0, t * total / np.where(cur > 0, cur, 1.0), 0.0)
            w = w * f[codes]
        it += 1
        g = gap(w)
    converged = g < tol
    if not converged:
        log.warning("raking stopped after %d iterations with max margin gap %.3g", it, g)
    return RakeResult(WeightVector(w, "raked"), bool(converged), it, g)


def post_stratify(X: pd.DataFrame, var: str, target: Mapping, init=None) -> WeightVector:
    """Single-margin raking: one ratio adjustment per category."""
    res = rake(X, [(var, target)], init=init, tol=1e-12, max_iter=5)
    return WeightVector(res.weights.values, "post-stratified")


def trim_weights(weights, lo_pct: float = 0.0, hi_pct: float = 100.0) -> WeightVector:
    """Clip weights to their [lo_pct, hi_pct] percentiles (linear interpolation rule)."""
    if not (0 <= lo_pct < hi_pct <= 100):
        raise ValueError("need 0 <= lo_pct < hi_pct <= 100")
    w = weights.values if isinstance(weights, WeightVector) else np.asarray(weights, dtype=np.float64)
    lo, hi = np.percentile(w, [lo_pct, hi_pct], method="linear")
    return WeightVector(np.clip(w, lo, hi), "trimmed")


def derive_target(p_surname: pd.DataFrame, crosstab: pd.DataFrame, var: str = "x") -> pd.Series:
    """Pr(X=x | R=1) from surname-layer probabilities and a frame cross-tab.

    `p_surname` has columns stratum, surname, p; `crosstab` has columns
    stratum, surname, `var`, count. Assumes X is independent of R given
    (S, G). Frame cells without a probability contribute 0.
    """
    m = crosstab.merge(p_surname[["stratum", "surname", "p"]], on=["stratum", "surname"], how="left")
    m["p"] = m["p"].fillna(0.0)
    num = (m["p"] * m["count"]).groupby(m[var]).sum()
    if num.sum() <= 0:
        raise EstimationError("all-zero numerator: no frame unit has positive probability")
    return (num / num.sum()).sort_index()
