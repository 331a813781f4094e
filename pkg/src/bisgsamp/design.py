"""Allocation, inclusion probabilities, design diagnostics and Poisson draws.

Most functions work on `FrameCells`: groups of frame units that share a
stratum and an estimated membership probability. A cell is either a
(stratum, surname) pair weighted by its frame count or a single roster unit
with weight 1, so the same code serves surname-level planning and unit-level
sampling.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

from .ingest import FrameAggregate, GeoPrior, InputError

log = logging.getLogger(__name__)

METHODS = ("srs", "stratified", "stratified_filtered", "poisson")


class DesignError(ValueError):
    """Infeasible or ill-posed design request."""


@dataclass
class FrameCells:
    """Units grouped by (stratum, estimated probability).

    `n_units[g]` counts every frame unit in stratum g, including units whose
    surname was filtered out; `n_kept[g]` counts only H=1 units. Cells cover
    the H=1 units (and optionally extra filtered cells with p_hat > 0 for
    sensitivity analysis, marked keep=False).
    """

    strata: tuple[str, ...]
    g: np.ndarray
    weight: np.ndarray
    p_hat: np.ndarray
    n_units: np.ndarray
    n_kept: np.ndarray
    p_true: np.ndarray | None = None
    keep: np.ndarray | None = None

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=np.int64)
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.p_hat = np.asarray(self.p_hat, dtype=np.float64)
        self.n_units = np.asarray(self.n_units, dtype=np.float64)
        self.n_kept = np.asarray(self.n_kept, dtype=np.float64)
        if self.p_true is not None:
            self.p_true = np.asarray(self.p_true, dtype=np.float64)
        self.keep = np.ones(self.g.shape[0], dtype=bool) if self.keep is None else np.asarray(self.keep, dtype=bool)
        if np.any((self.p_hat < 0) | (self.p_hat > 1)):
            raise DesignError("cell probabilities must lie in [0, 1]")
        if np.any(self.weight < 0):
            raise DesignError("cell weights must be nonnegative")

    @property
    def L(self) -> int:
        return len(self.strata)

    @property
    def truth(self) -> np.ndarray:
        return self.p_hat if self.p_true is None else self.p_true

    def stratum_sum(self, values: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
        w = self.weight * values
        if mask is not None:
            w = np.where(mask, w, 0.0)
        return np.bincount(self.g, weights=w, minlength=self.L)

    def pi_g(self, filtered: bool = True) -> np.ndarray:
        """pi(g) = sum of p_hat over the stratum's (kept) units."""
        return self.stratum_sum(self.p_hat, self.keep if filtered else None)

    def max_p(self, filtered: bool = True) -> np.ndarray:
        out = np.zeros(self.L)
        mask = (self.weight > 0) & (self.keep if filtered else True)
        np.maximum.at(out, self.g[mask], self.p_hat[mask])
        return out

    # the stratified allocation reads these two like a FrameAggregate
    @property
    def stratum_totals(self) -> np.ndarray:
        return self.n_units

    def filtered_stratum_totals(self) -> np.ndarray:
        return self.n_kept

    @classmethod
    def from_bisg(cls, table, frame: FrameAggregate) -> "FrameCells":
        """Surname-level cells from a BisgTable (first-name factor not applied)."""
        return cls(
            frame.strata, table.g, table.frame_count.astype(np.float64), np.minimum(table.p_surname, 1.0),
            frame.stratum_totals, frame.filtered_stratum_totals(),
        )

    @classmethod
    def from_units(cls, strata: Sequence[str], stratum: Sequence[str], p_hat, keep=None, p_true=None) -> "FrameCells":
        gi = {g: i for i, g in enumerate(strata)}
        g = np.array([gi[x] for x in stratum], dtype=np.int64)
        keep = np.ones(len(g), dtype=bool) if keep is None else np.asarray(keep, dtype=bool)
        n_units = np.bincount(g, minlength=len(strata)).astype(np.float64)
        n_kept = np.bincount(g[keep], minlength=len(strata)).astype(np.float64)
        return cls(tuple(strata), g, np.ones(len(g)), p_hat, n_units, n_kept, p_true, keep)


@dataclass
class Allocation:
    strata: tuple[str, ...]
    targets: np.ndarray  # integers summing to n
    targets_real: np.ndarray
    capped: list[str] = field(default_factory=list)

    @property
    def total(self) -> int:
        return int(self.targets.sum())


# --------------------------------------------------------------------------
# Rounding and capping
# --------------------------------------------------------------------------


def largest_remainder(real: np.ndarray, n: int, caps: np.ndarray | None = None) -> np.ndarray:
    """Integers summing to n, each floor or ceil of `real`, never above `caps`."""
    real = np.asarray(real, dtype=np.float64)
    base = np.floor(real).astype(np.int64)
    left = n - int(base.sum())
    if left < 0:
        raise DesignError("allocation exceeds the target total")
    rem = real - base
    order = np.argsort(-rem, kind="stable")
    for k in order:
        if left == 0:
            break
        if caps is not None and base[k] + 1 > caps[k] + 1e-9:
            continue
        base[k] += 1
        left -= 1
    if left:
        raise DesignError("cannot round the allocation without exceeding a stratum cap")
    return base


def _cap_redistribute(weights: np.ndarray, n: float, caps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Proportional allocation of n with per-stratum caps; clipped mass goes to unclipped strata."""
    w = np.asarray(weights, dtype=np.float64)
    if caps.sum() < n * (1 - 1e-12):
        raise DesignError(f"target {n} exceeds total feasible size {caps.sum():.3f}")
    clipped = np.zeros(w.shape[0], dtype=bool)
    alloc = np.zeros_like(w)
    for _ in range(w.shape[0] + 1):
        free = ~clipped & (w > 0)
        rest = n - caps[clipped].sum()
        alloc = np.where(clipped, caps, 0.0)
        if free.any():
            alloc[free] = rest * w[free] / w[free].sum()
        over = free & (alloc > caps)
        if not over.any():
            break
        clipped |= over
    return alloc, clipped


def _proportional(weights: np.ndarray, n: int, strata, caps=None) -> Allocation:
    w = np.asarray(weights, dtype=np.float64)
    if not np.all(np.isfinite(w)) or w.sum() <= 0:
        raise DesignError("allocation weights sum to zero")
    if n < 1:
        raise DesignError("target sample size must be positive")
    if caps is None:
        real = n * w / w.sum()
        clipped = np.zeros(w.shape[0], dtype=bool)
    else:
        real, clipped = _cap_redistribute(w, float(n), caps)
    ints = largest_remainder(real, n, None if caps is None else np.floor(caps + 1e-9))
    return Allocation(tuple(strata), ints, real, [s for s, c in zip(strata, clipped) if c])


def _align_prior(strata: Sequence[str], prior: GeoPrior) -> GeoPrior:
    if tuple(strata) == prior.strata:
        return prior
    idx = prior.index()
    missing = [g for g in strata if g not in idx]
    if missing:
        raise InputError(f"strata missing from geo prior: {missing[:5]}")
    order = [idx[g] for g in strata]
    q = prior.p_g_given_r[order]
    return GeoPrior(tuple(strata), prior.p_r_given_g[order], q / q.sum())


# --------------------------------------------------------------------------
# Allocations
# --------------------------------------------------------------------------


def stratified_weights(p: np.ndarray, N: np.ndarray, N_star: np.ndarray | None = None) -> np.ndarray:
    """sqrt(p_g) N_g, or with filtering sqrt(p_best) N*_g where p_best = N_g p_g / N*_g."""
    if N_star is None:
        return np.sqrt(p) * N
    with np.errstate(divide="ignore", invalid="ignore"):
        p_best = np.where(N_star > 0, N * p / np.where(N_star > 0, N_star, 1.0), 0.0)
    return np.sqrt(p_best) * N_star


def stratified_allocation(prior: GeoPrior, frame, n: int, filtered: bool = False) -> Allocation:
    """Classic disproportionate allocation n_g proportional to sqrt(Pr(R=1|g)) N_g."""
    strata = frame.strata
    pr = _align_prior(strata, prior)
    N = np.asarray(frame.stratum_totals, dtype=np.float64)
    N_star = np.asarray(frame.filtered_stratum_totals(), dtype=np.float64) if filtered else None
    w = stratified_weights(pr.p_r_given_g, N, N_star)
    return _proportional(w, n, strata)


def success_rate(cells: FrameCells, g: int | str, filtered: bool = True) -> float:
    """Pr(R=1 | I=1, G=g) = sum N p^2 / sum N p over the stratum's (kept) cells."""
    gi = cells.strata.index(g) if isinstance(g, str) else int(g)
    sel = cells.g == gi
    if filtered:
        sel &= cells.keep
    num = float(np.dot(cells.weight[sel], cells.p_hat[sel] ** 2))
    den = float(np.dot(cells.weight[sel], cells.p_hat[sel]))
    if den <= 0:
        raise DesignError(f"stratum {cells.strata[gi]!r} has no positive probabilities")
    return num / den


def success_rates(cells: FrameCells, filtered: bool = True) -> np.ndarray:
    mask = cells.keep if filtered else None
    num = cells.stratum_sum(cells.p_hat**2, mask)
    den = cells.stratum_sum(cells.p_hat, mask)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)


def poisson_weights(
    cells: FrameCells, prior: GeoPrior, filtered: bool, replication_bug: bool = False, skip_empty: bool = False
) -> np.ndarray:
    """Unnormalized allocation weights; `skip_empty` gives weight 0 to strata with no positive p_hat."""
    pr = _align_prior(cells.strata, prior)
    pi_star = cells.pi_g(filtered=True)
    if replication_bug:
        return np.sqrt(pr.p_r_given_g * pi_star)
    if filtered:
        sq = cells.stratum_sum(cells.p_hat**2, cells.keep)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(sq > 0, pi_star**1.5 / np.sqrt(np.where(sq > 0, sq, 1.0)), 0.0)
    rate = success_rates(cells, filtered=False)
    bad = [g for g, r, q in zip(cells.strata, rate, pr.p_g_given_r) if q > 0 and not r > 0]
    if bad and skip_empty:
        log.warning("%d strata with positive prior mass have no positive probabilities; allocating 0", len(bad))
    elif bad:
        raise DesignError(f"all-zero probabilities in strata with positive prior mass: {bad[:5]}")
    return np.where((pr.p_g_given_r > 0) & (rate > 0), pr.p_g_given_r / np.sqrt(np.where(rate > 0, rate, 1.0)), 0.0)


def poisson_caps(cells: FrameCells, filtered: bool = True) -> np.ndarray:
    """Largest feasible n_g: pi(g) / max p_hat, so that no pi_i exceeds 1."""
    pig = cells.pi_g(filtered)
    mx = cells.max_p(filtered)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(mx > 0, pig / np.where(mx > 0, mx, 1.0), 0.0)


def poisson_allocation(
    cells: FrameCells,
    prior: GeoPrior,
    n: int,
    filtered: bool = True,
    replication_bug: bool = False,
    cap: bool = True,
    skip_empty: bool = False,
) -> Allocation:
    """Optimal Poisson targets, clipped to the per-stratum feasibility bound.

    Unfiltered: n_g proportional to Pr(G=g|R=1) / sqrt(success rate). Filtered:
    proportional to pi*(g)^1.5 / sqrt(sum N p^2). `replication_bug` gives the
    alternative sqrt(Pr(R=1|g) pi*(g)) weighting, for replication only.
    """
    if replication_bug:
        log.warning("using the replication-only allocation sqrt(Pr(R=1|g) * pi*(g))")
    w = poisson_weights(cells, prior, filtered, replication_bug, skip_empty)
    caps = poisson_caps(cells, filtered=True) if cap else None
    alloc = _proportional(w, n, cells.strata, caps)
    if alloc.capped:
        log.info("clipped %d strata to their feasibility bound: %s", len(alloc.capped), alloc.capped[:5])
    return alloc


# --------------------------------------------------------------------------
# Inclusion probabilities
# --------------------------------------------------------------------------


@dataclass
class InclusionResult:
    pi: np.ndarray  # per cell
    n_capped_cells: int
    n_capped_units: float
    rounds: int


def inclusion_probabilities(cells: FrameCells, targets: np.ndarray, filtered: bool = True) -> InclusionResult:
    """pi = n_g p / pi(g), with iterative capping at 1 until a fixed point.

    Each round fixes cells at 1 and spreads the rest of n_g over the
    uncapped cells in proportion to p, so sum over the stratum stays n_g.
    """
    targets = np.asarray(targets, dtype=np.float64)
    active = (cells.p_hat > 0) & (cells.keep if filtered else True) & (cells.weight > 0)
    pi = np.zeros(cells.g.shape[0])
    capped = np.zeros_like(active)
    rounds = 0
    for gi in range(cells.L):
        sel = np.flatnonzero((cells.g == gi) & active)
        if targets[gi] <= 0:
            continue
        if sel.size == 0:
            raise DesignError(f"pi(g)=0 in stratum {cells.strata[gi]!r} with positive target")
        w = cells.weight[sel]
        p = cells.p_hat[sel]
        if targets[gi] > w.sum() * (1 + 1e-12):
            raise DesignError(f"target for {cells.strata[gi]!r} exceeds its unit count")
        is_cap = np.zeros(sel.size, dtype=bool)
        while True:
            rounds += 1
            rest = targets[gi] - w[is_cap].sum()
            free = ~is_cap
            denom = float(np.dot(w[free], p[free]))
            # p / denom first: it is at most 1/w on free cells, and rest * p can underflow
            share = np.divide(p, denom, out=np.zeros_like(p), where=free) if denom > 0 else np.zeros_like(p)
            vals = np.where(is_cap, 1.0, rest * share)
            over = free & (vals >= 1.0)
            if not over.any():
                break
            is_cap |= over
        pi[sel] = vals
        capped[sel] = is_cap
    return InclusionResult(pi, int(capped.sum()), float(cells.weight[capped].sum()), rounds)


def sampling_probabilities(
    table,
    roster,
    targets: np.ndarray,
    use_first_names: bool = True,
) -> pd.DataFrame:
    """Per-unit pi for a roster: unit_id, stratum, p_hat, pi."""
    frame = roster.frame
    p = table.unit_probabilities(frame, use_first_names=use_first_names)
    keep = p > 0
    cells = FrameCells.from_units(table.strata, frame["stratum"].tolist(), p, keep)
    res = inclusion_probabilities(cells, targets)
    if res.n_capped_cells:
        log.info("capped %d units at pi = 1", res.n_capped_cells)
    return pd.DataFrame({"unit_id": frame["unit_id"].to_numpy(), "stratum": frame["stratum"].to_numpy(), "p_hat": p, "pi": res.pi})


# --------------------------------------------------------------------------
# Diagnostics
# --------------------------------------------------------------------------


def poisson_moments(cells: FrameCells, pi: np.ndarray) -> dict[str, np.ndarray | float]:
    """Size and yield moments for independent Bernoulli(pi) inclusion.

    With true membership probability q per unit: E[n_g] = sum pi,
    Var(n_g) = sum pi(1 - pi), E[n_g1] = sum pi q, Var(n_g1) = sum pi q (1 - pi q).
    """
    q = cells.truth
    w = cells.weight
    g = cells.g
    L = cells.L
    En_g = np.bincount(g, w * pi, L)
    Vn_g = np.bincount(g, w * pi * (1 - pi), L)
    E1_g = np.bincount(g, w * pi * q, L)
    V1_g = np.bincount(g, w * pi * q * (1 - pi * q), L)
    return {
        "E_n_g": En_g, "Var_n_g": Vn_g, "E_n1_g": E1_g, "Var_n1_g": V1_g,
        "E_n": float(En_g.sum()), "Var_n": float(Vn_g.sum()),
        "E_n1": float(E1_g.sum()), "Var_n1": float(V1_g.sum()),
    }


def srs_yield(prior: GeoPrior, N: np.ndarray, n: int) -> tuple[float, float]:
    """Expected minority fraction of an SRS and its finite-population variance."""
    N = np.asarray(N, dtype=np.float64)
    Ntot = N.sum()
    P = float(np.dot(N, prior.p_r_given_g) / Ntot)
    var = (1.0 / n) * P * (1 - P) * (Ntot - n) / (Ntot - 1) if Ntot > 1 else 0.0
    return P, var


def _stratified_yield(n_g: np.ndarray, P_g: np.ndarray, N_g: np.ndarray) -> tuple[float, float]:
    n = n_g.sum()
    y = float(np.dot(n_g, P_g) / n)
    with np.errstate(divide="ignore", invalid="ignore"):
        v_g = np.where(
            (n_g > 0) & (N_g > 1),
            (1.0 / np.where(n_g > 0, n_g, 1)) * P_g * (1 - P_g) * (N_g - n_g) / np.where(N_g > 1, N_g - 1, 1),
            0.0,
        )
    return y, float(np.dot(n_g**2, v_g) / n**2)


def poisson_yield(moments: dict, n: float) -> tuple[float, float]:
    """E[n_1]/n with the conservative two-term Taylor variance."""
    y = moments["E_n1"] / n
    var = moments["Var_n1"] / n**2 + moments["E_n1"] ** 2 * moments["Var_n"] / n**4
    return y, var


def sensitivity_cells(cells: FrameCells, epsilon: float, delta: float) -> FrameCells:
    """Add one cell per stratum for the filtered-out units: estimated p = epsilon, true p = delta."""
    extra = np.maximum(cells.n_units - cells.n_kept, 0.0)
    has = extra > 0
    gi = np.flatnonzero(has)
    truth = cells.truth
    return FrameCells(
        cells.strata,
        np.concatenate([cells.g, gi]),
        np.concatenate([cells.weight, extra[has]]),
        np.concatenate([cells.p_hat, np.full(gi.size, epsilon)]),
        cells.n_units,
        cells.n_units,
        np.concatenate([truth, np.full(gi.size, delta)]),
        np.concatenate([cells.keep, np.ones(gi.size, dtype=bool)]),
    )


@dataclass
class SamplingPlan:
    method: str
    strata: tuple[str, ...]
    targets: np.ndarray
    targets_real: np.ndarray
    normalizers: np.ndarray | None = None
    capped_strata: list[str] = field(default_factory=list)
    capped_units: float = 0.0
    diagnostics: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return int(np.sum(self.targets))

    def to_dict(self) -> dict:
        d = {
            "method": self.method,
            "total": self.total,
            "targets": {g: int(t) for g, t in zip(self.strata, self.targets)},
            "targets_real": {g: float(t) for g, t in zip(self.strata, self.targets_real)},
            "capped_strata": list(self.capped_strata),
            "capped_units": float(self.capped_units),
            "options": self.options,
            "diagnostics": _jsonable(self.diagnostics),
        }
        if self.normalizers is not None:
            d["normalizers"] = {g: float(v) for g, v in zip(self.strata, self.normalizers)}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SamplingPlan":
        strata = tuple(d["targets"].keys())
        norm = d.get("normalizers")
        return cls(
            d["method"], strata,
            np.array([d["targets"][g] for g in strata], dtype=np.int64),
            np.array([d["targets_real"][g] for g in strata], dtype=float),
            None if norm is None else np.array([norm[g] for g in strata], dtype=float),
            list(d.get("capped_strata", [])), float(d.get("capped_units", 0.0)),
            d.get("diagnostics", {}), d.get("options", {}),
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def make_plan(
    method: str,
    cells: FrameCells,
    prior: GeoPrior,
    n: int,
    filtered: bool = True,
    replication_bug: bool = False,
) -> SamplingPlan:
    """Allocate `n` with the chosen method and attach its diagnostics."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    opts = {"filtered": filtered, "replication_bug": replication_bug, "n": n}
    if method == "poisson":
        alloc = poisson_allocation(cells, prior, n, filtered=filtered, replication_bug=replication_bug)
        inc = inclusion_probabilities(cells, alloc.targets)
        plan = SamplingPlan(method, cells.strata, alloc.targets, alloc.targets_real, cells.pi_g(True),
                            alloc.capped, inc.n_capped_units, options=opts)
        plan.diagnostics = plan_diagnostics(plan, cells, prior, pi=inc.pi)
        return plan
    if method == "srs":
        N = cells.n_units
        real = n * N / N.sum()
        plan = SamplingPlan(method, cells.strata, largest_remainder(real, n), real, options=opts)
    else:
        alloc = stratified_allocation(prior, cells, n, filtered=(method == "stratified_filtered"))
        plan = SamplingPlan(method, cells.strata, alloc.targets, alloc.targets_real, options=opts)
    plan.diagnostics = plan_diagnostics(plan, cells, prior)
    return plan


def plan_diagnostics(
    plan: SamplingPlan,
    cells: FrameCells,
    prior: GeoPrior,
    pi: np.ndarray | None = None,
    epsilon: float | None = None,
    delta: float | None = None,
) -> dict:
    """Expected sizes, their variances and the expected yield for `plan`.

    For Poisson plans `pi` are the per-cell inclusion probabilities
    (recomputed from the targets when omitted). With `epsilon` and `delta`
    the Poisson yield is also recomputed after giving filtered-out units an
    estimated probability epsilon whose true value is delta, holding the
    stratum targets fixed.
    """
    pr = _align_prior(cells.strata, prior)
    n = float(np.sum(plan.targets))
    out: dict = {"method": plan.method}
    if plan.method == "srs":
        y, v = srs_yield(pr, cells.n_units, int(n))
    elif plan.method == "stratified":
        y, v = _stratified_yield(plan.targets.astype(float), pr.p_r_given_g, cells.n_units)
    elif plan.method == "stratified_filtered":
        pi_star = cells.pi_g(True)
        with np.errstate(divide="ignore", invalid="ignore"):
            P_h = np.where(cells.n_kept > 0, pi_star / np.where(cells.n_kept > 0, cells.n_kept, 1.0), 0.0)
        y, v = _stratified_yield(plan.targets.astype(float), P_h, cells.n_kept)
    else:
        if pi is None:
            pi = inclusion_probabilities(cells, plan.targets).pi
        mom = poisson_moments(cells, pi)
        y, v = poisson_yield(mom, n)
        out["per_stratum"] = {
            g: {
                "E_n": mom["E_n_g"][k], "Var_n": mom["Var_n_g"][k],
                "E_n1": mom["E_n1_g"][k], "Var_n1": mom["Var_n1_g"][k],
            }
            for k, g in enumerate(cells.strata)
        }
        out.update({k: mom[k] for k in ("E_n", "Var_n", "E_n1", "Var_n1")})
        if epsilon is not None:
            d = epsilon if delta is None else delta
            sc = sensitivity_cells(cells, epsilon, d)
            inc = inclusion_probabilities(sc, plan.targets)
            sm = poisson_moments(sc, inc.pi)
            ys, vs = poisson_yield(sm, n)
            out["sensitivity"] = {"epsilon": epsilon, "delta": d, "yield": ys, "yield_var": vs,
                                  "E_n1": sm["E_n1"], "Var_n": sm["Var_n"], "Var_n1": sm["Var_n1"]}
    out["yield"] = y
    out["yield_var"] = v
    out["yield_sd"] = math.sqrt(max(v, 0.0))
    return out


def compare_methods(cells: FrameCells, prior: GeoPrior, n: int, **kw) -> dict[str, dict]:
    """Expected yield and variance under each design, one row per method."""
    return {m: make_plan(m, cells, prior, n, **kw).diagnostics for m in METHODS}


# --------------------------------------------------------------------------
# Drawing
# --------------------------------------------------------------------------


def unit_uniform(seed: int, unit_id: str) -> float:
    """Deterministic U[0,1) from (seed, unit_id): 53 bits of a keyed BLAKE2b digest."""
    key = int(seed).to_bytes(16, "little", signed=True)
    h = hashlib.blake2b(str(unit_id).encode("utf-8"), key=key, digest_size=8).digest()
    return (int.from_bytes(h, "little") >> 11) * (1.0 / (1 << 53))


@dataclass
class SampleDraw:
    unit_ids: list[str]
    pi: np.ndarray
    strata: list[str]
    seed: int

    @property
    def n(self) -> int:
        return len(self.unit_ids)

    def n_by_stratum(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for g in self.strata:
            out[g] = out.get(g, 0) + 1
        return dict(sorted(out.items()))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"unit_id": self.unit_ids, "stratum": self.strata, "pi": self.pi})


def draw_sample(pi_table: pd.DataFrame, seed: int) -> SampleDraw:
    """Include unit i iff u_i < pi_i, with u_i hashed from (seed, unit_id).

    The result does not depend on row order; selected units are returned in
    unit_id order.
    """
    if pi_table["pi"].isna().any():
        bad = pi_table.loc[pi_table["pi"].isna(), "unit_id"].iloc[0]
        raise DesignError(f"missing pi for unit {bad!r}")
    ids = pi_table["unit_id"].astype(str).tolist()
    pis = pi_table["pi"].to_numpy(dtype=np.float64)
    u = np.fromiter((unit_uniform(seed, i) for i in ids), dtype=np.float64, count=len(ids))
    sel = np.flatnonzero(u < pis)
    order = sorted(sel, key=lambda k: ids[k])
    strata = pi_table["stratum"].astype(str).to_numpy() if "stratum" in pi_table else np.array([""] * len(ids))
    return SampleDraw([ids[k] for k in order], pis[order], [strata[k] for k in order], int(seed))
