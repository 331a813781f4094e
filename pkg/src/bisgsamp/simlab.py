"""Synthetic surname data, labeled frames and sampling-method comparisons.

The generating process: gamma_s ~ Exp(1); theta_g ~ Dirichlet(gamma) per
stratum; minority units are spread over strata by Pr(G | R=1) and over
surnames by theta_g. Majority units use Pr(G | R=0) and the tilted
distribution nu_g = softmax(-beta * theta_g + eps_g), eps ~ N(0, 1), so
large beta makes surnames informative about membership.

Everything is kept at the (stratum, surname) cell level: a cell holds N1
minority and N0 majority units, so a 1.2M-unit frame costs a few 51 x 500
arrays. `SimFrame.to_roster` expands to units when a file is wanted.
"""

from __future__ import annotations

import json
import logging
import string
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from scipy import sparse

from . import design
from .bisg import build_table
from .estimate import hajek_mean
from .hiermodel import Hyperparams, initial_state, posterior_summary, run_chain
from .ingest import FrameAggregate, GeoPrior, SurnameCountMatrix, default_geo_prior, load_geo_prior

log = logging.getLogger(__name__)

PROFILES = {
    # reference scale: ~1.2M frame units, 500 surnames, n = 1000
    "full": dict(n_surnames=500, n1=23530, n_target=1000, replicates=20),
    # same shape at a tenth of the frame size
    "ci": dict(n_surnames=500, n1=2353, n_target=1000, replicates=20),
}


@dataclass(frozen=True)
class SimConfig:
    n_surnames: int = 500
    name_length: int = 6
    m: int = 50000
    n1: int = 23530
    minority_fraction: float = 0.02
    betas: tuple[float, ...] = (10.0, 100.0, 1000.0, 10000.0)
    n_target: int = 1000
    replicates: int = 20
    seed: int = 0
    prior_path: str | None = None
    # "true" uses realized cell probabilities; "estimated" fits the model to
    # m synthetic training records and runs the full BISG assembly
    probability_modes: tuple[str, ...] = ("true",)
    fit_iters: int = 300
    fit_burn_in: int = 100
    backend: str | None = None

    def __post_init__(self):
        for k in ("n_surnames", "name_length", "m", "n1", "n_target", "replicates"):
            if getattr(self, k) <= 0:
                raise ValueError(f"{k} must be positive")
        if self.n_surnames < 2:
            raise ValueError("need at least two surnames")
        if not 0 < self.minority_fraction < 1:
            raise ValueError("minority_fraction must lie in (0, 1)")
        if any(b < 0 for b in self.betas):
            raise ValueError("beta must be nonnegative")
        bad = set(self.probability_modes) - {"true", "estimated"}
        if bad:
            raise ValueError(f"unknown probability modes {sorted(bad)}")
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(self, "probability_modes", tuple(self.probability_modes))

    @property
    def n0(self) -> int:
        """N0 = N1 / fraction (the fraction is taken relative to N0)."""
        return int(round(self.n1 / self.minority_fraction))

    @classmethod
    def profile(cls, name: str, **kw) -> "SimConfig":
        if name not in PROFILES:
            raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
        return cls(**{**PROFILES[name], **kw})

    def prior(self) -> GeoPrior:
        return default_geo_prior() if self.prior_path is None else load_geo_prior(self.prior_path)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        d["probability_modes"] = list(self.probability_modes)
        d["n0"] = self.n0
        return d


# --------------------------------------------------------------------------
# Generators
# --------------------------------------------------------------------------


@dataclass
class Universe:
    names: tuple[str, ...]
    gamma: np.ndarray
    theta: np.ndarray  # G x S, rows on the simplex


def random_names(n: int, length: int, rng: np.random.Generator, max_rounds: int = 100) -> tuple[str, ...]:
    letters = np.array(list(string.ascii_uppercase))
    if 26**length < n:
        raise ValueError(f"cannot make {n} distinct names of length {length}")
    out: list[str] = []
    seen: set[str] = set()
    for _ in range(max_rounds):
        need = n - len(out)
        if need == 0:
            break
        draws = rng.integers(0, 26, size=(need, length))
        for row in draws:
            s = "".join(letters[row])
            if s not in seen:
                seen.add(s)
                out.append(s)
    if len(out) < n:
        raise RuntimeError("name collisions persisted after bounded retries")
    return tuple(out)


def gen_surname_universe(config: SimConfig, rng: np.random.Generator, n_strata: int) -> Universe:
    names = random_names(config.n_surnames, config.name_length, rng)
    gamma = rng.exponential(1.0, size=config.n_surnames)
    theta = rng.dirichlet(gamma, size=n_strata)
    return Universe(names, gamma, theta)


def _multinomial_rows(totals: np.ndarray, probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    out = np.zeros(probs.shape, dtype=np.int64)
    for g, n in enumerate(totals):
        if n > 0:
            p = probs[g] / probs[g].sum()
            out[g] = rng.multinomial(int(n), p)
    return out


def gen_minority_data(
    m: int, theta: np.ndarray, prior: GeoPrior, rng: np.random.Generator, surnames: Sequence[str] | None = None
) -> SurnameCountMatrix:
    """m records: strata ~ Multinomial(m, Pr(G|R=1)), surnames ~ Multinomial(m_g, theta_g)."""
    m_g = rng.multinomial(int(m), prior.p_g_given_r)
    counts = _multinomial_rows(m_g, theta, rng)
    names = tuple(surnames) if surnames is not None else tuple(f"S{k}" for k in range(theta.shape[1]))
    return SurnameCountMatrix.from_dense(prior.strata, names, counts)


def nu_transform(theta: np.ndarray, beta: float, eps: np.ndarray | None = None) -> np.ndarray:
    """Row-wise softmax(-beta * theta + eps)."""
    z = -beta * np.asarray(theta, dtype=np.float64)
    if eps is not None:
        z = z + eps
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class SimFrame:
    """Labeled frame at cell level: n1[g, s] minority and n0[g, s] majority units."""

    strata: tuple[str, ...]
    surnames: tuple[str, ...]
    n1: np.ndarray
    n0: np.ndarray
    beta: float
    nu: np.ndarray | None = None

    @property
    def n(self) -> np.ndarray:
        return self.n1 + self.n0

    @property
    def p_true(self) -> np.ndarray:
        """Realized Pr(R=1 | s, g); 0 on empty cells."""
        n = self.n
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(n > 0, self.n1 / np.where(n > 0, n, 1), 0.0)

    def minority_fraction(self) -> float:
        return float(self.n1.sum() / self.n.sum())

    def realized_prior(self, p_g_given_r: np.ndarray) -> GeoPrior:
        """Stratum membership rates of this frame, clipped into (0, 1) for empty strata."""
        Ng = self.n.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(Ng > 0, self.n1.sum(axis=1) / np.where(Ng > 0, Ng, 1), 0.0)
        return GeoPrior(self.strata, np.clip(p, 1e-12, 1 - 1e-12), np.asarray(p_g_given_r))

    def frame_aggregate(self, keep: np.ndarray | None = None) -> FrameAggregate:
        return FrameAggregate(self.strata, self.surnames, sparse.csr_matrix(self.n), keep=keep)

    def cells(self, p_hat: np.ndarray | None = None, keep: np.ndarray | None = None) -> design.FrameCells:
        """Nonempty cells as design cells; p_hat defaults to the truth."""
        n = self.n
        g, s = np.nonzero(n)
        pt = self.p_true[g, s]
        ph = pt if p_hat is None else np.asarray(p_hat)[g, s]
        kp = None if keep is None else np.asarray(keep)[s]
        n_units = n.sum(axis=1).astype(float)
        n_kept = n_units if keep is None else (n * np.asarray(keep)[None, :]).sum(axis=1).astype(float)
        cells = design.FrameCells(self.strata, g, n[g, s].astype(float), ph, n_units, n_kept, pt, kp)
        cells.cell_index = (g, s)
        return cells

    def to_roster(self, prefix: str = "u") -> pd.DataFrame:
        """Unit-level roster (unit_id, first_name, surname, stratum, r) in cell order."""
        g, s = np.nonzero(self.n)
        k1 = self.n1[g, s]
        k0 = self.n0[g, s]
        gg = np.concatenate([np.repeat(g, k1), np.repeat(g, k0)])
        ss = np.concatenate([np.repeat(s, k1), np.repeat(s, k0)])
        r = np.concatenate([np.ones(k1.sum(), dtype=np.int64), np.zeros(k0.sum(), dtype=np.int64)])
        order = np.lexsort((-r, ss, gg))
        gg, ss, r = gg[order], ss[order], r[order]
        width = len(str(len(r)))
        return pd.DataFrame(
            {
                "unit_id": [f"{prefix}{k:0{width}d}" for k in range(len(r))],
                "first_name": "",
                "surname": np.asarray(self.surnames, dtype=object)[ss],
                "stratum": np.asarray(self.strata, dtype=object)[gg],
                "r": r,
            }
        )


def gen_frame(
    config: SimConfig,
    universe: Universe,
    prior: GeoPrior,
    beta: float,
    rng: np.random.Generator,
    eps: np.ndarray | None = None,
) -> SimFrame:
    """N1 minority units from (theta, Pr(G|R=1)); N0 majority units from (nu, Pr(G|R=0))."""
    theta = universe.theta
    if eps is None:
        eps = rng.standard_normal(theta.shape)
    nu = nu_transform(theta, beta, eps)
    m1 = rng.multinomial(config.n1, prior.p_g_given_r)
    m0 = rng.multinomial(config.n0, prior.p_g_given_not_r())
    n1 = _multinomial_rows(m1, theta, rng)
    n0 = _multinomial_rows(m0, nu, rng)
    return SimFrame(prior.strata, universe.names, n1, n0, float(beta), nu)


# --------------------------------------------------------------------------
# Estimated probabilities
# --------------------------------------------------------------------------


def fit_posterior(counts: SurnameCountMatrix, iters: int, burn_in: int, seed, backend: str | None = None, thin: int = 1):
    """Fit on the surnames seen in `counts`; returns the summary and the kept column index."""
    seen = np.flatnonzero(counts.col_totals > 0)
    sub = SurnameCountMatrix(counts.strata, tuple(counts.surnames[k] for k in seen), counts.counts[:, seen])
    hyper = Hyperparams.from_counts(sub)
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    init_ss, chain_ss = ss.spawn(2)
    init = initial_state(hyper, np.random.default_rng(init_ss))
    chain = run_chain(init, sub, hyper, iters, seed=chain_ss, thin=thin, backend_name=backend)
    return posterior_summary(chain, sub, burn_in=burn_in), seen, chain


def estimated_probabilities(frame: SimFrame, training: SurnameCountMatrix, prior: GeoPrior, config: SimConfig, seed):
    """Surname-layer p_hat on the frame grid from a model fit to `training`."""
    summary, seen, _ = fit_posterior(training, config.fit_iters, config.fit_burn_in, seed, config.backend)
    keep = np.zeros(len(frame.surnames), dtype=bool)
    keep[seen] = True
    agg = frame.frame_aggregate(keep)
    table = build_table(summary, prior, agg)
    p_hat = np.zeros(frame.n.shape)
    p_hat[table.g, table.s] = np.minimum(table.p_surname, 1.0)
    return p_hat, keep


# --------------------------------------------------------------------------
# Sampling comparison
# --------------------------------------------------------------------------


def _poisson_draw_yield(frame: SimFrame, cells: design.FrameCells, pi: np.ndarray, rng) -> tuple[float, int]:
    g, s = cells.cell_index
    k1 = rng.binomial(frame.n1[g, s], pi)
    k0 = rng.binomial(frame.n0[g, s], pi)
    n = int(k1.sum() + k0.sum())
    return (float(k1.sum() / n) if n else float("nan")), n


def _random_draw_yield(frame: SimFrame, targets: np.ndarray, rng) -> tuple[float, int]:
    N1g = frame.n1.sum(axis=1)
    N0g = frame.n0.sum(axis=1)
    t = np.minimum(targets, N1g + N0g)
    k1 = np.array([rng.hypergeometric(a, b, int(k)) if k > 0 else 0 for a, b, k in zip(N1g, N0g, t)])
    n = int(t.sum())
    return float(k1.sum() / n), n


def run_comparison(
    frame: SimFrame,
    n_target: int,
    prior: GeoPrior,
    rng: np.random.Generator,
    replicates: int = 1,
    p_hat: dict[str, tuple[np.ndarray, np.ndarray | None]] | None = None,
) -> dict[str, dict]:
    """Realized yields on one frame.

    Targets come from the Poisson allocation with true cell probabilities and
    Pr(G|R=1) from `prior`; the random baseline takes an SRS of n_g in each
    stratum. `p_hat` maps extra method names to (probabilities, keep) used
    for the inclusion probabilities in place of the truth.
    """
    true_cells = frame.cells()
    alloc = design.poisson_allocation(true_cells, prior, n_target, filtered=False, skip_empty=True)
    targets = alloc.targets
    designs = {"poisson_true": (true_cells, design.inclusion_probabilities(true_cells, targets, filtered=False).pi)}
    for name, (ph, keep) in (p_hat or {}).items():
        c = frame.cells(ph, keep)
        # the estimated surface may give a stratum less room than the truth did
        t = _feasible_targets(c, targets, n_target)
        designs[name] = (c, design.inclusion_probabilities(c, t, filtered=True).pi)
    out = {"random": {"yield": [], "n": []}}
    out.update({k: {"yield": [], "n": [], "expected_yield": None} for k in designs})
    for _ in range(replicates):
        y, n = _random_draw_yield(frame, targets, rng)
        out["random"]["yield"].append(y)
        out["random"]["n"].append(n)
        for name, (c, pi) in designs.items():
            y, n = _poisson_draw_yield(frame, c, pi, rng)
            out[name]["yield"].append(y)
            out[name]["n"].append(n)
    for name, (c, pi) in designs.items():
        mom = design.poisson_moments(c, pi)
        out[name]["expected_yield"] = mom["E_n1"] / mom["E_n"]
    out["random"]["expected_yield"] = float(
        np.dot(targets, frame.n1.sum(axis=1) / np.maximum(frame.n.sum(axis=1), 1)) / targets.sum()
    )
    out["targets"] = {g: int(t) for g, t in zip(frame.strata, targets)}
    return out


def _feasible_targets(cells: design.FrameCells, targets: np.ndarray, n: int) -> np.ndarray:
    caps = np.floor(cells.pi_g(True) / np.where(cells.max_p(True) > 0, cells.max_p(True), 1.0) + 1e-9)
    caps = np.where(cells.max_p(True) > 0, np.minimum(caps, cells.n_kept), 0.0)
    if np.all(targets <= caps):
        return targets
    w = np.where(caps > 0, targets.astype(float), 0.0)
    if w.sum() <= 0:
        w = caps.copy()
    return design._proportional(w, min(n, int(caps.sum())), cells.strata, caps).targets


# --------------------------------------------------------------------------
# Distances
# --------------------------------------------------------------------------


def tv_distance(p, q) -> float:
    """Half the L1 distance between two distributions on the same support."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"support mismatch: {p.shape} vs {q.shape}")
    return 0.5 * float(np.abs(p - q).sum())


def mean_tv(est: np.ndarray, truth: np.ndarray, rows: np.ndarray | None = None) -> float:
    """Average per-row TV, optionally over a subset of rows."""
    est = np.asarray(est, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if est.shape != truth.shape:
        raise ValueError(f"support mismatch: {est.shape} vs {truth.shape}")
    d = 0.5 * np.abs(est - truth).sum(axis=1)
    return float(d.mean() if rows is None else d[rows].mean())


# --------------------------------------------------------------------------
# Replicated studies
# --------------------------------------------------------------------------


def replicate_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n)


def _entropy(ss: np.random.SeedSequence) -> list[int]:
    return [int(ss.entropy), *map(int, ss.spawn_key)]


def _one_replicate(args) -> dict:
    config, ss = args
    prior = config.prior()
    u_ss, train_ss, fit_ss, *beta_ss = ss.spawn(3 + len(config.betas))
    universe = gen_surname_universe(config, np.random.default_rng(u_ss), prior.n_strata)
    training = None
    if "estimated" in config.probability_modes:
        training = gen_minority_data(config.m, universe.theta, prior, np.random.default_rng(train_ss), universe.names)
    res = {}
    for beta, bss in zip(config.betas, beta_ss):
        frame_ss, draw_ss = bss.spawn(2)
        frame = gen_frame(config, universe, prior, beta, np.random.default_rng(frame_ss))
        extra = {}
        if training is not None:
            fp = frame.realized_prior(prior.p_g_given_r)
            extra["poisson_estimated"] = estimated_probabilities(frame, training, fp, config, fit_ss)
        cmp = run_comparison(frame, config.n_target, prior, np.random.default_rng(draw_ss), 1, extra)
        res[repr(beta)] = {
            "minority_fraction": frame.minority_fraction(),
            **{k: {"yield": v["yield"][0], "n": v["n"][0], "expected_yield": v["expected_yield"]}
               for k, v in cmp.items() if k != "targets"},
        }
    return res


def _map(fn, items, n_jobs: int):
    if n_jobs <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n_jobs) as ex:
        return list(ex.map(fn, items))


def _stats(x) -> dict:
    x = np.asarray(x, dtype=np.float64)
    sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
    return {"mean": float(x.mean()), "sd": sd, "se": sd / np.sqrt(x.size), "min": float(x.min()), "max": float(x.max())}


def simulate(config: SimConfig, n_jobs: int = 1) -> dict:
    """Sampling comparison over fresh frames per replicate and beta.

    Each replicate draws its own universe; per beta it draws a frame and one
    sample per method. Per-replicate seeds are spawned from `config.seed`,
    so the report does not depend on `n_jobs`.
    """
    seeds = replicate_seeds(config.seed, config.replicates)
    rows = _map(_one_replicate, [(config, s) for s in seeds], n_jobs)
    methods = sorted({m for r in rows for b in r.values() for m in b if m != "minority_fraction"})
    summary = {}
    for beta in config.betas:
        key = repr(beta)
        summary[key] = {
            m: {
                "yield": _stats([r[key][m]["yield"] for r in rows]),
                "expected_yield": _stats([r[key][m]["expected_yield"] for r in rows]),
            }
            for m in methods
        }
        summary[key]["minority_fraction"] = _stats([r[key]["minority_fraction"] for r in rows])
    return {
        "config": config.to_dict(),
        "seeds": {"root": config.seed, "replicates": [_entropy(s) for s in seeds]},
        "summary": summary,
        "replicates": rows,
    }


def write_report(report: dict, path: str | Path, extra: dict | None = None) -> None:
    out = dict(report)
    if extra:
        out.update(extra)
    Path(path).write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")


def shrinkage_study(
    n_surnames: int = 100,
    m: int = 50000,
    iters: int = 2000,
    burn_in: int = 500,
    replicates: int = 5,
    seed: int = 0,
    prior: GeoPrior | None = None,
    backend: str | None = None,
    n_jobs: int = 1,
) -> dict:
    """meanTV of posterior theta-hat vs raw proportions on repeated data from one fixed truth.

    Strata with no records are left out of both averages since the raw
    proportions are undefined there.
    """
    prior = prior or default_geo_prior()
    root = np.random.SeedSequence(seed)
    u_ss, rep_root = root.spawn(2)
    cfg = SimConfig(n_surnames=n_surnames, m=m)
    universe = gen_surname_universe(cfg, np.random.default_rng(u_ss), prior.n_strata)
    tasks = [(universe, prior, m, iters, burn_in, backend, s) for s in rep_root.spawn(replicates)]
    rows = _map(_shrinkage_replicate, tasks, n_jobs)
    return {
        "n_surnames": n_surnames, "m": m, "iters": iters, "burn_in": burn_in, "seed": seed,
        "replicates": rows,
        "n_better": int(sum(r["tv_posterior"] < r["tv_raw"] for r in rows)),
    }


def _shrinkage_replicate(args) -> dict:
    universe, prior, m, iters, burn_in, backend, ss = args
    data_ss, fit_ss = ss.spawn(2)
    counts = gen_minority_data(m, universe.theta, prior, np.random.default_rng(data_ss), universe.names)
    summary, seen, chain = fit_posterior(counts, iters, burn_in, fit_ss, backend)
    S = len(universe.names)
    post = np.zeros((prior.n_strata, S))
    post[:, seen] = summary.theta_hat
    dense = counts.toarray().astype(float)
    mg = dense.sum(axis=1)
    rows = np.flatnonzero(mg > 0)
    raw = np.zeros_like(dense)
    raw[rows] = dense[rows] / mg[rows, None]
    return {
        "tv_posterior": mean_tv(post, universe.theta, rows),
        "tv_raw": mean_tv(raw, universe.theta, rows),
        "strata_used": int(rows.size),
        "pair_acceptance": float(chain.pair_accept[burn_in:].mean()),
        "eta_hat": summary.eta_hat,
    }


def hajek_study(
    config: SimConfig,
    beta: float = 1000.0,
    replicates: int = 500,
    n_jobs: int = 1,
) -> dict:
    """Full-response Hajek error for a synthetic minority outcome, fresh frame and draw each replicate.

    y is constant within a (stratum, surname) cell: a stratum effect plus a
    surname effect, so it correlates with the inclusion probabilities and an
    unweighted mean is biased.
    """
    seeds = replicate_seeds(config.seed, replicates)
    rows = _map(_hajek_replicate, [(config, beta, s) for s in seeds], n_jobs)
    err = np.array([r["error"] for r in rows])
    naive = np.array([r["naive_error"] for r in rows])
    return {
        "beta": beta, "replicates": replicates, "seed": config.seed,
        "bias": float(err.mean()), "mc_se": float(err.std(ddof=1) / np.sqrt(err.size)),
        "naive_bias": float(naive.mean()), "naive_mc_se": float(naive.std(ddof=1) / np.sqrt(naive.size)),
        "min_coverage": float(min(r["coverage"] for r in rows)),
        "rows": rows,
    }


def _hajek_replicate(args) -> dict:
    config, beta, ss = args
    prior = config.prior()
    u_ss, f_ss, y_ss, d_ss = ss.spawn(4)
    universe = gen_surname_universe(config, np.random.default_rng(u_ss), prior.n_strata)
    frame = gen_frame(config, universe, prior, beta, np.random.default_rng(f_ss))
    yr = np.random.default_rng(y_ss)
    y = yr.standard_normal(len(frame.strata))[:, None] + 2.0 * universe.theta * len(frame.surnames)
    truth = float((frame.n1 * y).sum() / frame.n1.sum())
    cells = frame.cells()
    alloc = design.poisson_allocation(cells, prior, config.n_target, filtered=False, skip_empty=True)
    # real-valued targets: integer rounding can leave a small stratum at n_g = 0,
    # and units with pi = 0 are outside what any weighting can recover
    pi = design.inclusion_probabilities(cells, alloc.targets_real, filtered=False).pi
    g, s = cells.cell_index
    covered = float(frame.n1[g, s][pi > 0].sum() / frame.n1.sum())
    k1 = np.random.default_rng(d_ss).binomial(frame.n1[g, s], pi)
    sel = k1 > 0
    yy = np.repeat(y[g[sel], s[sel]], k1[sel])
    pp = np.repeat(pi[sel], k1[sel])
    est = hajek_mean(yy, 1.0 / pp)
    return {"truth": truth, "estimate": est, "error": est - truth, "naive_error": float(yy.mean()) - truth,
            "n1": int(k1.sum()), "coverage": covered}


def with_overrides(config: SimConfig, **kw) -> SimConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})


def export_dataset(config: SimConfig, out_dir: str | Path, beta: float | None = None) -> dict[str, str]:
    """Write one simulated replicate as pipeline inputs.

    Files: geo_prior.csv (realized stratum rates), minority_names.csv (the m
    training records), frame_counts.csv, roster.csv (with the true label r)
    and truth.csv (realized cell probabilities).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prior = config.prior()
    beta = config.betas[0] if beta is None else float(beta)
    u_ss, t_ss, f_ss = np.random.SeedSequence(config.seed).spawn(3)
    universe = gen_surname_universe(config, np.random.default_rng(u_ss), prior.n_strata)
    training = gen_minority_data(config.m, universe.theta, prior, np.random.default_rng(t_ss), universe.names)
    frame = gen_frame(config, universe, prior, beta, np.random.default_rng(f_ss))
    fp = frame.realized_prior(prior.p_g_given_r)
    paths = {k: str(out / f"{k}.csv") for k in ("geo_prior", "minority_names", "frame_counts", "roster", "truth")}
    pd.DataFrame({"stratum": fp.strata, "p_r_given_g": fp.p_r_given_g, "p_g_given_r": fp.p_g_given_r}).to_csv(
        paths["geo_prior"], index=False, float_format="%.17g"
    )
    coo = training.counts.tocoo()
    order = np.lexsort((coo.col, coo.row))
    g, s, c = coo.row[order], coo.col[order], coo.data[order]
    names = np.asarray(training.surnames, dtype=object)
    strata = np.asarray(training.strata, dtype=object)
    pd.DataFrame({"surname": np.repeat(names[s], c), "stratum": np.repeat(strata[g], c)}).to_csv(
        paths["minority_names"], index=False
    )
    gg, ss = np.nonzero(frame.n)
    pd.DataFrame(
        {"surname": np.asarray(frame.surnames, dtype=object)[ss], "stratum": np.asarray(frame.strata, dtype=object)[gg],
         "count": frame.n[gg, ss]}
    ).to_csv(paths["frame_counts"], index=False)
    frame.to_roster().to_csv(paths["roster"], index=False)
    pd.DataFrame(
        {"stratum": np.asarray(frame.strata, dtype=object)[gg], "surname": np.asarray(frame.surnames, dtype=object)[ss],
         "n1": frame.n1[gg, ss], "n0": frame.n0[gg, ss], "p_true": frame.p_true[gg, ss]}
    ).to_csv(paths["truth"], index=False, float_format="%.17g")
    return paths
