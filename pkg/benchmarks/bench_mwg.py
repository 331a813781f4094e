"""Compare the compiled and pure-Python MCMC kernels.

    python3 benchmarks/bench_mwg.py --surnames 100 500 --sweeps 50

Both backends consume the same pre-drawn randoms, so the script also checks
that their chains agree before reporting timings.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from bisgsamp import hiermodel as h
from bisgsamp import simlab
from bisgsamp.ingest import default_geo_prior


def _counts(n_surnames: int, m: int, seed: int):
    prior = default_geo_prior()
    rng = np.random.default_rng(seed)
    cfg = simlab.SimConfig(n_surnames=n_surnames, m=m)
    u = simlab.gen_surname_universe(cfg, rng, prior.n_strata)
    counts = simlab.gen_minority_data(m, u.theta, prior, rng, u.names)
    seen = np.flatnonzero(counts.col_totals > 0)
    return type(counts)(counts.strata, tuple(counts.surnames[k] for k in seen), counts.counts[:, seen])


def bench(n_surnames: int, m: int, sweeps: int, repeat: int, seed: int = 0) -> dict[str, float]:
    counts = _counts(n_surnames, m, seed)
    hp = h.Hyperparams.from_counts(counts)
    init = h.initial_state(hp, np.random.default_rng(seed))
    out, chains = {}, {}
    for name in h.available_backends():
        best = np.inf
        for _ in range(repeat):
            t0 = time.perf_counter()
            chains[name] = h.run_chain(init, counts, hp, sweeps, seed=seed, backend_name=name)
            best = min(best, time.perf_counter() - t0)
        out[name] = best / sweeps
    ref = next(iter(chains.values()))
    for name, ch in chains.items():
        if not (np.array_equal(ch.alpha, ref.alpha) and np.array_equal(ch.eta, ref.eta)):
            raise RuntimeError(f"backend {name} diverged from {ref.backend}")
    return out


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--surnames", type=int, nargs="+", default=[50, 200, 500])
    ap.add_argument("--m", type=int, default=50000)
    ap.add_argument("--sweeps", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = h.available_backends()
    print(f"{'|S|':>6} " + " ".join(f"{b + ' ms/sweep':>18}" for b in backends) + f" {'speedup':>9}")
    for S in args.surnames:
        r = bench(S, args.m, args.sweeps, args.repeat)
        speed = r.get("python", np.nan) / r.get("cython", np.nan)
        print(f"{S:>6} " + " ".join(f"{1e3 * r[b]:>18.3f}" for b in backends) + f" {speed:>8.1f}x")


if __name__ == "__main__":
    main()
