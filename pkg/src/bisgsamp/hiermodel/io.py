"""CSV/JSON export and import for chains and posterior summaries."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .model import Chain, PosteriorSummary


def write_chain_csv(chain: Chain, path: str | Path, surnames: Sequence[str] | None = None) -> None:
    """iteration, eta, then one alpha column per requested surname (all by default)."""
    names = list(chain.surnames) if surnames is None else list(surnames)
    idx = {s: i for i, s in enumerate(chain.surnames)}
    missing = [s for s in names if s not in idx]
    if missing:
        raise KeyError(f"surnames not in chain: {missing[:5]}")
    cols = {"iteration": chain.iterations, "eta": chain.eta}
    for s in names:
        cols[f"alpha_{s}"] = chain.alpha[:, idx[s]]
    pd.DataFrame(cols).to_csv(path, index=False, float_format="%.17g")


def write_summary(summary: PosteriorSummary, csv_path: str | Path, json_path: str | Path, extra: dict | None = None) -> None:
    G, S = summary.theta_hat.shape
    df = pd.DataFrame(
        {
            "stratum": np.repeat(summary.strata, S),
            "surname": np.tile(summary.surnames, G),
            "theta_hat": summary.theta_hat.ravel(),
        }
    )
    df.to_csv(csv_path, index=False, float_format="%.17g")
    side = {
        "strata": list(summary.strata),
        "surnames": list(summary.surnames),
        "rho_hat": {g: float(r) for g, r in zip(summary.strata, summary.rho_hat)},
        "alpha_hat": {s: float(a) for s, a in zip(summary.surnames, summary.alpha_hat)},
        "eta_hat": summary.eta_hat,
        "burn_in": summary.burn_in,
        "n_draws": summary.n_draws,
        "acceptance": summary.acceptance,
    }
    if extra:
        side.update(extra)
    Path(json_path).write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")


def read_summary(csv_path: str | Path, json_path: str | Path) -> PosteriorSummary:
    side = json.loads(Path(json_path).read_text())
    df = pd.read_csv(csv_path, dtype={"stratum": str, "surname": str}, keep_default_na=False, float_precision="round_trip")
    strata = tuple(side["strata"])
    surnames = tuple(side["surnames"])
    gi = {g: i for i, g in enumerate(strata)}
    si = {s: i for i, s in enumerate(surnames)}
    theta = np.zeros((len(strata), len(surnames)))
    theta[df["stratum"].map(gi).to_numpy(), df["surname"].map(si).to_numpy()] = df["theta_hat"].to_numpy(dtype=float)
    return PosteriorSummary(
        strata=strata,
        surnames=surnames,
        theta_hat=theta,
        rho_hat=np.array([side["rho_hat"][g] for g in strata]),
        alpha_hat=np.array([side["alpha_hat"][s] for s in surnames]),
        eta_hat=float(side["eta_hat"]),
        burn_in=int(side["burn_in"]),
        n_draws=int(side["n_draws"]),
        acceptance=dict(side.get("acceptance", {})),
    )
