"""Command-line pipeline: fit, probs, plan, sample, estimate, simulate, diagnose.

Each subcommand reads a JSON config (``--config``), applies command-line
overrides, validates its inputs and writes its artifacts into ``out_dir``.
Every JSON artifact carries a ``provenance`` block with the sha256 of the
effective config and the seeds used, and no timestamps, so reruns with the
same config are byte-identical.

Config layout (all keys optional; defaults shown by ``bisgsamp config``)::

    {
      "seed": 0,
      "out_dir": "out",
      "paths": {"geo_prior": ..., "minority_names": ..., "frame_counts": ...,
                "roster": ..., "responses": ..., "targets": ...},
      "fit": {"iters": 45000, "burn_in": 15000, ...},
      "probs": {"min_count": 10, "cap": 10.0, "use_first_names": true},
      "plan": {"method": "poisson", "target": 1000, "filtered": true, ...},
      "sample": {"seed": null},
      "estimate": {"y": null, "trim": null, "adjust": "none", ...},
      "simulate": {"profile": "ci", "n_jobs": 1, ...}
    }

Relative paths in the config resolve against the config file's directory.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__, design, estimate, simlab
from .bisg import BisgTable, RatioTable, assemble, clamp_theta, first_name_ratio, theta_bounds
from .hiermodel import Hyperparams, initial_state, posterior_summary, read_summary, run_chain, write_chain_csv, write_summary
from .ingest import InputError, load_frame_counts, load_geo_prior, load_minority_names, load_roster

log = logging.getLogger("bisgsamp")

SUBCOMMANDS = ("fit", "probs", "plan", "sample", "estimate", "simulate", "diagnose")

DEFAULTS: dict = {
    "seed": 0,
    "out_dir": "out",
    "paths": {
        "geo_prior": None,
        "minority_names": None,
        "frame_counts": None,
        "roster": None,
        "responses": None,
        "targets": None,
    },
    "fit": {
        "iters": 45000,
        "burn_in": 15000,
        "thin": 1,
        "preset": "appendix",
        "init": "jitter",
        "backend": None,
        "seed": None,
        "proposal_sigma_eta": 1.0,
        "pair_sigma_scale": 0.5,
        "chain_surnames": None,
        "unknown_strata": "drop",
    },
    "probs": {"min_count": 10, "cap": 10.0, "use_first_names": True},
    "plan": {
        "method": "poisson",
        "target": 1000,
        "filtered": True,
        "replication_bug_allocation": False,
        "epsilon": None,
        "delta": None,
    },
    "sample": {"seed": None},
    "estimate": {
        "y": None,
        "trim": None,
        "adjust": "none",
        "margins": None,
        "strict": False,
        "tol": 1e-10,
        "max_iter": 1000,
    },
    "simulate": {"profile": "ci", "n_jobs": 1, "export_beta": None},
}

# stage -> (section, key) pairs whose path must exist before the stage runs
_INPUTS = {
    "fit": [("paths", "geo_prior"), ("paths", "minority_names")],
    "probs": [("paths", "geo_prior"), ("paths", "minority_names")],
    "plan": [("paths", "geo_prior")],
    "sample": [],
    "estimate": [("paths", "geo_prior"), ("paths", "responses")],
    "simulate": [],
    "diagnose": [("paths", "geo_prior")],
}


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# Config
# --------------------------------------------------------------------------


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path: str | None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is None:
        return cfg
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(str(p))
    try:
        user = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from None
    if not isinstance(user, dict):
        raise ConfigError(f"{p}: top level must be an object")
    cfg = _merge(cfg, user)
    base = p.resolve().parent
    for k, v in cfg["paths"].items():
        if v is not None and not Path(v).is_absolute():
            cfg["paths"][k] = str(base / v)
    if not Path(cfg["out_dir"]).is_absolute():
        cfg["out_dir"] = str(base / cfg["out_dir"])
    return cfg


def _apply_overrides(cfg: dict, args: argparse.Namespace) -> dict:
    cfg = copy.deepcopy(cfg)
    o = vars(args)

    def put(section, key, val):
        if val is not None:
            if section is None:
                cfg[key] = val
            else:
                cfg[section][key] = val

    put(None, "out_dir", o.get("out_dir"))
    put(None, "seed", o.get("seed"))
    for k in DEFAULTS["paths"]:
        put("paths", k, o.get(k))
    put("fit", "iters", o.get("iters"))
    put("fit", "burn_in", o.get("burnin"))
    put("fit", "thin", o.get("thin"))
    put("fit", "backend", o.get("backend"))
    put("probs", "cap", o.get("cap"))
    put("probs", "min_count", o.get("min_count"))
    put("plan", "target", o.get("target"))
    put("plan", "method", o.get("method"))
    put("plan", "filtered", o.get("filtered"))
    put("plan", "epsilon", o.get("epsilon"))
    put("plan", "delta", o.get("delta"))
    if o.get("replication_bug_allocation"):
        cfg["plan"]["replication_bug_allocation"] = True
    put("simulate", "n_jobs", o.get("n_jobs"))
    put("simulate", "profile", o.get("profile"))
    put("simulate", "replicates", o.get("replicates"))
    return cfg


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical config JSON.

    out_dir and simulate.n_jobs are excluded since they do not affect results.
    """
    cfg = {k: v for k, v in cfg.items() if k != "out_dir"}
    if "simulate" in cfg:
        cfg["simulate"] = {k: v for k, v in cfg["simulate"].items() if k != "n_jobs"}
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _stage_seed(cfg: dict, stage: str) -> int:
    s = cfg.get(stage, {}).get("seed")
    return int(cfg["seed"] if s is None else s)


def _provenance(cfg: dict, stage: str, seeds: dict) -> dict:
    return {"stage": stage, "config_sha256": config_hash(cfg), "seeds": seeds, "version": __version__}


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(design._jsonable(obj), indent=2, sort_keys=True, allow_nan=True) + "\n")


def _require(cfg: dict, stage: str) -> None:
    for section, key in _INPUTS[stage]:
        v = cfg[section][key]
        if v is None:
            raise ConfigError(f"{stage}: config is missing {section}.{key}")
        if not Path(v).exists():
            raise FileNotFoundError(str(v))


def _out(cfg: dict) -> Path:
    p = Path(cfg["out_dir"])
    p.mkdir(parents=True, exist_ok=True)
    return p


def _artifact(cfg: dict, name: str) -> Path:
    p = Path(cfg["out_dir"]) / name
    if not p.exists():
        raise FileNotFoundError(str(p))
    return p


# --------------------------------------------------------------------------
# Shared loaders
# --------------------------------------------------------------------------


def _load_frame(cfg: dict, strata):
    roster = None
    if cfg["paths"]["roster"]:
        roster = load_roster(cfg["paths"]["roster"])
        frame = roster.to_frame_aggregate(strata)
    elif cfg["paths"]["frame_counts"]:
        frame = load_frame_counts(cfg["paths"]["frame_counts"], strata)
    else:
        raise ConfigError("need paths.roster or paths.frame_counts")
    return frame, roster


def _unit_cells(table: BisgTable, roster, use_first_names: bool) -> design.FrameCells:
    fr = roster.frame
    p = table.unit_probabilities(fr, use_first_names=use_first_names)
    sidx = {s: i for i, s in enumerate(table.surnames)}
    kept = np.array([table.keep[sidx[s]] if s in sidx else False for s in fr["surname"]], dtype=bool)
    cells = design.FrameCells.from_units(table.strata, fr["stratum"].tolist(), p, kept)
    return cells


# --------------------------------------------------------------------------
# Stages
# --------------------------------------------------------------------------


def cmd_fit(cfg: dict) -> dict:
    prior = load_geo_prior(cfg["paths"]["geo_prior"])
    counts, _ = load_minority_names(cfg["paths"]["minority_names"], prior.strata, unknown=cfg["fit"]["unknown_strata"])
    f = cfg["fit"]
    hyper = Hyperparams.from_counts(
        counts, f["preset"], proposal_sigma_eta=f["proposal_sigma_eta"], pair_sigma_scale=f["pair_sigma_scale"]
    )
    seed = _stage_seed(cfg, "fit")
    init_ss, chain_ss = np.random.SeedSequence(seed).spawn(2)
    init = initial_state(hyper, np.random.default_rng(init_ss), f["init"])
    chain = run_chain(init, counts, hyper, int(f["iters"]), seed=chain_ss, thin=int(f["thin"]), backend_name=f["backend"])
    summary = posterior_summary(chain, counts, burn_in=int(f["burn_in"]))
    out = _out(cfg)
    prov = _provenance(cfg, "fit", {"fit": seed})
    write_summary(summary, out / "posterior.csv", out / "posterior.json", {"provenance": prov, "backend": chain.backend})
    if f["chain_surnames"] is not None:
        write_chain_csv(chain, out / "chain.csv", f["chain_surnames"] or None)
    log.info("fit: %d surnames, %d strata, pair acceptance %.3f", counts.shape[1], counts.shape[0], summary.acceptance.get("pair", float("nan")))
    return {"posterior": str(out / "posterior.csv")}


def cmd_probs(cfg: dict) -> dict:
    prior = load_geo_prior(cfg["paths"]["geo_prior"])
    counts, minority_fn = load_minority_names(cfg["paths"]["minority_names"], prior.strata, unknown=cfg["fit"]["unknown_strata"])
    summary = read_summary(_artifact(cfg, "posterior.csv"), _artifact(cfg, "posterior.json"))
    frame, roster = _load_frame(cfg, prior.strata)
    frame = frame.with_filter(counts)
    p = cfg["probs"]
    ratios = RatioTable({}, int(p["min_count"]), float(p["cap"]))
    if p["use_first_names"] and roster is not None and minority_fn:
        frame_fn = roster.first_name_counts()
        if frame_fn:
            ratios = first_name_ratio(minority_fn, frame_fn, int(p["min_count"]), float(p["cap"]))
    bounds = theta_bounds(frame, prior)
    clamped = clamp_theta(summary, bounds)
    table = assemble(clamped, prior, frame, ratios)
    out = _out(cfg)
    table.to_csv(out / "bisg.csv")
    ratios.to_csv(out / "ratios.csv")
    report = {
        "provenance": _provenance(cfg, "probs", {}),
        "cells": int(table.g.size),
        "clamped": {"below": clamped.n_below, "above": clamped.n_above},
        "filtered_surnames": int((~frame.keep).sum()),
        "ratios": {"n": len(ratios.ratios), "capped": ratios.n_capped, "excluded": ratios.excluded,
                   "min_count": ratios.min_count, "cap": ratios.cap},
    }
    _write_json(out / "probs.json", report)
    return {"bisg": str(out / "bisg.csv")}


def _plan_inputs(cfg: dict):
    prior = load_geo_prior(cfg["paths"]["geo_prior"])
    frame, roster = _load_frame(cfg, prior.strata)
    # the filter is recovered from the bisg table: a surname is kept iff it has cells there
    ratios = RatioTable.read_csv(_artifact(cfg, "ratios.csv"), cfg["probs"]["min_count"], cfg["probs"]["cap"])
    table = BisgTable.read_csv(_artifact(cfg, "bisg.csv"), ratios, frame)
    frame.keep = table.keep
    return prior, frame, roster, table


def _unit_pi(method: str, plan: design.SamplingPlan, cells: design.FrameCells) -> np.ndarray:
    if method == "poisson":
        return design.inclusion_probabilities(cells, plan.targets).pi
    if method == "srs":
        return np.full(cells.g.size, plan.total / cells.n_units.sum())
    if method == "stratified":
        rate = plan.targets / np.maximum(cells.n_units, 1)
        return rate[cells.g]
    rate = plan.targets / np.maximum(cells.n_kept, 1)
    return np.where(cells.keep, rate[cells.g], 0.0)


def cmd_plan(cfg: dict) -> dict:
    prior, frame, roster, table = _plan_inputs(cfg)
    pc = cfg["plan"]
    method = pc["method"]
    use_fn = bool(cfg["probs"]["use_first_names"])
    cells = _unit_cells(table, roster, use_fn) if roster is not None else design.FrameCells.from_bisg(table, frame)
    plan = design.make_plan(method, cells, prior, int(pc["target"]), bool(pc["filtered"]), bool(pc["replication_bug_allocation"]))
    pi = None
    if roster is not None:
        pi = _unit_pi(method, plan, cells)
        if method == "poisson":
            plan.diagnostics = design.plan_diagnostics(plan, cells, prior, pi, pc["epsilon"], pc["delta"])
        pd.DataFrame(
            {"unit_id": roster.frame["unit_id"].to_numpy(), "stratum": roster.frame["stratum"].to_numpy(),
             "p_hat": cells.p_hat, "kept": cells.keep.astype(int), "pi": pi}
        ).to_csv(Path(cfg["out_dir"]) / "pi.csv", index=False, float_format="%.17g")
    elif method == "poisson" and pc["epsilon"] is not None:
        plan.diagnostics = design.plan_diagnostics(plan, cells, prior, None, pc["epsilon"], pc["delta"])
    out = _out(cfg)
    d = plan.to_dict()
    d["provenance"] = _provenance(cfg, "plan", {})
    d["unit_level"] = roster is not None
    _write_json(out / "plan.json", d)
    return {"plan": str(out / "plan.json")}


def cmd_sample(cfg: dict) -> dict:
    pi = pd.read_csv(_artifact(cfg, "pi.csv"), dtype={"unit_id": str, "stratum": str}, keep_default_na=False,
                     float_precision="round_trip")
    seed = _stage_seed(cfg, "sample")
    draw = design.draw_sample(pi, seed)
    out = _out(cfg)
    draw.to_frame().to_csv(out / "sample.csv", index=False, float_format="%.17g")
    by_g = pi.groupby("stratum")["pi"].sum()
    _write_json(out / "sample.json", {
        "provenance": _provenance(cfg, "sample", {"sample": seed}),
        "n": draw.n, "n_by_stratum": draw.n_by_stratum(), "expected_n": float(pi["pi"].sum()),
        "expected_n_by_stratum": {g: float(v) for g, v in by_g.items()},
    })
    return {"sample": str(out / "sample.csv")}


def _targets(path: str, order) -> list[tuple[str, dict]]:
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    need = {"variable", "category", "probability"}
    if need - set(df.columns):
        raise InputError(f"targets.csv needs columns {sorted(need)}")
    df["probability"] = df["probability"].astype(float)
    variables = list(dict.fromkeys(df["variable"])) if order is None else list(order)
    out = []
    for v in variables:
        sub = df[df["variable"] == v]
        if sub.empty:
            raise InputError(f"no targets for margin {v!r}")
        out.append((v, dict(zip(sub["category"], sub["probability"]))))
    return out


def _estimate_column(y: pd.Series, w: np.ndarray) -> float | dict:
    num = pd.to_numeric(y, errors="coerce")
    if num.notna().sum() == y.replace("", np.nan).notna().sum():
        return estimate.hajek_mean(num.to_numpy(dtype=float), w)
    return {str(c): estimate.hajek_mean((y == c).to_numpy(dtype=float), w) for c in sorted(y.dropna().unique())}


def cmd_estimate(cfg: dict) -> dict:
    prior = load_geo_prior(cfg["paths"]["geo_prior"])
    ec = cfg["estimate"]
    sample_path = _artifact(cfg, "sample.csv")
    responses = pd.read_csv(cfg["paths"]["responses"], dtype=str, keep_default_na=False)
    sample = pd.read_csv(sample_path, dtype={"unit_id": str, "stratum": str}, keep_default_na=False, float_precision="round_trip")
    rs = estimate.ResponseSet(responses, sample)
    rows = rs.minority_respondents()
    if rows.empty:
        raise estimate.EstimationError("no responding minority units")
    ycols = ec["y"] or [c for c in rows.columns if c.startswith("y_")]
    w = rs.ipw(rows)
    stages = {"ipw": w.summary()}
    if ec["trim"] is not None:
        lo, hi = ec["trim"]
        w = estimate.trim_weights(w, float(lo), float(hi))
        stages["trimmed"] = w.summary()
    rake_diag = None
    if ec["adjust"] != "none":
        tpath = cfg["paths"]["targets"]
        if not tpath:
            raise ConfigError("estimate.adjust needs paths.targets")
        if not Path(tpath).exists():
            raise FileNotFoundError(tpath)
        margins = _targets(tpath, ec["margins"])
        X = rows[[v for v, _ in margins]].astype(str)
        if ec["adjust"] == "post_stratify":
            if len(margins) != 1:
                raise ConfigError("post_stratify takes exactly one margin")
            w = estimate.post_stratify(X, margins[0][0], margins[0][1], init=w)
        elif ec["adjust"] == "rake":
            res = estimate.rake(X, margins, init=w, tol=float(ec["tol"]), max_iter=int(ec["max_iter"]))
            w = res.weights
            rake_diag = res.diagnostics()
        else:
            raise ConfigError(f"unknown adjust {ec['adjust']!r}")
        stages[w.tag] = w.summary()
    est = {}
    strata = rows["stratum"].astype(str).tolist() if "stratum" in rows.columns else None
    for c in ycols:
        if c not in rows.columns:
            raise InputError(f"responses have no column {c!r}")
        e = {"hajek": _estimate_column(rows[c], w.values)}
        num = pd.to_numeric(rows[c], errors="coerce")
        if strata is not None and num.notna().all():
            e["stratified"] = estimate.stratified_mean(num.to_numpy(float), strata, prior, strict=bool(ec["strict"]))
        est[c] = e
    out = _out(cfg)
    _write_json(out / "estimates.json", {
        "provenance": _provenance(cfg, "estimate", {}),
        "n_respondents": int(rs.frame["responded"].sum()),
        "n_minority_respondents": int(len(rows)),
        "estimates": est,
        "weights": stages,
        "raking": rake_diag,
    })
    return {"estimates": str(out / "estimates.json")}


def _sim_config(cfg: dict) -> simlab.SimConfig:
    sc = dict(cfg["simulate"])
    profile = sc.pop("profile", None)
    for k in ("n_jobs", "export_beta"):
        sc.pop(k, None)
    sc.setdefault("seed", cfg["seed"])
    if "betas" in sc:
        sc["betas"] = tuple(sc["betas"])
    if "probability_modes" in sc:
        sc["probability_modes"] = tuple(sc["probability_modes"])
    return simlab.SimConfig.profile(profile, **sc) if profile else simlab.SimConfig(**sc)


def cmd_simulate(cfg: dict, export_dir: str | None = None) -> dict:
    sim = _sim_config(cfg)
    report = simlab.simulate(sim, n_jobs=int(cfg["simulate"]["n_jobs"]))
    out = _out(cfg)
    prov = _provenance(cfg, "simulate", {"simulate": sim.seed})
    simlab.write_report(report, out / "sim_report.json", {"provenance": prov})
    res = {"sim_report": str(out / "sim_report.json")}
    if export_dir:
        res.update(simlab.export_dataset(sim, export_dir, cfg["simulate"].get("export_beta")))
    return res


def cmd_diagnose(cfg: dict) -> dict:
    prior = load_geo_prior(cfg["paths"]["geo_prior"])
    plan = design.SamplingPlan.from_dict(json.loads(_artifact(cfg, "plan.json").read_text()))
    pi = pd.read_csv(_artifact(cfg, "pi.csv"), dtype={"unit_id": str, "stratum": str}, keep_default_na=False,
                     float_precision="round_trip")
    cells = design.FrameCells.from_units(plan.strata, pi["stratum"].tolist(), pi["p_hat"].to_numpy(float),
                                         pi["kept"].to_numpy(bool))
    pc = cfg["plan"]
    diag = design.plan_diagnostics(plan, cells, prior, pi["pi"].to_numpy(float), pc["epsilon"], pc["delta"])
    comparison = design.compare_methods(cells, prior, plan.total, filtered=bool(pc["filtered"]))
    out = _out(cfg)
    _write_json(out / "diagnostics.json", {
        "provenance": _provenance(cfg, "diagnose", {}),
        "plan": diag,
        "methods": {m: {"yield": d["yield"], "yield_sd": d["yield_sd"]} for m, d in comparison.items()},
    })
    return {"diagnostics": str(out / "diagnostics.json")}


STAGES = {
    "fit": cmd_fit, "probs": cmd_probs, "plan": cmd_plan, "sample": cmd_sample,
    "estimate": cmd_estimate, "diagnose": cmd_diagnose,
}


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


class _JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        return json.dumps({"level": record.levelname, "logger": record.name, "message": record.getMessage()})


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bisgsamp", description="BISG-driven Poisson sampling pipeline", allow_abbrev=False)
    p.add_argument("--version", action="version", version=f"bisgsamp {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    # no prefix matching: --target must not silently resolve to --targets
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out-dir")
    common.add_argument("--seed", type=int)
    common.add_argument("--log-level", default="WARNING")
    common.add_argument("--log-json", action="store_true", help="log as JSON lines on stderr")
    for k in DEFAULTS["paths"]:
        common.add_argument(f"--{k.replace('_', '-')}", dest=k)

    s = sub.add_parser("fit", parents=[common], allow_abbrev=False, help="fit the hierarchical surname model")
    s.add_argument("--iters", type=int)
    s.add_argument("--burnin", type=int)
    s.add_argument("--thin", type=int)
    s.add_argument("--backend", choices=["auto", "python", "cython"])

    s = sub.add_parser("probs", parents=[common], allow_abbrev=False, help="assemble BISG probabilities")
    s.add_argument("--cap", type=float)
    s.add_argument("--min-count", type=int)

    for name, helptext in (("plan", "allocate and compute inclusion probabilities"),
                           ("diagnose", "recompute plan diagnostics from existing artifacts")):
        s = sub.add_parser(name, parents=[common], allow_abbrev=False, help=helptext)
        s.add_argument("--target", type=int)
        s.add_argument("--method", choices=design.METHODS)
        s.add_argument("--filtered", dest="filtered", action="store_true", default=None)
        s.add_argument("--no-filtered", dest="filtered", action="store_false")
        s.add_argument("--epsilon", type=float)
        s.add_argument("--delta", type=float)
        s.add_argument("--replication-bug-allocation", action="store_true")

    sub.add_parser("sample", parents=[common], allow_abbrev=False, help="draw the Poisson sample")
    sub.add_parser("estimate", parents=[common], allow_abbrev=False, help="design-based estimates from responses")

    s = sub.add_parser("simulate", parents=[common], allow_abbrev=False, help="run the simulation study")
    s.add_argument("--profile", choices=sorted(simlab.PROFILES))
    s.add_argument("--replicates", type=int)
    s.add_argument("--n-jobs", type=int)
    s.add_argument("--export-dir", help="also write one simulated replicate as pipeline inputs")

    sub.add_parser("config", parents=[common], allow_abbrev=False, help="print the effective config")
    return p


def _error(exc: BaseException, code: int) -> int:
    body = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, FileNotFoundError):
        body["path"] = exc.args[0] if exc.args else None
        body["message"] = f"input file not found: {body['path']}"
    sys.stderr.write(json.dumps(body, sort_keys=True) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    if args.log_json:
        handler.setFormatter(_JsonFormatter())
    root = logging.getLogger("bisgsamp")
    root.handlers[:] = [handler]
    root.setLevel(args.log_level.upper())
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "config":
            sys.stdout.write(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
            return 0
        _require(cfg, args.command)
        if args.command == "simulate":
            res = cmd_simulate(cfg, args.export_dir)
        else:
            res = STAGES[args.command](cfg)
    except (FileNotFoundError, ConfigError, InputError) as exc:
        return _error(exc, 2)
    except Exception as exc:  # noqa: BLE001 - every failure becomes a JSON error
        log.debug("stage failed", exc_info=True)
        return _error(exc, 1)
    sys.stdout.write(json.dumps(res, sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
