"""Batch front end wiring ingestion, estimation, and counterfactuals.

Subcommands: ``estimate`` (coefficient tables, optional event study),
``simulate`` (counterfactual + attribution), ``pipeline`` (estimate then
simulate with a run manifest), and ``generate`` (synthetic data).  Config
precedence is flags over config file over defaults; the merged config is
echoed into the manifest together with its hash.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import platform
import sys
from contextlib import contextmanager
from datetime import datetime, timezone

import numpy as np
import pandas as pd

from . import __version__
from ._kernels import BACKEND
from .counterfactual import (
    DEFICIT_CONVENTIONS,
    CounterfactualSpec,
    attribute_union_trade,
    build_tau_hat,
    solve_counterfactual,
)
from .dataio import (
    build_domestic_flows,
    complete_matrix,
    generate_synthetic,
    read_agreements,
    read_flows,
    read_gdp,
    read_regimes,
    write_flows,
)
from .design import CLUSTER_DIMS, build_design
from .errors import CUGravityError, NonConvergenceError, SolverError, ValidationError
from .panel import CodingOptions, build_panel, expand_event_study
from .ppml import FitOptions, effect_transform, fit_ppml

#: Clustering dimensions exposed on the command line.
CLI_CLUSTER_CHOICES = ("pair", "directional-pair", "exporter", "importer")

DEFAULTS = {
    "flows": None,
    "regimes": None,
    "agreements": None,
    "gdp": None,
    "window": None,
    "ge_window": None,
    "event_study": False,
    "event_base_years": None,
    "domestic": False,
    "overlap_gold": True,
    "include_alliance": False,
    "include_war": False,
    "cluster": "directional-pair",
    "theta": 5.0,
    "beta": None,
    "estimates": None,
    "members": None,
    "direction": "leave",
    "deficit": "multiplicative",
    "damping": 0.5,
    "tol": 1e-12,
    "max_iter": 10000,
    "supply_elasticity": "fixed-labor",
    "seed": 0,
    "out": "out",
    "n_countries": 8,
    "n_years": 6,
    "true_beta": None,
    "fe_sigma": 0.5,
    "zero_share": None,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cugravity",
        description=(
            "Structural gravity estimation (PPML with three-way fixed effects) "
            "and exact-hat-algebra currency-union counterfactuals."
        ),
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file; explicit flags override it")
        sp.add_argument("--out", help="output directory (default: out)")
        sp.add_argument("--seed", type=int, help="random seed recorded in the manifest")

    def inputs(sp):
        sp.add_argument("--flows", help="flow file: exporter,importer,year,flow")
        sp.add_argument("--regimes", help="regime file: country,year,standard,lmu_member")
        sp.add_argument("--agreements", help="agreement file: c1,c2,year_start,year_end,kind")
        sp.add_argument("--gdp", help="GDP file: country,year,gdp (for domestic flows)")
        sp.add_argument("--window", help="inclusive year range A:B")

    def estimation(sp):
        sp.add_argument(
            "--event-study", dest="event_study", action="store_const", const=True,
            help="per-year union indicators instead of the pooled dummy",
        )
        sp.add_argument(
            "--domestic", action="store_const", const=True,
            help="include domestic flows (needs --gdp or domestic rows)",
        )
        sp.add_argument(
            "--no-overlap-gold", dest="overlap_gold", action="store_const", const=False,
            help="force gold = 0 on union pairs (non-overlapping coding)",
        )
        sp.add_argument("--cluster", choices=CLI_CLUSTER_CHOICES, help="clustering dimension")

    def simulation(sp):
        sp.add_argument("--theta", type=float, help="trade elasticity (default 5)")
        sp.add_argument("--beta", type=float, help="union coefficient for the cost shock")
        sp.add_argument("--estimates", help="estimates.json from a prior run (union beta source)")
        sp.add_argument("--deficit", choices=DEFICIT_CONVENTIONS, help="deficit convention")
        sp.add_argument(
            "--supply-elasticity", dest="supply_elasticity",
            help="supply-side mode; only 'fixed-labor' is implemented",
        )

    est = sub.add_parser("estimate", help="fit the gravity model and write coefficient tables")
    common(est)
    inputs(est)
    estimation(est)

    sim = sub.add_parser("simulate", help="run the counterfactual and write attribution tables")
    common(sim)
    inputs(sim)
    simulation(sim)

    pipe = sub.add_parser("pipeline", help="estimate, then simulate with the estimated coefficient")
    common(pipe)
    inputs(pipe)
    estimation(pipe)
    simulation(pipe)

    gen = sub.add_parser("generate", help="write a synthetic dataset with a truth record")
    common(gen)
    gen.add_argument("--n-countries", dest="n_countries", type=int)
    gen.add_argument("--n-years", dest="n_years", type=int)
    gen.add_argument("--true-beta", dest="true_beta", help='JSON map, e.g. \'{"lmu": 0.3}\'')
    gen.add_argument("--fe-sigma", dest="fe_sigma", type=float)
    gen.add_argument("--zero-share", dest="zero_share", type=float)

    return parser


def _parse_window(value):
    if value is None:
        return None
    if isinstance(value, str):
        parts = value.split(":")
        if len(parts) != 2:
            raise ValidationError(f"window must be 'A:B', got {value!r}")
        try:
            lo, hi = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValidationError(f"window years must be integers, got {value!r}") from None
    elif isinstance(value, (list, tuple)) and len(value) == 2:
        lo, hi = int(value[0]), int(value[1])
    else:
        raise ValidationError(f"window must be 'A:B' or [A, B], got {value!r}")
    if lo > hi:
        raise ValidationError(f"window reversed: {lo}:{hi}")
    return [lo, hi]


def merge_config(args: argparse.Namespace) -> dict:
    """Apply precedence: explicit flags > config file > defaults."""
    merged = dict(DEFAULTS)
    path = getattr(args, "config", None)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except json.JSONDecodeError as err:
            raise ValidationError(f"{path}: invalid JSON config: {err}") from None
        if not isinstance(file_cfg, dict):
            raise ValidationError(f"{path}: config must be a JSON object")
        unknown = sorted(set(file_cfg) - set(DEFAULTS))
        if unknown:
            raise ValidationError(f"{path}: unknown config keys: {unknown}")
        merged.update(file_cfg)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value

    merged["subcommand"] = args.subcommand
    merged["window"] = _parse_window(merged["window"])
    merged["ge_window"] = _parse_window(merged["ge_window"])
    if isinstance(merged["true_beta"], str):
        try:
            merged["true_beta"] = json.loads(merged["true_beta"])
        except json.JSONDecodeError as err:
            raise ValidationError(f"--true-beta is not valid JSON: {err}") from None
    if merged["cluster"] not in CLUSTER_DIMS:
        raise ValidationError(
            f"unknown cluster dimension {merged['cluster']!r}; expected one of {list(CLUSTER_DIMS)}"
        )
    if merged["deficit"] not in DEFICIT_CONVENTIONS:
        raise ValidationError(
            f"deficit convention must be one of {DEFICIT_CONVENTIONS}, got {merged['deficit']!r}"
        )
    if merged["supply_elasticity"] != "fixed-labor":
        raise ValidationError(
            f"supply elasticity {merged['supply_elasticity']!r} not implemented: "
            "only the labor-only model ('fixed-labor') is available"
        )
    if merged["theta"] is not None and not float(merged["theta"]) > 0:
        raise ValidationError("theta must be positive")
    return merged


@contextmanager
def _stage(name: str):
    """Prefix failures with the pipeline stage that raised them."""
    try:
        yield
    except CUGravityError as err:
        err.args = (f"[{name}] {err}",) + err.args[1:]
        raise
    except OSError as err:
        raise CUGravityError(f"[{name}] {err}") from err


def _jsonable(obj):
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_diagnostics(outdir: str, stage: str, err: Exception) -> None:
    payload = {"stage": stage, "type": type(err).__name__, "error": str(err)}
    if isinstance(err, NonConvergenceError) and err.trace is not None:
        payload["deviance_trace"] = list(err.trace)
    if isinstance(err, SolverError) and err.residual_trace is not None:
        payload["residual_trace"] = list(err.residual_trace)
    write_json(os.path.join(outdir, "diagnostics.json"), payload)


def _require(config: dict, key: str) -> str:
    if not config.get(key):
        raise ValidationError(f"--{key} is required for the {config['subcommand']} subcommand")
    return config[key]


def _load_inputs(config: dict):
    with _stage("ingest"):
        flows = read_flows(_require(config, "flows"))
        regimes = read_regimes(_require(config, "regimes"))
        agreements = read_agreements(config["agreements"]) if config["agreements"] else None
        gdp = read_gdp(config["gdp"]) if config["gdp"] else None
    if not flows:
        raise ValidationError(f"[ingest] no observations in {config['flows']}")
    return flows, regimes, agreements, gdp


def _coding_options(config: dict, domestic: bool) -> CodingOptions:
    return CodingOptions(
        overlap_gold=config["overlap_gold"],
        domestic=domestic,
        include_alliance=config["include_alliance"],
        include_war=config["include_war"],
    )


def _with_domestic(flows, regimes, agreements, gdp, config: dict, domestic: bool):
    """Append GDP-derived domestic rows when requested, then build the panel."""
    has_domestic_rows = any(o.is_domestic for o in flows)
    if domestic and gdp is not None:
        if has_domestic_rows:
            raise ValidationError(
                "flow file already contains domestic rows; omit --gdp or remove them"
            )
        base = build_panel(flows, regimes, agreements, _coding_options(config, False))
        flows = flows + build_domestic_flows(gdp, base)
    return build_panel(flows, regimes, agreements, _coding_options(config, domestic or has_domestic_rows))


def _window_or_span(config: dict, years) -> list:
    window = config["window"]
    if window is None:
        window = [int(min(years)), int(max(years))]
    return window


def run_estimate(config: dict, outdir: str):
    """Fit on the configured window; write estimates.json (+ event_study.csv)."""
    try:
        flows, regimes, agreements, gdp = _load_inputs(config)
        window = _window_or_span(config, [o.year for o in flows])
        flows = [o for o in flows if window[0] <= o.year <= window[1]]
        if not flows:
            raise ValidationError(f"no observations in window {window[0]}:{window[1]}")
        with _stage("panel"):
            panel = _with_domestic(flows, regimes, agreements, gdp, config, config["domestic"])
            if config["event_study"]:
                base_years = config["event_base_years"] or panel.years[:2]
                panel = expand_event_study(panel, base_years)
        with _stage("design"):
            design = build_design(
                panel,
                panel.covariates,
                domestic_mode=config["domestic"],
                cluster_dim=config["cluster"],
            )
        with _stage("fit"):
            est = fit_ppml(design, panel.flows(), FitOptions(cluster_dim=config["cluster"]))
    except (CUGravityError, OSError) as err:
        _write_diagnostics(outdir, "estimate", err)
        raise

    coefficients = []
    for name in est.names:
        beta, se = est.coefficient(name)
        eff = effect_transform(beta, se)
        coefficients.append(
            {
                "name": name,
                "beta": beta,
                "se": se,
                "ci_low": beta - 1.96 * se,
                "ci_high": beta + 1.96 * se,
                "effect_pct": 100.0 * eff.effect,
                "effect_pct_low": 100.0 * eff.low,
                "effect_pct_high": 100.0 * eff.high,
            }
        )
    payload = {
        "coefficients": coefficients,
        "cluster_dim": est.cluster_dim,
        "n_clusters": est.n_clusters,
        "low_rank_clusters": est.low_rank_clusters,
        "n_obs": design.n_obs,
        "n_retained": int(est.retained.sum()),
        "deviance": est.deviance,
        "iterations": est.iterations,
        "dropped_terms": [{"name": d.name, "reason": d.reason} for d in design.dropped_terms],
        "dropped_observations": est.dropped_observations,
        "event_study": bool(panel.event_years),
        "window": window,
        "kernel_backend": BACKEND,
    }
    write_json(os.path.join(outdir, "estimates.json"), payload)

    if panel.event_years:
        by_name = {c["name"]: c for c in coefficients}
        with open(os.path.join(outdir, "event_study.csv"), "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["year", "beta", "se", "ci_low", "ci_high"])
            for year in panel.event_years:
                row = by_name.get(f"lmu_{year}")
                if row is None:
                    writer.writerow([year, "", "", "", ""])
                else:
                    writer.writerow(
                        [year, repr(row["beta"]), repr(row["se"]),
                         repr(row["ci_low"]), repr(row["ci_high"])]
                    )
    return est, panel


def _resolve_beta(config: dict, fallback=None) -> float:
    if config["beta"] is not None:
        return float(config["beta"])
    if config["estimates"]:
        with _stage("ingest"):
            with open(config["estimates"], encoding="utf-8") as fh:
                table = json.load(fh)
        for row in table.get("coefficients", []):
            if row.get("name") == "lmu":
                return float(row["beta"])
        raise ValidationError(
            f"{config['estimates']}: no coefficient named 'lmu' to drive the counterfactual"
        )
    if fallback is not None:
        return float(fallback)
    raise ValidationError("supply the union coefficient via --beta or --estimates")


def run_simulate(config: dict, outdir: str, beta_fallback=None):
    """Complete the matrix, solve the counterfactual, write attribution tables."""
    try:
        beta = _resolve_beta(config, beta_fallback)
        flows, regimes, agreements, gdp = _load_inputs(config)
        with _stage("matrix"):
            panel = _with_domestic(
                flows, regimes, agreements, gdp, config, domestic=gdp is not None
            )
            window = config["ge_window"] or _window_or_span(config, panel.years)
            matrix, report = complete_matrix(panel, window)
        members = config["members"]
        if members is None:
            members = regimes.member_countries(range(window[0], window[1] + 1))
        with _stage("solve"):
            tau_hat = build_tau_hat(
                beta, config["theta"], members, matrix.countries, config["direction"]
            )
            cf_spec = CounterfactualSpec(
                tau_hat=tau_hat,
                theta=float(config["theta"]),
                deficit=config["deficit"],
                damping=float(config["damping"]),
                tol=float(config["tol"]),
                max_iter=int(config["max_iter"]),
            )
            result = solve_counterfactual(matrix, cf_spec)
        attribution = attribute_union_trade(matrix, result, members)
    except (CUGravityError, OSError) as err:
        _write_diagnostics(outdir, "simulate", err)
        raise

    countries = list(matrix.countries)
    payload = {
        "countries": countries,
        "members": sorted(members),
        "beta": beta,
        "theta": float(config["theta"]),
        "direction": config["direction"],
        "deficit": config["deficit"],
        "w_hat": dict(zip(countries, result.w_hat)),
        "G_hat": dict(zip(countries, result.G_hat)),
        "Pi_hat": dict(zip(countries, result.Pi_hat)),
        "X_prime": {
            exp: dict(zip(countries, result.X_prime[i]))
            for i, exp in enumerate(countries)
        },
        "iterations": result.iterations,
        "final_residual": result.residual_trace[-1],
        "window": list(window),
        "completion": report.as_dict(),
    }
    write_json(os.path.join(outdir, "counterfactual.json"), payload)

    with open(os.path.join(outdir, "attribution.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["country", "is_member", "baseline_trade", "counterfactual_trade",
             "level_change", "pct_change"]
        )
        for row in attribution:
            writer.writerow(
                [row["country"], int(row["is_member"]), repr(row["baseline_trade"]),
                 repr(row["counterfactual_trade"]), repr(row["level_change"]),
                 repr(row["pct_change"])]
            )
    return result, attribution


def run_pipeline(config: dict, outdir: str):
    """Estimate, then feed the pooled union coefficient into the counterfactual."""
    est, _panel = run_estimate(config, outdir)
    if "lmu" in est.names:
        beta = est.coefficient("lmu")[0]
    else:
        # Event-study runs carry per-year indicators only; the counterfactual
        # needs the pooled coefficient, so fit it separately.
        pooled = dict(config)
        pooled["event_study"] = False
        try:
            flows, regimes, agreements, gdp = _load_inputs(pooled)
            window = _window_or_span(pooled, [o.year for o in flows])
            flows = [o for o in flows if window[0] <= o.year <= window[1]]
            with _stage("panel"):
                panel = _with_domestic(flows, regimes, agreements, gdp, pooled, pooled["domestic"])
            with _stage("design"):
                design = build_design(
                    panel, panel.covariates,
                    domestic_mode=pooled["domestic"], cluster_dim=pooled["cluster"],
                )
            with _stage("fit"):
                pooled_est = fit_ppml(design, panel.flows(), FitOptions(cluster_dim=pooled["cluster"]))
        except (CUGravityError, OSError) as err:
            _write_diagnostics(outdir, "estimate", err)
            raise
        beta = pooled_est.coefficient("lmu")[0]
    return run_simulate(config, outdir, beta_fallback=beta)


def run_generate(config: dict, outdir: str):
    """Write a seeded synthetic dataset plus its generating truth."""
    observations, truth = generate_synthetic(
        n_countries=int(config["n_countries"]),
        n_years=int(config["n_years"]),
        true_beta=config["true_beta"],
        fe_sigma=float(config["fe_sigma"]),
        zero_share=config["zero_share"],
        seed=int(config["seed"]),
        include_alliance=config["include_alliance"],
        include_war=config["include_war"],
    )
    write_flows(os.path.join(outdir, "flows.csv"), observations)

    with open(os.path.join(outdir, "regimes.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["country", "year", "standard", "lmu_member"])
        for row in truth.regimes.table.itertuples(index=False):
            writer.writerow([row.country, row.year, row.standard, int(row.lmu_member)])

    with open(os.path.join(outdir, "agreements.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["c1", "c2", "year_start", "year_end", "kind"])
        for c1, c2, y0, y1, kind in truth.agreements.rows:
            writer.writerow([c1, c2, y0, y1, kind])

    write_json(
        os.path.join(outdir, "truth.json"),
        {
            "beta": truth.beta,
            "covariates": truth.covariates,
            "countries": truth.countries,
            "years": truth.years,
            "members": truth.members,
            "scale": truth.scale,
            "zero_share_target": truth.zero_share_target,
            "realized_zero_share": truth.realized_zero_share,
            "seed": truth.seed,
        },
    )
    return observations, truth


def _write_manifest(config: dict, outdir: str) -> None:
    canonical = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    payload = {
        "subcommand": config["subcommand"],
        "config": config,
        "config_hash": hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
        "seed": config["seed"],
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "pandas": pd.__version__,
            "cugravity": __version__,
            "kernel_backend": BACKEND,
        },
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    write_json(os.path.join(outdir, "manifest.json"), payload)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = merge_config(args)
        outdir = config["out"]
        os.makedirs(outdir, exist_ok=True)
        if args.subcommand == "estimate":
            run_estimate(config, outdir)
        elif args.subcommand == "simulate":
            run_simulate(config, outdir)
        elif args.subcommand == "pipeline":
            run_pipeline(config, outdir)
        else:
            run_generate(config, outdir)
        _write_manifest(config, outdir)
    except (CUGravityError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
