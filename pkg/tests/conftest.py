"""Shared fixtures and panel factories for the test suite."""

import numpy as np
import pandas as pd
import pytest

from cugravity.design import DesignSpec, FixedEffectIndex
from cugravity.panel import (
    BIMETALLIC,
    GOLD,
    PAPER,
    SILVER,
    AgreementTable,
    CodingOptions,
    Panel,
    RegimeTable,
)


def single_group_design(x1):
    """Design with one all-absorbing fixed-effect group (an intercept) and
    a single dummy covariate, so the Poisson slope has a closed form."""
    n = x1.shape[0]
    ones = np.zeros(n, dtype=np.int64)
    fe = FixedEffectIndex(
        exporter_year_id=ones,
        importer_year_id=ones,
        pair_id=ones,
        n_exporter_year=1,
        n_importer_year=1,
        n_pair=1,
        exporter_year_keys=["all"],
        importer_year_keys=["all"],
        pair_keys=["all"],
    )
    return DesignSpec(
        names=["d"],
        matrix=x1.reshape(-1, 1).astype(np.float64),
        fe=fe,
        cluster_dim="exporter",
        exporter=np.array(["A" if v else "B" for v in x1], dtype=str),
        importer=np.array(["Z"] * n, dtype=str),
        year=np.zeros(n, dtype=np.int64),
    )


def make_gravity_panel(
    seed,
    n_countries=5,
    n_years=4,
    beta=(0.4, -0.3),
    intercept=1.0,
    fe_sigma=0.5,
    start_year=1860,
):
    """Small bilateral panel with two binary covariates and known slopes.

    Flows are Poisson draws around exp(intercept + FEs + x @ beta); the
    fixed effects are N(0, fe_sigma) per exporter-year, importer-year and
    directed pair.  Returns the panel together with the outcome vector.
    """
    rng = np.random.default_rng(seed)
    codes = [f"C{i}" for i in range(n_countries)]
    years = list(range(start_year, start_year + n_years))
    fe_x = rng.normal(0.0, fe_sigma, (n_countries, n_years))
    fe_m = rng.normal(0.0, fe_sigma, (n_countries, n_years))
    fe_p = rng.normal(0.0, fe_sigma, (n_countries, n_countries))
    rows = []
    for ti, year in enumerate(years):
        for i, orig in enumerate(codes):
            for j, dest in enumerate(codes):
                if i == j:
                    continue
                x1 = float(rng.random() < 0.35)
                x2 = float(rng.random() < 0.5)
                eta = (
                    intercept
                    + fe_x[i, ti]
                    + fe_m[j, ti]
                    + fe_p[i, j]
                    + beta[0] * x1
                    + beta[1] * x2
                )
                flow = float(rng.poisson(np.exp(eta)))
                rows.append((orig, dest, year, flow, x1, x2, False))
    df = pd.DataFrame(
        rows,
        columns=["exporter", "importer", "year", "flow", "x1", "x2", "is_domestic"],
    )
    return Panel(df=df, covariates=["x1", "x2"])


def make_sparse_gravity_panel(seed, n_countries=6, n_years=4):
    """Variant tuned so at least a fifth of the flows are exact zeros."""
    return make_gravity_panel(
        seed,
        n_countries=n_countries,
        n_years=n_years,
        intercept=0.0,
        fe_sigma=0.8,
    )


def reference_regimes(years=range(1860, 1874)):
    """Monetary-regime table for a small world with a five-member union.

    FRA, BEL, ITA and CHE join in 1865, GRC in 1868; GBR is on gold
    throughout, PRT switches silver -> gold in 1870, RUS stays on paper.
    """
    entry = {"FRA": 1865, "BEL": 1865, "ITA": 1865, "CHE": 1865, "GRC": 1868}
    rows = []
    for year in years:
        for code, when in entry.items():
            rows.append((code, year, BIMETALLIC, year >= when))
        rows.append(("GBR", year, GOLD, False))
        rows.append(("PRT", year, GOLD if year >= 1870 else SILVER, False))
        rows.append(("RUS", year, PAPER, False))
    frame = pd.DataFrame(rows, columns=["country", "year", "standard", "lmu_member"])
    return RegimeTable(frame)


def reference_agreements():
    table = AgreementTable()
    table.add("FRA", "GBR", 1860, 1892, "ta")
    table.add("BEL", "GBR", 1862, 1892, "ta")
    table.add("ITA", "CHE", 1868, 1878, "ta")
    return table


def reference_flows(seed=7, years=range(1860, 1874), beta_lmu=0.3):
    """Panel rows over the reference regimes with a positive union effect."""
    rng = np.random.default_rng(seed)
    regimes = reference_regimes(years)
    codes = list(regimes.countries)
    rows = []
    size = {code: rng.uniform(0.5, 2.0) for code in codes}
    for year in years:
        for orig in codes:
            for dest in codes:
                if orig == dest:
                    continue
                both = regimes.is_member(orig, year) and regimes.is_member(dest, year)
                eta = (
                    1.2
                    + np.log(size[orig])
                    + np.log(size[dest])
                    + beta_lmu * both
                    + rng.normal(0.0, 0.25)
                )
                rows.append((orig, dest, year, float(rng.poisson(np.exp(eta)))))
    return rows, regimes


@pytest.fixture
def regimes():
    return reference_regimes()


@pytest.fixture
def agreements():
    return reference_agreements()


@pytest.fixture
def coding_options():
    return CodingOptions()
