"""File ingestion and data preparation for estimation and counterfactuals.

Covers the four delimited input schemas (flows, regimes, agreements, GDP),
completion of a bilateral panel into a square averaged trade matrix, the
domestic-flow construction from GDP, and a seeded synthetic gravity
generator whose truth record drives the estimation checks.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .counterfactual import TradeMatrix
from .errors import ValidationError
from .panel import (
    AGREEMENT_KINDS,
    BASE_COVARIATES,
    BIMETALLIC,
    GOLD,
    PAPER,
    SILVER,
    AgreementTable,
    CodingOptions,
    Panel,
    PanelObservation,
    RegimeTable,
    code_pair_dummies,
)

log = logging.getLogger(__name__)

FLOW_HEADER = ["exporter", "importer", "year", "flow"]
REGIME_HEADER = ["country", "year", "standard", "lmu_member"]
AGREEMENT_HEADER = ["c1", "c2", "year_start", "year_end", "kind"]
GDP_HEADER = ["country", "year", "gdp"]

_TRUE = {"1", "true", "t", "yes"}
_FALSE = {"0", "false", "f", "no"}


def _open_rows(path, expected_header):
    """Yield (line_number, fields) after validating the header row."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if [h.strip() for h in header] != expected_header:
            raise ValidationError(
                f"{path}: expected header {','.join(expected_header)!r}, got {','.join(header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(expected_header):
                raise ValidationError(
                    f"{path}:{lineno}: expected {len(expected_header)} fields, got {len(row)}"
                )
            yield lineno, [f.strip() for f in row]


def _parse_int(value, path, lineno, what):
    try:
        return int(value)
    except ValueError:
        raise ValidationError(f"{path}:{lineno}: {what} {value!r} is not an integer") from None


def _parse_float(value, path, lineno, what):
    try:
        out = float(value)
    except ValueError:
        raise ValidationError(f"{path}:{lineno}: {what} {value!r} is not a number") from None
    if not np.isfinite(out):
        raise ValidationError(f"{path}:{lineno}: {what} {value!r} is not finite")
    return out


def _check_code(code, path, lineno, known_codes):
    if not code:
        raise ValidationError(f"{path}:{lineno}: empty country code")
    if known_codes is not None and code not in known_codes:
        raise ValidationError(f"{path}:{lineno}: unknown country code {code!r}")
    return code


def read_flows(path, known_codes=None) -> list:
    """Parse a flow file into observations.

    The schema is ``exporter,importer,year,flow``.  Rows with negative,
    missing, or non-numeric flows are rejected with their line number, as
    are duplicate (exporter, importer, year) keys.  When ``known_codes`` is
    given, country codes outside it are rejected too.
    """
    seen = {}
    out = []
    for lineno, row in _open_rows(path, FLOW_HEADER):
        exp = _check_code(row[0], path, lineno, known_codes)
        imp = _check_code(row[1], path, lineno, known_codes)
        year = _parse_int(row[2], path, lineno, "year")
        flow = _parse_float(row[3], path, lineno, "flow")
        if flow < 0:
            raise ValidationError(f"{path}:{lineno}: negative flow {flow!r}")
        key = (exp, imp, year)
        if key in seen:
            raise ValidationError(
                f"{path}:{lineno}: duplicate key {key} (first seen at line {seen[key]})"
            )
        seen[key] = lineno
        out.append(PanelObservation(exp, imp, year, flow))
    log.info("read %d flow rows from %s", len(out), path)
    return out


def write_flows(path, observations) -> None:
    """Write observations back to the flow schema; round-trips exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(FLOW_HEADER)
        for o in observations:
            writer.writerow([o.exporter, o.importer, o.year, repr(float(o.flow))])


def read_regimes(path, union_bimetal_window=(1865, 1873)) -> RegimeTable:
    """Parse a ``country,year,standard,lmu_member`` file into a RegimeTable."""
    rows = []
    for lineno, row in _open_rows(path, REGIME_HEADER):
        country = _check_code(row[0], path, lineno, None)
        year = _parse_int(row[1], path, lineno, "year")
        standard = row[2].lower()
        member_raw = row[3].lower()
        if member_raw in _TRUE:
            member = True
        elif member_raw in _FALSE:
            member = False
        else:
            raise ValidationError(
                f"{path}:{lineno}: lmu_member {row[3]!r} is not a recognized boolean"
            )
        rows.append((country, year, standard, member))
    if not rows:
        raise ValidationError(f"{path}: no regime rows")
    df = pd.DataFrame(rows, columns=REGIME_HEADER)
    return RegimeTable(df, union_bimetal_window=union_bimetal_window)


def read_agreements(path) -> AgreementTable:
    """Parse ``c1,c2,year_start,year_end,kind`` interval rows."""
    table = AgreementTable.empty()
    n = 0
    for lineno, row in _open_rows(path, AGREEMENT_HEADER):
        c1 = _check_code(row[0], path, lineno, None)
        c2 = _check_code(row[1], path, lineno, None)
        y0 = _parse_int(row[2], path, lineno, "year_start")
        y1 = _parse_int(row[3], path, lineno, "year_end")
        kind = row[4].lower()
        if kind not in AGREEMENT_KINDS:
            raise ValidationError(
                f"{path}:{lineno}: unknown agreement kind {row[4]!r}; "
                f"expected one of {list(AGREEMENT_KINDS)}"
            )
        try:
            table.add(c1, c2, y0, y1, kind)
        except ValidationError as err:
            raise ValidationError(f"{path}:{lineno}: {err}") from None
        n += 1
    log.info("read %d agreement rows from %s", n, path)
    return table


def read_gdp(path) -> dict:
    """Parse ``country,year,gdp`` into a {(country, year): gdp} map."""
    out = {}
    for lineno, row in _open_rows(path, GDP_HEADER):
        country = _check_code(row[0], path, lineno, None)
        year = _parse_int(row[1], path, lineno, "year")
        gdp = _parse_float(row[2], path, lineno, "gdp")
        if gdp < 0:
            raise ValidationError(f"{path}:{lineno}: negative gdp {gdp!r}")
        key = (country, year)
        if key in out:
            raise ValidationError(f"{path}:{lineno}: duplicate gdp row for {key}")
        out[key] = gdp
    log.info("read %d gdp rows from %s", len(out), path)
    return out


@dataclass
class CompletionReport:
    """What ``complete_matrix`` had to fill in, cell by directed-pair-year.

    ``zero_filled`` counts first-grid-year cells set to zero,
    ``interpolated`` interior gaps, ``extrapolated`` trailing carry-forward
    cells.  ``missing_pairs`` lists cross-border pairs with no data at all.
    """

    window: tuple
    zero_filled: int = 0
    interpolated: int = 0
    extrapolated: int = 0
    missing_pairs: list = field(default_factory=list)

    @property
    def cells_touched(self) -> int:
        return self.zero_filled + self.interpolated + self.extrapolated

    def as_dict(self) -> dict:
        return {
            "window": list(self.window),
            "zero_filled": self.zero_filled,
            "interpolated": self.interpolated,
            "extrapolated": self.extrapolated,
            "cells_touched": self.cells_touched,
            "missing_pairs": [list(p) for p in self.missing_pairs],
        }


def _complete_series(series: dict, grid, report: CompletionReport) -> np.ndarray:
    """Fill one directed pair's flow series over the year grid.

    A missing first grid year anchors at zero; interior gaps are linear in
    levels (zeros are legal, so no log transform); trailing gaps carry the
    last observation forward.
    """
    values = np.full(len(grid), np.nan)
    for pos, year in enumerate(grid):
        if year in series:
            values[pos] = series[year]
    if np.isnan(values[0]):
        values[0] = 0.0
        report.zero_filled += 1
    known = np.flatnonzero(~np.isnan(values))
    last = known[-1]
    for a, b in zip(known[:-1], known[1:]):
        if b - a > 1:
            values[a + 1 : b] = np.interp(np.arange(a + 1, b), [a, b], [values[a], values[b]])
            report.interpolated += b - a - 1
    if last < len(grid) - 1:
        values[last + 1 :] = values[last]
        report.extrapolated += len(grid) - 1 - last
    return values


def complete_matrix(panel: Panel, window) -> tuple:
    """Average completed flows over a year window into a square matrix.

    Every cross-border ordered pair of panel countries is completed over
    the full panel year span and averaged over ``window`` (inclusive
    bounds).  Diagonal cells are treated the same way for countries with at
    least one domestic observation and left at zero otherwise (absent
    domestic data is not a zero flow).

    Returns
    -------
    (TradeMatrix, CompletionReport)

    Raises
    ------
    ValidationError
        If the window falls outside the panel years, or a completed column
        sums to zero.
    """
    lo, hi = int(window[0]), int(window[1])
    if lo > hi:
        raise ValidationError(f"window reversed: {lo}..{hi}")
    years = panel.years
    if not years:
        raise ValidationError("empty panel")
    if lo < years[0] or hi > years[-1]:
        raise ValidationError(
            f"window {lo}..{hi} outside panel years {years[0]}..{years[-1]}"
        )
    grid = list(range(years[0], years[-1] + 1))
    in_window = np.array([lo <= y <= hi for y in grid])

    countries = panel.countries
    idx = {c: k for k, c in enumerate(countries)}
    n = len(countries)

    series: dict = {}
    for row in panel.df.itertuples(index=False):
        series.setdefault((row.exporter, row.importer), {})[int(row.year)] = float(row.flow)

    report = CompletionReport(window=(lo, hi))
    matrix = np.zeros((n, n))
    for i in countries:
        for j in countries:
            pair = series.get((i, j))
            if i == j:
                if pair is None:
                    continue
            elif pair is None:
                pair = {}
                report.missing_pairs.append((i, j))
            filled = _complete_series(pair, grid, report)
            matrix[idx[i], idx[j]] = float(filled[in_window].mean())

    return TradeMatrix(countries, matrix), report


def build_domestic_flows(gdp: dict, panel: Panel) -> list:
    """Domestic absorption as GDP minus total exports, per country-year.

    Country-years without a GDP row are skipped (absent, not zero); rows
    where exports exceed GDP are skipped with a warning since negative
    domestic trade is meaningless.
    """
    df = panel.df
    exports = (
        df.loc[df["exporter"] != df["importer"]]
        .groupby(["exporter", "year"], sort=True)["flow"]
        .sum()
    )
    out = []
    panel_years = set(panel.years)
    for country in panel.countries:
        for year in sorted(panel_years):
            key = (country, year)
            if key not in gdp:
                continue
            total = float(exports.get((country, year), 0.0))
            domestic = gdp[key] - total
            if domestic < 0:
                warnings.warn(
                    f"GDP below total exports for {country} in {year} "
                    f"({gdp[key]!r} < {total!r}); domestic flow omitted",
                    stacklevel=2,
                )
                continue
            out.append(PanelObservation(country, country, year, domestic))
    return out


@dataclass
class SyntheticTruth:
    """Generating parameters of a synthetic panel, for test comparison."""

    beta: dict
    covariates: list
    countries: list
    years: list
    members: list
    regimes: RegimeTable
    agreements: AgreementTable
    options: CodingOptions
    scale: float
    zero_share_target: float | None
    realized_zero_share: float
    seed: int


def _zero_targeting_scale(mu: np.ndarray, zero_share: float) -> float:
    """Scale c such that the expected zero fraction mean(exp(-c mu)) hits the target."""
    lo, hi = -40.0, 40.0

    def expected(log_c):
        return float(np.mean(np.exp(-np.exp(log_c) * mu)))

    if expected(lo) < zero_share or expected(hi) > zero_share:
        raise ValidationError(f"zero_share {zero_share} unreachable for generated means")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if expected(mid) > zero_share:
            lo = mid
        else:
            hi = mid
    return float(np.exp(0.5 * (lo + hi)))


def generate_synthetic(
    n_countries: int,
    n_years: int,
    true_beta: dict | None = None,
    fe_sigma: float = 0.5,
    zero_share: float | None = None,
    seed: int = 0,
    start_year: int = 1860,
    include_alliance: bool = False,
    include_war: bool = False,
) -> tuple:
    """Draw a gravity panel with known coefficients through the real coding path.

    Countries get regime histories (members of a synthetic union entering
    mid-sample, nonmembers switching standards), random trade agreements,
    and normal fixed effects; flows are Poisson draws around
    exp(FEs + x'beta).  When ``zero_share`` is set, the overall scale is
    tuned so the expected zero fraction matches it.

    Returns
    -------
    (observations, SyntheticTruth)
    """
    if n_countries < 3:
        raise ValidationError("need at least 3 countries")
    if n_years < 2:
        raise ValidationError("need at least 2 years")
    if fe_sigma < 0:
        raise ValidationError("fe_sigma must be nonnegative")
    if zero_share is not None and not (0.0 <= zero_share < 1.0):
        raise ValidationError("zero_share must lie in [0, 1)")

    options = CodingOptions(include_alliance=include_alliance, include_war=include_war)
    covariates = list(BASE_COVARIATES)
    if include_alliance:
        covariates.append("alliance")
    if include_war:
        covariates.append("war")

    beta = dict.fromkeys(covariates, 0.0)
    beta.update({"lmu": 0.3} if true_beta is None else true_beta)
    unknown = sorted(set(beta) - set(covariates))
    if unknown:
        raise ValidationError(
            f"true_beta names {unknown} not in available covariates {covariates}"
        )

    rng = np.random.default_rng(seed)
    countries = [f"C{i:02d}" for i in range(n_countries)]
    years = list(range(start_year, start_year + n_years))

    n_members = max(2, n_countries // 3)
    members = countries[:n_members]
    lo_idx = max(1, n_years // 3)
    hi_idx = max(lo_idx + 1, (2 * n_years) // 3)
    entry = {m: years[int(rng.integers(lo_idx, hi_idx))] for m in members}

    regime_rows = []
    nonmember_standards = [GOLD, SILVER, PAPER, BIMETALLIC]
    for c in countries:
        if c in members:
            for t in years:
                regime_rows.append((c, t, BIMETALLIC, t >= entry[c]))
        else:
            start_std = nonmember_standards[int(rng.integers(len(nonmember_standards)))]
            if start_std != GOLD and rng.random() < 0.5 and n_years > 2:
                switch = years[int(rng.integers(1, n_years))]
            else:
                switch = None
            for t in years:
                std = GOLD if switch is not None and t >= switch else start_std
                regime_rows.append((c, t, std, False))
    regimes = RegimeTable(pd.DataFrame(regime_rows, columns=REGIME_HEADER))

    agreements = AgreementTable.empty()
    kinds = ["ta"] + (["alliance"] if include_alliance else []) + (["war"] if include_war else [])
    for a in range(n_countries):
        for b in range(a + 1, n_countries):
            for kind in kinds:
                if rng.random() < 0.10:
                    y0 = years[int(rng.integers(0, n_years))]
                    y1 = years[int(rng.integers(0, n_years))]
                    agreements.add(countries[a], countries[b], min(y0, y1), max(y0, y1), kind)

    exp_fe = rng.normal(0.0, fe_sigma, size=(n_countries, n_years))
    imp_fe = rng.normal(0.0, fe_sigma, size=(n_countries, n_years))
    pair_fe = rng.normal(0.0, fe_sigma, size=(n_countries, n_countries))

    keys = []
    log_mu = []
    for a, i in enumerate(countries):
        for b, j in enumerate(countries):
            if i == j:
                continue
            for pos, t in enumerate(years):
                cov = code_pair_dummies(regimes, agreements, i, j, t, options)
                xb = sum(beta[name] * getattr(cov, name) for name in covariates)
                keys.append((i, j, t))
                log_mu.append(exp_fe[a, pos] + imp_fe[b, pos] + pair_fe[a, b] + xb)
    mu = np.exp(np.array(log_mu))
    if not np.all(mu > 0):
        raise ValidationError("degenerate generator settings: zero Poisson means")

    if zero_share is None:
        scale = 50.0 / float(np.median(mu))
    else:
        scale = _zero_targeting_scale(mu, zero_share)
    flows = rng.poisson(scale * mu).astype(np.float64)

    observations = [
        PanelObservation(i, j, t, f) for (i, j, t), f in zip(keys, flows)
    ]
    truth = SyntheticTruth(
        beta=beta,
        covariates=covariates,
        countries=countries,
        years=years,
        members=members,
        regimes=regimes,
        agreements=agreements,
        options=options,
        scale=scale,
        zero_share_target=zero_share,
        realized_zero_share=float(np.mean(flows == 0)),
        seed=seed,
    )
    return observations, truth
