"""Bilateral trade panel assembly and currency-regime pair coding.

Turns country-year regime facts and pair agreements into the 0/1 covariates
used by the gravity estimation: a union-pair dummy, a joint-gold dummy,
joint dummies for the other shared standards (silver, non-union bimetallic,
paper), trade-agreement, alliance and war dummies, and the per-year union
indicators of the event-study design.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, fields

import numpy as np
import pandas as pd

from .errors import CodingError, PanelError, ValidationError

GOLD = "gold"
SILVER = "silver"
BIMETALLIC = "bimetallic"
PAPER = "paper"
STANDARDS = (GOLD, SILVER, BIMETALLIC, PAPER)

AGREEMENT_KINDS = ("ta", "alliance", "war")

#: The 37-country reference sample (ISO 3166 alpha-3).
REFERENCE_SAMPLE = (
    "ARG", "AUS", "AUT", "BEL", "BGR", "BRA",
    "CAN", "CHE", "CHL", "CHN", "COL", "CUB",
    "DEU", "DNK", "EGY", "ESP", "FIN", "FRA",
    "GBR", "GRC", "IDN", "IND", "ITA", "JPN",
    "KOR", "MEX", "NLD", "NOR", "NZL", "PHL",
    "PRT", "RUS", "SWE", "TWN", "URY", "USA",
    "ZAF",
)

#: Names of the monetary-standard and agreement dummies, in canonical order.
BASE_COVARIATES = ("lmu", "gold", "silver", "bimetal_non_lmu", "paper_std", "ta")
OPTIONAL_COVARIATES = ("alliance", "war")


@dataclass(frozen=True)
class PanelObservation:
    """One directed trade flow: exporter -> importer in a given year."""

    exporter: str
    importer: str
    year: int
    flow: float

    @property
    def is_domestic(self) -> bool:
        return self.exporter == self.importer

    def __post_init__(self):
        if not np.isfinite(self.flow) or self.flow < 0:
            raise PanelError(
                f"flow must be finite and nonnegative, got {self.flow!r} for "
                f"({self.exporter}, {self.importer}, {self.year})"
            )


@dataclass(frozen=True)
class CodingOptions:
    """Switches for the pair-dummy coding rules.

    overlap_gold
        When True (default), a union pair that is also jointly on gold keeps
        gold = 1.  When False, lmu = 1 forces gold = 0 (non-overlap coding).
    backtrack_window
        Number of pre-entry years the event-study union indicator reaches
        back (anticipation window).  The pooled ``lmu`` dummy never
        backtracks.
    domestic
        Admit domestic observations (exporter == importer).
    include_alliance, include_war
        Attach the alliance / war dummies as panel columns.
    """

    overlap_gold: bool = True
    backtrack_window: int = 3
    domestic: bool = False
    include_alliance: bool = False
    include_war: bool = False

    def __post_init__(self):
        if self.backtrack_window < 0:
            raise ValidationError("backtrack_window must be >= 0")


@dataclass(frozen=True)
class PairCovariates:
    """Coded dummies for one (exporter, importer, year) cell.

    ``lmu_event`` is the event-study variant of ``lmu``: it also covers the
    backtrack window before the pair's joint entry year.
    """

    lmu: int = 0
    gold: int = 0
    silver: int = 0
    bimetal_non_lmu: int = 0
    paper_std: int = 0
    ta: int = 0
    alliance: int = 0
    war: int = 0
    lmu_event: int = 0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class RegimeTable:
    """Country-year map of monetary standards and union membership.

    Parameters
    ----------
    table : pandas.DataFrame
        Columns ``country`` (str), ``year`` (int), ``standard`` (one of
        ``gold``, ``silver``, ``bimetallic``, ``paper``) and ``lmu_member``
        (bool-like).
    union_bimetal_window : tuple of (int, int) or None
        Years in which a union member must be coded bimetallic (the union's
        free-coinage period).  Default (1865, 1873); None disables the check.
    """

    def __init__(self, table: pd.DataFrame, union_bimetal_window=(1865, 1873)):
        required = {"country", "year", "standard", "lmu_member"}
        missing = required - set(table.columns)
        if missing:
            raise ValidationError(f"regime table missing columns: {sorted(missing)}")
        df = table.loc[:, ["country", "year", "standard", "lmu_member"]].copy()
        df["country"] = df["country"].astype(str)
        df["year"] = df["year"].astype(int)
        df["standard"] = df["standard"].astype(str)
        df["lmu_member"] = df["lmu_member"].astype(bool)

        bad = sorted(set(df["standard"]) - set(STANDARDS))
        if bad:
            raise ValidationError(f"unknown monetary standard(s): {bad}; expected one of {list(STANDARDS)}")

        dup = df.duplicated(subset=["country", "year"], keep=False)
        if dup.any():
            rows = df.loc[dup, ["country", "year"]].drop_duplicates()
            keys = [f"({r.country}, {r.year})" for r in rows.itertuples()][:10]
            raise ValidationError(f"contradictory or duplicated regime rows for: {', '.join(keys)}")

        if union_bimetal_window is not None:
            lo, hi = union_bimetal_window
            mask = df["lmu_member"] & df["year"].between(lo, hi) & (df["standard"] != BIMETALLIC)
            if mask.any():
                rows = df.loc[mask, ["country", "year", "standard"]]
                keys = [f"({r.country}, {r.year}: {r.standard})" for r in rows.itertuples()][:10]
                raise ValidationError(
                    f"union members must be coded bimetallic in {lo}-{hi}; offending rows: {', '.join(keys)}"
                )

        df = df.sort_values(["country", "year"], kind="mergesort").reset_index(drop=True)
        self.table = df
        self._standard = dict(zip(zip(df["country"], df["year"]), df["standard"]))
        self._member = dict(zip(zip(df["country"], df["year"]), df["lmu_member"]))
        self.countries = sorted(df["country"].unique())
        self.years = sorted(df["year"].unique())
        self._entry_cache: dict[tuple[str, str], int | None] = {}

    def standard(self, country: str, year: int) -> str:
        try:
            return self._standard[(country, year)]
        except KeyError:
            raise CodingError(f"no regime row for {country} in {year}") from None

    def is_member(self, country: str, year: int) -> bool:
        try:
            return self._member[(country, year)]
        except KeyError:
            raise CodingError(f"no regime row for {country} in {year}") from None

    def member_countries(self, years=None) -> list:
        """Countries holding union membership in any of the given years (default: all)."""
        df = self.table
        if years is not None:
            df = df[df["year"].isin(list(years))]
        return sorted(df.loc[df["lmu_member"], "country"].unique())

    def pair_entry_year(self, i: str, j: str) -> int | None:
        """First year in which both countries are union members, or None."""
        key = (i, j) if i <= j else (j, i)
        if key not in self._entry_cache:
            entry = None
            for t in self.years:
                if self._member.get((i, t), False) and self._member.get((j, t), False):
                    entry = t
                    break
            self._entry_cache[key] = entry
        return self._entry_cache[key]


class AgreementTable:
    """Pair-year membership of trade agreements, alliances, and wars.

    Built from interval rows ``(c1, c2, year_start, year_end, kind)`` with
    inclusive year bounds and kind in {'ta', 'alliance', 'war'}.  Pairs are
    undirected.
    """

    def __init__(self, rows=None):
        self._active: set = set()
        self.rows: list = []
        for row in rows or []:
            c1, c2, y0, y1, kind = row
            self.add(c1, c2, int(y0), int(y1), kind)

    def add(self, c1: str, c2: str, year_start: int, year_end: int, kind: str):
        if kind not in AGREEMENT_KINDS:
            raise ValidationError(f"unknown agreement kind {kind!r}; expected one of {list(AGREEMENT_KINDS)}")
        if year_end < year_start:
            raise ValidationError(f"agreement window reversed: {year_start}..{year_end} for ({c1}, {c2})")
        a, b = sorted((c1, c2))
        self.rows.append((a, b, year_start, year_end, kind))
        for t in range(year_start, year_end + 1):
            self._active.add((a, b, t, kind))

    def active(self, i: str, j: str, t: int, kind: str) -> bool:
        a, b = sorted((i, j))
        return (a, b, t, kind) in self._active

    @classmethod
    def empty(cls) -> "AgreementTable":
        return cls()


def code_pair_dummies(
    regimes: RegimeTable,
    agreements: AgreementTable,
    i: str,
    j: str,
    t: int,
    options: CodingOptions | None = None,
) -> PairCovariates:
    """Code the regime and agreement dummies for one pair-year.

    Rules: ``lmu`` = 1 iff both countries are union members at ``t``;
    ``gold`` = 1 iff both are on gold (forced to 0 for union pairs in
    non-overlap mode); the silver / non-union-bimetallic / paper dummies
    require a shared standard and a pair that is not jointly in the union;
    a domestic pair (i == j) carries no cross-border dummies.  ``lmu_event``
    additionally covers the ``backtrack_window`` years before the pair's
    joint entry.

    Raises
    ------
    CodingError
        If a required country-year is absent from the regime table.
    """
    options = options or CodingOptions()
    if i == j:
        # Domestic flow: no cross-border regime or agreement cost applies.
        regimes.standard(i, t)
        return PairCovariates()

    std_i = regimes.standard(i, t)
    std_j = regimes.standard(j, t)
    lmu = regimes.is_member(i, t) and regimes.is_member(j, t)

    gold = std_i == GOLD and std_j == GOLD
    if lmu and not options.overlap_gold:
        gold = False
    silver = std_i == SILVER and std_j == SILVER and not lmu
    bimetal = std_i == BIMETALLIC and std_j == BIMETALLIC and not lmu
    paper = std_i == PAPER and std_j == PAPER and not lmu

    ta = agreements.active(i, j, t, "ta")
    alliance = agreements.active(i, j, t, "alliance")
    war = agreements.active(i, j, t, "war")

    lmu_event = lmu
    if not lmu and options.backtrack_window > 0:
        entry = regimes.pair_entry_year(i, j)
        if entry is not None and entry - options.backtrack_window <= t < entry:
            lmu_event = True

    return PairCovariates(
        lmu=int(lmu),
        gold=int(gold),
        silver=int(silver),
        bimetal_non_lmu=int(bimetal),
        paper_std=int(paper),
        ta=int(ta),
        alliance=int(alliance),
        war=int(war),
        lmu_event=int(lmu_event),
    )


@dataclass
class Panel:
    """A coded estimation panel: observations plus attached covariates.

    ``df`` is sorted by (exporter, importer, year) and carries one row per
    directed flow with the coded dummy columns.  ``covariates`` lists the
    columns available to the design builder; ``event_years`` is non-empty
    only after an event-study expansion.
    """

    df: pd.DataFrame
    covariates: list = field(default_factory=list)
    options: CodingOptions = field(default_factory=CodingOptions)
    event_years: list = field(default_factory=list)

    @property
    def countries(self) -> list:
        return sorted(set(self.df["exporter"]) | set(self.df["importer"]))

    @property
    def years(self) -> list:
        return sorted(self.df["year"].unique())

    @property
    def n_obs(self) -> int:
        return len(self.df)

    def flows(self) -> np.ndarray:
        return self.df["flow"].to_numpy(dtype=np.float64)

    def summary(self) -> dict:
        return {
            "observations": int(len(self.df)),
            "zero_flows": int((self.df["flow"] == 0).sum()),
            "countries": len(self.countries),
            "years": [int(self.df["year"].min()), int(self.df["year"].max())] if len(self.df) else [],
            "domestic_observations": int(self.df["is_domestic"].sum()),
        }


def _flows_frame(flows) -> pd.DataFrame:
    if isinstance(flows, pd.DataFrame):
        required = {"exporter", "importer", "year", "flow"}
        missing = required - set(flows.columns)
        if missing:
            raise PanelError(f"flow table missing columns: {sorted(missing)}")
        df = flows.loc[:, ["exporter", "importer", "year", "flow"]].copy()
    else:
        df = pd.DataFrame(
            [(o.exporter, o.importer, o.year, o.flow) for o in flows],
            columns=["exporter", "importer", "year", "flow"],
        )
    df["exporter"] = df["exporter"].astype(str)
    df["importer"] = df["importer"].astype(str)
    df["year"] = df["year"].astype(np.int64)
    df["flow"] = df["flow"].astype(np.float64)
    return df


def build_panel(
    flows,
    regimes: RegimeTable,
    agreements: AgreementTable | None = None,
    options: CodingOptions | None = None,
) -> Panel:
    """Assemble a coded panel from raw flows and regime/agreement facts.

    Parameters
    ----------
    flows : list of PanelObservation or pandas.DataFrame
        Directed flows with columns exporter, importer, year, flow.
    regimes : RegimeTable
    agreements : AgreementTable, optional
        Defaults to an empty table (all agreement dummies zero).
    options : CodingOptions, optional

    Returns
    -------
    Panel
        Rows sorted by (exporter, importer, year); covariate columns
        attached; deterministic for identical inputs.

    Raises
    ------
    PanelError
        On duplicate (exporter, importer, year) keys, negative flows, or
        domestic rows while ``options.domestic`` is off.
    CodingError
        If any observation references a country-year missing from the
        regime table.
    """
    options = options or CodingOptions()
    agreements = agreements or AgreementTable.empty()
    df = _flows_frame(flows)

    if (df["flow"] < 0).any() or df["flow"].isna().any():
        bad = df.loc[(df["flow"] < 0) | df["flow"].isna()].head(5)
        rows = [f"({r.exporter}, {r.importer}, {r.year}): {r.flow}" for r in bad.itertuples()]
        raise PanelError(f"negative or missing flows rejected: {'; '.join(rows)}")

    dup = df.duplicated(subset=["exporter", "importer", "year"], keep=False)
    if dup.any():
        rows = df.loc[dup, ["exporter", "importer", "year"]].drop_duplicates()
        keys = [f"({r.exporter}, {r.importer}, {r.year})" for r in rows.itertuples()][:10]
        raise PanelError(f"duplicate observations for: {', '.join(keys)}")

    df["is_domestic"] = df["exporter"] == df["importer"]
    if df["is_domestic"].any() and not options.domestic:
        n = int(df["is_domestic"].sum())
        raise PanelError(f"{n} domestic rows present but domestic trade is disabled; set options.domestic")

    df = df.sort_values(["exporter", "importer", "year"], kind="mergesort").reset_index(drop=True)

    coded = {name: np.zeros(len(df), dtype=np.int8) for name in PairCovariates().as_dict()}
    cov_cache: dict[tuple, PairCovariates] = {}
    for pos, row in enumerate(df.itertuples(index=False)):
        key = (row.exporter, row.importer, row.year)
        cov = cov_cache.get(key)
        if cov is None:
            cov = code_pair_dummies(regimes, agreements, row.exporter, row.importer, row.year, options)
            cov_cache[key] = cov
        for name, value in cov.as_dict().items():
            coded[name][pos] = value

    covariates = list(BASE_COVARIATES)
    if options.include_alliance:
        covariates.append("alliance")
    if options.include_war:
        covariates.append("war")
    for name in covariates:
        df[name] = coded[name]
    # Kept for the event-study expansion even when not a covariate itself.
    df["lmu_bt"] = coded["lmu_event"]

    return Panel(df=df, covariates=covariates, options=options)


def expand_event_study(panel: Panel, base_years, indicator_years=None) -> Panel:
    """Replace the pooled union dummy with per-year indicators.

    Each indicator ``lmu_<t>`` equals the backtracked union dummy on rows of
    year ``t`` and 0 elsewhere; base years form the omitted reference
    category.

    Parameters
    ----------
    panel : Panel
        Must carry the pooled union coding (``build_panel`` output).
    base_years : iterable of int
        Nonempty reference years, all within the panel span.
    indicator_years : iterable of int, optional
        Defaults to every panel year not in ``base_years``.

    Raises
    ------
    ValidationError
        If base years are empty, outside the panel, or overlap the
        indicator years.
    """
    base = sorted(set(int(y) for y in base_years))
    if not base:
        raise ValidationError("base_years must be nonempty")
    panel_years = set(panel.years)
    outside = [y for y in base if y not in panel_years]
    if outside:
        raise ValidationError(f"base years not in panel: {outside}")
    if "lmu" not in panel.covariates or "lmu_bt" not in panel.df.columns:
        raise ValidationError("panel is not coded with union dummies; run build_panel first")

    if indicator_years is None:
        ind_years = [y for y in panel.years if y not in base]
    else:
        ind_years = sorted(set(int(y) for y in indicator_years))
        overlap = sorted(set(ind_years) & set(base))
        if overlap:
            raise ValidationError(f"base years overlap indicator years: {overlap}")

    df = panel.df.copy()
    year = df["year"].to_numpy()
    bt = df["lmu_bt"].to_numpy()
    names = []
    new_cols = {}
    for t in ind_years:
        name = f"lmu_{t}"
        new_cols[name] = ((year == t) & (bt == 1)).astype(np.int8)
        names.append(name)
    df = pd.concat([df, pd.DataFrame(new_cols, index=df.index)], axis=1)

    covariates = names + [c for c in panel.covariates if c != "lmu"]
    return Panel(df=df, covariates=covariates, options=panel.options, event_years=ind_years)


def full_grid(countries, years, domestic: bool = False):
    """All directed (exporter, importer, year) keys over the given domains."""
    out = []
    for i, j in itertools.product(countries, repeat=2):
        if i == j and not domestic:
            continue
        for t in years:
            out.append((i, j, t))
    return out


#: Historical entry years of the Latin Monetary Union members.
LMU_ENTRY_YEARS = {"BEL": 1865, "FRA": 1865, "CHE": 1865, "ITA": 1865, "GRC": 1868}
