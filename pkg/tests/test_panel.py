"""Coding rules: regime tables, pair dummies, panel assembly, event-study expansion."""

import numpy as np
import pandas as pd
import pytest

from cugravity.errors import CodingError, PanelError, ValidationError
from cugravity.panel import (
    BASE_COVARIATES,
    BIMETALLIC,
    GOLD,
    LMU_ENTRY_YEARS,
    PAPER,
    REFERENCE_SAMPLE,
    SILVER,
    AgreementTable,
    CodingOptions,
    Panel,
    PanelObservation,
    RegimeTable,
    build_panel,
    code_pair_dummies,
    expand_event_study,
    full_grid,
)

from conftest import reference_agreements, reference_regimes


def make_regimes(rows, window=(1865, 1873)):
    frame = pd.DataFrame(rows, columns=["country", "year", "standard", "lmu_member"])
    return RegimeTable(frame, union_bimetal_window=window)


# ---------------------------------------------------------------------------
# regime table


def test_regime_table_lookup(regimes):
    assert regimes.standard("GBR", 1866) == GOLD
    assert regimes.standard("PRT", 1869) == SILVER
    assert regimes.standard("PRT", 1871) == GOLD
    assert regimes.is_member("FRA", 1865)
    assert not regimes.is_member("FRA", 1864)
    assert not regimes.is_member("GBR", 1870)


def test_regime_table_missing_country_year(regimes):
    with pytest.raises(CodingError, match="no regime row for XXX in 1865"):
        regimes.standard("XXX", 1865)
    with pytest.raises(CodingError, match="no regime row for FRA in 1900"):
        regimes.is_member("FRA", 1900)


def test_regime_table_rejects_unknown_standard():
    with pytest.raises(ValidationError, match="unknown monetary standard"):
        make_regimes([("FRA", 1865, "cowrie", False)])


def test_regime_table_rejects_duplicates():
    rows = [("FRA", 1865, BIMETALLIC, True), ("FRA", 1865, GOLD, True)]
    with pytest.raises(ValidationError, match=r"\(FRA, 1865\)"):
        make_regimes(rows)


def test_regime_table_enforces_bimetal_window():
    rows = [("FRA", 1866, GOLD, True)]
    with pytest.raises(ValidationError, match="must be coded bimetallic"):
        make_regimes(rows)
    # Outside the window, or with the check disabled, the same row passes.
    make_regimes([("FRA", 1875, GOLD, True)])
    make_regimes([("FRA", 1866, GOLD, True)], window=None)


def test_member_countries_window(regimes):
    assert regimes.member_countries([1864]) == []
    assert regimes.member_countries([1865]) == ["BEL", "CHE", "FRA", "ITA"]
    assert regimes.member_countries(range(1865, 1874)) == ["BEL", "CHE", "FRA", "GRC", "ITA"]
    assert regimes.member_countries() == ["BEL", "CHE", "FRA", "GRC", "ITA"]


def test_pair_entry_year(regimes):
    assert regimes.pair_entry_year("FRA", "BEL") == 1865
    assert regimes.pair_entry_year("GRC", "FRA") == 1868
    assert regimes.pair_entry_year("FRA", "GBR") is None
    # Symmetric in the pair ordering.
    assert regimes.pair_entry_year("BEL", "FRA") == 1865


def test_reference_sample_has_37_codes():
    assert len(REFERENCE_SAMPLE) == 37
    assert len(set(REFERENCE_SAMPLE)) == 37
    assert set(LMU_ENTRY_YEARS) <= set(REFERENCE_SAMPLE)


# ---------------------------------------------------------------------------
# agreement table


def test_agreement_window_inclusive(agreements):
    assert agreements.active("FRA", "GBR", 1860, "ta")
    assert agreements.active("GBR", "FRA", 1892, "ta")
    assert not agreements.active("FRA", "GBR", 1859, "ta")
    assert not agreements.active("FRA", "GBR", 1893, "ta")
    assert not agreements.active("FRA", "GBR", 1870, "alliance")


def test_agreement_validation():
    table = AgreementTable()
    with pytest.raises(ValidationError, match="unknown agreement kind"):
        table.add("FRA", "GBR", 1860, 1870, "tariff")
    with pytest.raises(ValidationError, match="window reversed"):
        table.add("FRA", "GBR", 1870, 1860, "ta")


def test_agreement_rows_round_trip():
    table = AgreementTable([("GBR", "FRA", 1860, 1870, "ta")])
    # Stored with the pair sorted, so rebuilding from .rows is stable.
    assert table.rows == [("FRA", "GBR", 1860, 1870, "ta")]
    rebuilt = AgreementTable(table.rows)
    assert rebuilt.active("FRA", "GBR", 1865, "ta")


# ---------------------------------------------------------------------------
# pair dummy coding


def test_union_pair_coding(regimes, agreements):
    cov = code_pair_dummies(regimes, agreements, "FRA", "BEL", 1866)
    assert cov.lmu == 1
    assert cov.bimetal_non_lmu == 0  # union pairs never carry the bimetal dummy
    assert cov.gold == cov.silver == cov.paper_std == 0
    assert cov.lmu_event == 1


def test_pre_entry_pair_is_bimetal(regimes, agreements):
    cov = code_pair_dummies(regimes, agreements, "FRA", "BEL", 1862)
    assert cov.lmu == 0
    assert cov.bimetal_non_lmu == 1


def test_shared_standard_dummies(regimes, agreements):
    assert code_pair_dummies(regimes, agreements, "GBR", "PRT", 1871).gold == 1
    assert code_pair_dummies(regimes, agreements, "GBR", "PRT", 1869).gold == 0
    # No shared-silver or shared-paper pair exists in the reference world;
    # build one directly.
    custom = make_regimes(
        [
            ("AAA", 1866, SILVER, False),
            ("BBB", 1866, SILVER, False),
            ("CCC", 1866, PAPER, False),
            ("DDD", 1866, PAPER, False),
        ]
    )
    empty = AgreementTable.empty()
    assert code_pair_dummies(custom, empty, "AAA", "BBB", 1866).silver == 1
    assert code_pair_dummies(custom, empty, "CCC", "DDD", 1866).paper_std == 1
    assert code_pair_dummies(custom, empty, "AAA", "CCC", 1866).silver == 0


def test_gold_overlap_switch():
    # Two union members jointly on gold after the free-coinage window.
    rows = [("FRA", 1875, GOLD, True), ("BEL", 1875, GOLD, True)]
    table = make_regimes(rows)
    empty = AgreementTable.empty()
    on = code_pair_dummies(table, empty, "FRA", "BEL", 1875, CodingOptions(overlap_gold=True))
    off = code_pair_dummies(table, empty, "FRA", "BEL", 1875, CodingOptions(overlap_gold=False))
    assert on.lmu == off.lmu == 1
    assert on.gold == 1
    assert off.gold == 0


def test_event_backtrack_window(regimes, agreements):
    # FRA-BEL joint entry 1865; a 3-year window reaches back to 1862.
    for year, expected in [(1861, 0), (1862, 1), (1864, 1), (1865, 1)]:
        cov = code_pair_dummies(regimes, agreements, "FRA", "BEL", year)
        assert cov.lmu_event == expected, year
        assert cov.lmu == (1 if year >= 1865 else 0)
    narrow = CodingOptions(backtrack_window=1)
    assert code_pair_dummies(regimes, agreements, "FRA", "BEL", 1863, narrow).lmu_event == 0
    assert code_pair_dummies(regimes, agreements, "FRA", "BEL", 1864, narrow).lmu_event == 1
    zero = CodingOptions(backtrack_window=0)
    assert code_pair_dummies(regimes, agreements, "FRA", "BEL", 1864, zero).lmu_event == 0


def test_backtrack_respects_late_entrant(regimes, agreements):
    # GRC joins in 1868, so FRA-GRC backtracks from there, not from 1865.
    assert code_pair_dummies(regimes, agreements, "FRA", "GRC", 1865).lmu_event == 1
    assert code_pair_dummies(regimes, agreements, "FRA", "GRC", 1864).lmu_event == 0
    assert code_pair_dummies(regimes, agreements, "FRA", "GRC", 1867).lmu == 0


def test_agreement_dummy_attaches(regimes, agreements):
    assert code_pair_dummies(regimes, agreements, "FRA", "GBR", 1866).ta == 1
    assert code_pair_dummies(regimes, agreements, "ITA", "CHE", 1866).ta == 0
    assert code_pair_dummies(regimes, agreements, "ITA", "CHE", 1868).ta == 1


def test_domestic_cell_carries_no_dummies(regimes, agreements):
    cov = code_pair_dummies(regimes, agreements, "FRA", "FRA", 1866)
    assert all(v == 0 for v in cov.as_dict().values())
    # Still validates the country-year exists.
    with pytest.raises(CodingError):
        code_pair_dummies(regimes, agreements, "FRA", "FRA", 1900)


def test_negative_backtrack_rejected():
    with pytest.raises(ValidationError, match="backtrack_window"):
        CodingOptions(backtrack_window=-1)


# ---------------------------------------------------------------------------
# panel assembly


def test_panel_observation_validation():
    obs = PanelObservation("FRA", "FRA", 1865, 2.0)
    assert obs.is_domestic
    with pytest.raises(PanelError, match="finite and nonnegative"):
        PanelObservation("FRA", "BEL", 1865, -1.0)
    with pytest.raises(PanelError, match="finite and nonnegative"):
        PanelObservation("FRA", "BEL", 1865, float("nan"))


def test_build_panel_codes_and_sorts(regimes, agreements):
    obs = [
        PanelObservation("GBR", "FRA", 1866, 5.0),
        PanelObservation("FRA", "BEL", 1866, 3.0),
        PanelObservation("FRA", "BEL", 1862, 1.0),
    ]
    panel = build_panel(obs, regimes, agreements)
    assert list(panel.df["exporter"]) == ["FRA", "FRA", "GBR"]
    assert list(panel.df["year"]) == [1862, 1866, 1866]
    assert panel.covariates == list(BASE_COVARIATES)
    row = panel.df.iloc[1]  # FRA -> BEL in 1866
    assert row["lmu"] == 1 and row["ta"] == 0
    row = panel.df.iloc[2]  # GBR -> FRA in 1866
    assert row["lmu"] == 0 and row["ta"] == 1
    # The backtracked dummy is attached even though it is not a covariate.
    assert panel.df.iloc[0]["lmu_bt"] == 1
    assert panel.df.iloc[0]["lmu"] == 0


def test_build_panel_accepts_dataframe(regimes):
    frame = pd.DataFrame(
        {"exporter": ["FRA"], "importer": ["BEL"], "year": [1866], "flow": [2.5]}
    )
    panel = build_panel(frame, regimes)
    assert panel.n_obs == 1
    assert panel.df.iloc[0]["lmu"] == 1


def test_build_panel_rejects_duplicates(regimes):
    obs = [
        PanelObservation("FRA", "BEL", 1866, 1.0),
        PanelObservation("FRA", "BEL", 1866, 2.0),
    ]
    with pytest.raises(PanelError, match=r"duplicate observations.*\(FRA, BEL, 1866\)"):
        build_panel(obs, regimes)


def test_build_panel_rejects_negative_flows(regimes):
    frame = pd.DataFrame(
        {"exporter": ["FRA"], "importer": ["BEL"], "year": [1866], "flow": [-3.0]}
    )
    with pytest.raises(PanelError, match="negative or missing flows"):
        build_panel(frame, regimes)


def test_build_panel_domestic_switch(regimes):
    obs = [PanelObservation("FRA", "FRA", 1866, 9.0)]
    with pytest.raises(PanelError, match="domestic"):
        build_panel(obs, regimes)
    panel = build_panel(obs, regimes, options=CodingOptions(domestic=True))
    assert panel.df.iloc[0]["is_domestic"]
    assert panel.df.iloc[0]["lmu"] == 0


def test_build_panel_unknown_country(regimes):
    obs = [PanelObservation("FRA", "ZZZ", 1866, 1.0)]
    with pytest.raises(CodingError, match="no regime row for ZZZ in 1866"):
        build_panel(obs, regimes)


def test_build_panel_optional_covariates(regimes):
    table = AgreementTable()
    table.add("FRA", "GBR", 1860, 1870, "alliance")
    obs = [PanelObservation("FRA", "GBR", 1866, 1.0)]
    base = build_panel(obs, regimes, table)
    assert "alliance" not in base.covariates
    opts = CodingOptions(include_alliance=True, include_war=True)
    panel = build_panel(obs, regimes, table, opts)
    assert panel.covariates == list(BASE_COVARIATES) + ["alliance", "war"]
    assert panel.df.iloc[0]["alliance"] == 1
    assert panel.df.iloc[0]["war"] == 0


def test_build_panel_deterministic(regimes, agreements):
    rows, _ = _shuffled_obs(seed=3)
    a = build_panel(rows, regimes, agreements)
    rows2, _ = _shuffled_obs(seed=99)  # same set, different order
    b = build_panel(rows2, regimes, agreements)
    pd.testing.assert_frame_equal(a.df, b.df)


def _shuffled_obs(seed):
    rng = np.random.default_rng(seed)
    base = [
        PanelObservation("FRA", "BEL", 1866, 3.0),
        PanelObservation("BEL", "FRA", 1866, 4.0),
        PanelObservation("GBR", "FRA", 1866, 5.0),
        PanelObservation("FRA", "GBR", 1862, 6.0),
    ]
    order = rng.permutation(len(base))
    return [base[i] for i in order], order


def test_panel_summary(regimes):
    obs = [
        PanelObservation("FRA", "BEL", 1866, 0.0),
        PanelObservation("BEL", "FRA", 1866, 4.0),
        PanelObservation("FRA", "FRA", 1866, 2.0),
    ]
    panel = build_panel(obs, regimes, options=CodingOptions(domestic=True))
    summary = panel.summary()
    assert summary["observations"] == 3
    assert summary["zero_flows"] == 1
    assert summary["countries"] == 2
    assert summary["years"] == [1866, 1866]
    assert summary["domestic_observations"] == 1


# ---------------------------------------------------------------------------
# event-study expansion


def _union_panel(regimes, agreements):
    rows, _ = reference_flows_small()
    return build_panel(rows, regimes, agreements)


def reference_flows_small():
    rng = np.random.default_rng(11)
    regimes = reference_regimes()
    rows = []
    for year in range(1860, 1874):
        for orig in ("FRA", "BEL", "GBR"):
            for dest in ("FRA", "BEL", "GBR"):
                if orig == dest:
                    continue
                rows.append(PanelObservation(orig, dest, year, float(rng.poisson(5.0))))
    return rows, regimes


def test_event_study_columns(regimes, agreements):
    panel = _union_panel(regimes, agreements)
    expanded = expand_event_study(panel, base_years=[1860, 1861])
    expected = [f"lmu_{t}" for t in range(1862, 1874)]
    assert expanded.event_years == list(range(1862, 1874))
    assert [c for c in expanded.covariates if c.startswith("lmu_")] == expected
    assert "lmu" not in expanded.covariates
    # Indicators switch on exactly where the backtracked dummy does.
    df = expanded.df
    fra_bel = df[(df["exporter"] == "FRA") & (df["importer"] == "BEL")]
    for year in range(1862, 1874):
        value = fra_bel.loc[fra_bel["year"] == year, f"lmu_{year}"].iloc[0]
        assert value == 1, year
    # Off-year rows stay zero.
    assert (fra_bel["lmu_1865"].to_numpy() == (fra_bel["year"] == 1865).to_numpy()).all()
    gbr = df[df["importer"] == "GBR"]
    assert (gbr[[f"lmu_{t}" for t in range(1862, 1874)]].to_numpy() == 0).all()


def test_event_study_validation(regimes, agreements):
    panel = _union_panel(regimes, agreements)
    with pytest.raises(ValidationError, match="nonempty"):
        expand_event_study(panel, base_years=[])
    with pytest.raises(ValidationError, match="not in panel"):
        expand_event_study(panel, base_years=[1850])
    with pytest.raises(ValidationError, match="overlap"):
        expand_event_study(panel, base_years=[1860], indicator_years=[1860, 1865])
    plain = Panel(df=panel.df.copy(), covariates=["gold"])
    with pytest.raises(ValidationError, match="union dummies"):
        expand_event_study(plain, base_years=[1860])


def test_event_study_explicit_indicator_years(regimes, agreements):
    panel = _union_panel(regimes, agreements)
    expanded = expand_event_study(panel, base_years=[1860], indicator_years=[1865, 1866])
    assert expanded.event_years == [1865, 1866]
    assert expanded.covariates[:2] == ["lmu_1865", "lmu_1866"]


# ---------------------------------------------------------------------------
# grid helper


def test_full_grid_counts():
    grid = full_grid(["A", "B", "C"], [1860, 1861])
    assert len(grid) == 3 * 2 * 2
    assert ("A", "A", 1860) not in grid
    with_domestic = full_grid(["A", "B", "C"], [1860, 1861], domestic=True)
    assert len(with_domestic) == 9 * 2
    assert ("A", "A", 1860) in with_domestic
