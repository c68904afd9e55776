"""Estimation design: covariate columns plus three-way fixed-effect indexing.

The three absorbed dimensions are exporter-year, importer-year, and the
directional (ordered) country pair.  Covariates that carry no variation
inside the fixed-effect span are screened out and logged rather than
breaking the fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import demean_inplace
from .errors import DesignError
from .panel import Panel

CLUSTER_DIMS = ("directional-pair", "pair", "exporter", "importer", "year")


@dataclass
class FixedEffectIndex:
    """Dense group ids per absorbed dimension, aligned with panel rows."""

    exporter_year_id: np.ndarray
    importer_year_id: np.ndarray
    pair_id: np.ndarray
    n_exporter_year: int
    n_importer_year: int
    n_pair: int
    exporter_year_keys: list
    importer_year_keys: list
    pair_keys: list
    notes: list = field(default_factory=list)

    @property
    def ids(self) -> list:
        return [self.exporter_year_id, self.importer_year_id, self.pair_id]

    @property
    def counts(self) -> list:
        return [self.n_exporter_year, self.n_importer_year, self.n_pair]

    def singleton_groups(self) -> dict:
        """Group ids with exactly one observation, per dimension."""
        out = {}
        for name, g, ng in zip(
            ("exporter_year", "importer_year", "pair"), self.ids, self.counts
        ):
            counts = np.bincount(g, minlength=ng)
            out[name] = np.flatnonzero(counts == 1).tolist()
        return out


@dataclass
class DroppedTerm:
    name: str
    reason: str


@dataclass
class DesignSpec:
    """Covariate matrix, fixed-effect index, and clustering metadata."""

    names: list
    matrix: np.ndarray
    fe: FixedEffectIndex
    cluster_dim: str
    exporter: np.ndarray
    importer: np.ndarray
    year: np.ndarray
    dropped_terms: list = field(default_factory=list)

    @property
    def n_obs(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.matrix.shape[1]

    def cluster_ids(self, dim: str | None = None, rows: np.ndarray | None = None):
        """Dense cluster labels for a clustering dimension.

        Parameters
        ----------
        dim : str, optional
            One of 'directional-pair' (default), 'pair' (undirected),
            'exporter', 'importer', 'year'.
        rows : ndarray of bool or int, optional
            Restrict to a row subset (labels are re-densified).

        Returns
        -------
        (ids, n_clusters)
        """
        dim = dim or self.cluster_dim
        if dim not in CLUSTER_DIMS:
            raise DesignError(f"unknown cluster dimension {dim!r}; expected one of {list(CLUSTER_DIMS)}")
        exporter = self.exporter if rows is None else self.exporter[rows]
        importer = self.importer if rows is None else self.importer[rows]
        year = self.year if rows is None else self.year[rows]
        if dim == "directional-pair":
            keys = np.char.add(np.char.add(exporter.astype(str), "->"), importer.astype(str))
        elif dim == "pair":
            exporter = exporter.astype(str)
            importer = importer.astype(str)
            lo = np.where(exporter <= importer, exporter, importer)
            hi = np.where(exporter <= importer, importer, exporter)
            keys = np.char.add(np.char.add(lo, "~"), hi)
        elif dim == "exporter":
            keys = exporter
        elif dim == "importer":
            keys = importer
        else:
            keys = year
        uniq, ids = np.unique(keys, return_inverse=True)
        return ids.astype(np.int64), len(uniq)


def _dense_ids(keys: np.ndarray):
    uniq, ids = np.unique(keys, return_inverse=True)
    return ids.astype(np.int64), uniq


def index_fixed_effects(panel: Panel) -> FixedEffectIndex:
    """Build dense, reproducible group ids for the three absorbed dimensions.

    Ids are assigned in sorted key order, so any permutation of the input
    rows yields the same id for the same key.  Degenerate layouts (a
    single-year panel, where pair effects are collinear with the interacted
    exporter-year x importer-year span) are flagged in ``notes``.
    """
    if panel.n_obs == 0:
        raise DesignError("cannot index an empty panel")
    df = panel.df
    exporter = df["exporter"].to_numpy(dtype=str)
    importer = df["importer"].to_numpy(dtype=str)
    year = df["year"].to_numpy()

    xt_keys = np.char.add(np.char.add(exporter, "@"), year.astype(str))
    mt_keys = np.char.add(np.char.add(importer, "@"), year.astype(str))
    pair_keys = np.char.add(np.char.add(exporter, "->"), importer)

    xt_id, xt_uniq = _dense_ids(xt_keys)
    mt_id, mt_uniq = _dense_ids(mt_keys)
    pp_id, pp_uniq = _dense_ids(pair_keys)

    notes = []
    if len(set(year.tolist())) == 1:
        notes.append(
            "single-year panel: pair fixed effects are collinear with the "
            "exporter-year x importer-year layout; estimates are not identified"
        )

    index = FixedEffectIndex(
        exporter_year_id=xt_id,
        importer_year_id=mt_id,
        pair_id=pp_id,
        n_exporter_year=len(xt_uniq),
        n_importer_year=len(mt_uniq),
        n_pair=len(pp_uniq),
        exporter_year_keys=xt_uniq.tolist(),
        importer_year_keys=mt_uniq.tolist(),
        pair_keys=pp_uniq.tolist(),
        notes=notes,
    )
    singles = index.singleton_groups()
    n_single = sum(len(v) for v in singles.values())
    if n_single:
        index.notes.append(f"{n_single} singleton fixed-effect groups (droppable before fitting)")
    return index


def within_transform(matrix: np.ndarray, fe: FixedEffectIndex, weights=None, tol=1e-10, max_sweeps=2000):
    """Return a within-transformed copy of ``matrix`` (columns demeaned by all FE dimensions)."""
    out = np.ascontiguousarray(matrix, dtype=np.float64).copy()
    n = out.shape[0]
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    demean_inplace(out, w, fe.ids, fe.counts, tol, max_sweeps)
    return out


def build_design(
    panel: Panel,
    formula,
    domestic_mode: bool = False,
    cluster_dim: str = "directional-pair",
    screen_tol: float = 1e-8,
) -> DesignSpec:
    """Assemble the covariate matrix and screening ledger for estimation.

    Parameters
    ----------
    panel : Panel
        Coded panel (``build_panel`` output, possibly event-study expanded).
    formula : sequence of str
        Covariate columns in the desired order; each must exist on the panel.
    domestic_mode : bool
        Append one international-border x year indicator per panel year
        (first year omitted as base), separating the cost of trading across
        a border from trading domestically over time.  Requires a panel
        with domestic rows.
    cluster_dim : str
        Default clustering dimension stored on the design.
    screen_tol : float
        A column whose within-transformed values all fall below this
        threshold (relative to the column scale) is dropped as collinear
        with the fixed effects.

    Returns
    -------
    DesignSpec

    Raises
    ------
    DesignError
        On an empty formula, unknown covariates, or when screening removes
        every column.
    """
    formula = list(formula)
    if not formula:
        raise DesignError("empty covariate set")
    missing = [c for c in formula if c not in panel.df.columns]
    if missing:
        raise DesignError(f"covariates not on panel: {missing}")
    if cluster_dim not in CLUSTER_DIMS:
        raise DesignError(f"unknown cluster dimension {cluster_dim!r}")

    fe = index_fixed_effects(panel)
    df = panel.df
    names = list(formula)
    columns = [df[c].to_numpy(dtype=np.float64) for c in names]

    if domestic_mode:
        if not df["is_domestic"].any():
            raise DesignError("domestic_mode requires a panel with domestic observations")
        years = panel.years
        border = (~df["is_domestic"].to_numpy()).astype(np.float64)
        year = df["year"].to_numpy()
        for t in years[1:]:
            names.append(f"border_{t}")
            columns.append(border * (year == t))

    matrix = np.column_stack(columns)

    # Screen columns absorbed by the fixed effects (no within variation).
    transformed = within_transform(matrix, fe)
    scale = np.maximum(np.abs(matrix).max(axis=0), 1.0)
    keep = np.abs(transformed).max(axis=0) >= screen_tol * scale
    dropped = [
        DroppedTerm(name=names[k], reason="constant within fixed-effect span")
        for k in np.flatnonzero(~keep)
    ]

    kept_idx = np.flatnonzero(keep)
    # Among the survivors, drop columns linearly dependent on earlier ones.
    if len(kept_idx):
        sub = transformed[:, kept_idx]
        _, r = np.linalg.qr(sub)
        diag = np.abs(np.diag(r))
        ref = diag.max() if diag.size else 0.0
        dependent = diag < 1e-10 * max(ref, 1.0)
        for pos in np.flatnonzero(dependent):
            dropped.append(
                DroppedTerm(name=names[kept_idx[pos]], reason="collinear with preceding covariates")
            )
        kept_idx = kept_idx[~dependent]

    if len(kept_idx) == 0:
        raise DesignError(
            "nothing identifiable: all covariates dropped "
            f"({', '.join(d.name for d in dropped)})"
        )

    return DesignSpec(
        names=[names[k] for k in kept_idx],
        matrix=np.ascontiguousarray(matrix[:, kept_idx]),
        fe=fe,
        cluster_dim=cluster_dim,
        exporter=df["exporter"].to_numpy(dtype=str),
        importer=df["importer"].to_numpy(dtype=str),
        year=df["year"].to_numpy(),
        dropped_terms=dropped,
    )
