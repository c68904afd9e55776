"""Poisson pseudo-maximum-likelihood with absorbed three-way fixed effects.

The fit is IRLS where every weighted least-squares step eliminates the
exporter-year, importer-year, and directional-pair effects by iterated
weighted demeaning (alternating projections) instead of explicit dummies.
Inference is a cluster-robust sandwich on the projected scores.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._kernels import demean_inplace
from .design import DesignSpec, FixedEffectIndex
from .errors import FitError, NonConvergenceError

_MU_FLOOR = 1e-290
_ETA_CAP = 650.0


@dataclass(frozen=True)
class FitOptions:
    """Convergence and preprocessing controls for the IRLS fit."""

    coef_tol: float = 1e-8
    dev_tol: float = 1e-9
    max_iter: int = 100
    demean_tol: float = 1e-10
    demean_max_sweeps: int = 10000
    cluster_dim: str | None = None
    drop_singletons: bool = True

    def __post_init__(self):
        if min(self.coef_tol, self.dev_tol, self.demean_tol) <= 0:
            raise FitError("tolerances must be positive")
        if self.max_iter < 1:
            raise FitError("max_iter must be >= 1")


@dataclass
class EstimateSet:
    """Fit results: coefficients, sandwich covariance, and diagnostics.

    ``residuals`` are response residuals (outcome minus fitted mean) on the
    retained rows; ``projected_design`` holds the weighted within-transformed
    covariates at convergence, which together form the score contributions
    used for clustered inference.
    """

    names: list
    beta: np.ndarray
    vcov: np.ndarray
    deviance: float
    iterations: int
    converged: bool
    dropped_observations: list
    residuals: np.ndarray
    fitted: np.ndarray
    projected_design: np.ndarray
    hessian: np.ndarray
    retained: np.ndarray
    cluster_dim: str
    n_clusters: int
    low_rank_clusters: bool = False
    deviance_trace: list = field(default_factory=list)
    dropped_terms: list = field(default_factory=list)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.vcov))

    def coefficient(self, name: str) -> tuple:
        """(beta, se) for a named covariate."""
        try:
            k = self.names.index(name)
        except ValueError:
            raise FitError(f"no coefficient named {name!r}; have {self.names}") from None
        return float(self.beta[k]), float(self.se[k])


@dataclass(frozen=True)
class EffectEstimate:
    """Proportional trade effect implied by a log-linear coefficient."""

    effect: float
    low: float
    high: float


def poisson_deviance(y, mu) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0, y * np.log(y / mu), 0.0)
    return float(2.0 * np.sum(term - (y - mu)))


def find_dropped_rows(outcome, fe: FixedEffectIndex, drop_singletons: bool = True):
    """Rows that cannot enter the fit, with a machine-readable ledger.

    Two removal rules applied alternately until a fixpoint: a fixed-effect
    level whose outcomes are all zero makes its dummy unbounded (separation),
    and a level with a single remaining observation is fit exactly by its
    own dummy (singleton).  Either way the rows carry no information about
    the slopes.

    Returns
    -------
    (active, ledger) : (ndarray of bool, list of dict)
    """
    y = np.asarray(outcome, dtype=np.float64)
    active = np.ones(y.shape[0], dtype=bool)
    ledger = []
    dim_names = ("exporter_year", "importer_year", "pair")
    changed = True
    while changed:
        changed = False
        for name, g, ng in zip(dim_names, fe.ids, fe.counts):
            present = np.bincount(g, weights=active.astype(np.float64), minlength=ng)
            totals = np.bincount(g, weights=y * active, minlength=ng)
            sep = (present > 0) & (totals == 0.0)
            if sep.any():
                rows = active & sep[g]
                ledger.append(
                    {
                        "reason": "separated",
                        "dimension": name,
                        "groups": int(sep.sum()),
                        "rows": int(rows.sum()),
                    }
                )
                active &= ~rows
                changed = True
            if drop_singletons:
                present = np.bincount(g, weights=active.astype(np.float64), minlength=ng)
                single = present == 1
                if single.any():
                    rows = active & single[g]
                    ledger.append(
                        {
                            "reason": "singleton",
                            "dimension": name,
                            "groups": int(single.sum()),
                            "rows": int(rows.sum()),
                        }
                    )
                    active &= ~rows
                    changed = True
    return active, ledger


def _redensify(ids, counts, active):
    new_ids, new_counts = [], []
    for g in ids:
        uniq, inv = np.unique(g[active], return_inverse=True)
        new_ids.append(inv.astype(np.int64))
        new_counts.append(len(uniq))
    return new_ids, new_counts


def _screen_after_drops(names, x, ids, counts, options):
    """Re-screen covariates on the retained rows.

    Dropping separated or singleton rows can leave a column with no within
    variation (or exactly collinear with another); the weighted solve would
    then wander along a flat direction.  Membership of the fixed-effect span
    does not depend on the weights, so an unweighted probe suffices.
    """
    probe = np.ascontiguousarray(x.copy())
    w = np.ones(probe.shape[0])
    demean_inplace(probe, w, ids, counts, options.demean_tol, options.demean_max_sweeps)
    scale = np.maximum(np.abs(x).max(axis=0), 1.0)
    keep = np.abs(probe).max(axis=0) >= 1e-8 * scale
    dropped = [
        {"name": names[j], "reason": "no variation left after dropping separated rows"}
        for j in np.flatnonzero(~keep)
    ]
    kept_idx = np.flatnonzero(keep)
    if len(kept_idx):
        _, r = np.linalg.qr(probe[:, kept_idx])
        diag = np.abs(np.diag(r))
        ref = diag.max() if diag.size else 0.0
        dependent = diag < 1e-10 * max(ref, 1.0)
        for pos in np.flatnonzero(dependent):
            dropped.append(
                {
                    "name": names[kept_idx[pos]],
                    "reason": "collinear after dropping separated rows",
                }
            )
        kept_idx = kept_idx[~dependent]
    if len(kept_idx) == 0:
        raise FitError(
            "no identifiable covariates remain after dropping separated observations"
        )
    if len(kept_idx) == len(names):
        return names, x, []
    return (
        [names[j] for j in kept_idx],
        np.ascontiguousarray(x[:, kept_idx]),
        dropped,
    )


def fit_ppml(design: DesignSpec, outcome, options: FitOptions | None = None) -> EstimateSet:
    """Fit the Poisson pseudo-likelihood with all three FE dimensions absorbed.

    Parameters
    ----------
    design : DesignSpec
        Screened covariate matrix plus fixed-effect index.
    outcome : array-like
        Nonnegative flows aligned with the design rows.
    options : FitOptions, optional

    Returns
    -------
    EstimateSet
        Converged coefficients with cluster-robust covariance (clustered on
        ``options.cluster_dim`` or the design default).

    Raises
    ------
    FitError
        On input mismatches, an all-zero outcome, or a singular system.
    NonConvergenceError
        If the iteration cap is reached; carries the last iterate and the
        deviance trace.
    """
    options = options or FitOptions()
    y_full = np.asarray(outcome, dtype=np.float64)
    if y_full.ndim != 1 or y_full.shape[0] != design.n_obs:
        raise FitError(
            f"outcome length {y_full.shape[0]} does not match design rows {design.n_obs}"
        )
    if not np.all(np.isfinite(y_full)) or (y_full < 0).any():
        raise FitError("outcome must be finite and nonnegative")
    if not (y_full > 0).any():
        raise FitError("all-zero outcome: nothing to fit")

    active, ledger = find_dropped_rows(y_full, design.fe, options.drop_singletons)
    if not active.any():
        raise FitError("separation/singleton screening removed every observation")

    y = y_full[active]
    x = np.ascontiguousarray(design.matrix[active])
    ids, counts = _redensify(design.fe.ids, design.fe.counts, active)
    names, x, dropped_terms = _screen_after_drops(list(design.names), x, ids, counts, options)
    n, k = x.shape

    mu = (y + y.mean()) / 2.0
    eta = np.log(mu)
    beta = np.zeros(k)
    dev = poisson_deviance(y, mu)
    trace = [dev]

    converged = False
    it = 0
    flat_streak = 0
    xt = np.empty_like(x)
    zt = np.empty(n)
    hess = np.empty((k, k))
    for it in range(1, options.max_iter + 1):
        w = mu
        z = eta + (y - mu) / mu

        m = np.empty((n, k + 1), dtype=np.float64)
        m[:, :k] = x
        m[:, k] = z
        demean_inplace(m, w, ids, counts, options.demean_tol, options.demean_max_sweeps)
        xt = m[:, :k]
        zt = m[:, k]

        hess = xt.T @ (w[:, None] * xt)
        rhs = xt.T @ (w * zt)
        try:
            beta_new = np.linalg.solve(hess, rhs)
        except np.linalg.LinAlgError:
            raise FitError(
                "singular weighted cross-product; design should have been screened"
            ) from None

        # Within residual equals the full-model residual, so z minus the
        # residual is the linear predictor including all fixed effects.
        eta_new = z - (zt - xt @ beta_new)
        eta_new = np.minimum(eta_new, _ETA_CAP)
        mu_new = np.maximum(np.exp(eta_new), _MU_FLOOR)
        dev_new = poisson_deviance(y, mu_new)

        # The first step is accepted as-is: the starting mean lies off the
        # model span, so interpolating back toward it searches an infeasible
        # segment and can stall the iteration one step short of the optimum.
        # From the second iteration on, eta stays inside the span and
        # backtracking toward the previous iterate is a valid descent search.
        if it > 1:
            halvings = 0
            while dev_new > dev * (1 + 1e-12) and halvings < 30:
                beta_new = 0.5 * (beta_new + beta)
                eta_new = 0.5 * (eta_new + eta)
                mu_new = np.maximum(np.exp(eta_new), _MU_FLOOR)
                dev_new = poisson_deviance(y, mu_new)
                halvings += 1
            if dev_new > dev * (1 + 1e-12):
                raise NonConvergenceError(
                    f"step halving failed to reduce the deviance at iteration {it} "
                    f"({dev_new:.6e} vs {dev:.6e})",
                    beta=beta,
                    iterations=it,
                    trace=trace,
                )

        coef_delta = np.abs(beta_new - beta).max() / (1.0 + np.abs(beta).max())
        dev_delta = abs(dev_new - dev) / (1.0 + abs(dev_new))

        beta, eta, mu, dev = beta_new, eta_new, mu_new, dev_new
        trace.append(dev)
        if coef_delta < options.coef_tol and dev_delta < options.dev_tol:
            converged = True
            break

        # A converged deviance with a coefficient still on the move means
        # the likelihood is flat along that direction: some combination of
        # covariates separates the zero flows and its coefficient is
        # drifting toward infinity.  Burning the remaining iterations
        # cannot fix that, so report it for what it is.
        if dev_delta < options.dev_tol and coef_delta >= options.coef_tol:
            flat_streak += 1
            if flat_streak >= 5:
                raise NonConvergenceError(
                    "deviance has converged but a coefficient keeps drifting "
                    f"(change {coef_delta:.3e} per iteration); a covariate "
                    "combination appears to separate the zero flows, leaving "
                    "that coefficient unidentified. Inspect the zero pattern "
                    "or remove the offending covariate.",
                    beta=beta,
                    iterations=it,
                    trace=trace,
                )
        else:
            flat_streak = 0

    if not converged:
        raise NonConvergenceError(
            f"IRLS did not converge in {options.max_iter} iterations "
            f"(last coef change {coef_delta:.3e}, deviance change {dev_delta:.3e})",
            beta=beta,
            iterations=it,
            trace=trace,
        )

    # Re-project at the converged weights so the stored scores, bread, and
    # fitted means all refer to the same mean vector.
    xt = x.copy()
    demean_inplace(xt, mu, ids, counts, options.demean_tol, options.demean_max_sweeps)
    hess = xt.T @ (mu[:, None] * xt)

    residuals = y - mu
    est = EstimateSet(
        names=names,
        beta=beta,
        vcov=np.full((k, k), np.nan),
        deviance=dev,
        iterations=it,
        converged=True,
        dropped_observations=ledger,
        residuals=residuals,
        fitted=mu,
        projected_design=np.ascontiguousarray(xt),
        hessian=hess,
        retained=active,
        cluster_dim=options.cluster_dim or design.cluster_dim,
        n_clusters=0,
        deviance_trace=trace,
        dropped_terms=dropped_terms,
    )
    est.vcov = cluster_vcov(est, design, est.cluster_dim)
    _, n_clusters = design.cluster_ids(est.cluster_dim, rows=active)
    est.n_clusters = n_clusters
    est.low_rank_clusters = n_clusters < k
    return est


def cluster_vcov(estimates: EstimateSet, design: DesignSpec, dim: str | None = None) -> np.ndarray:
    """Cluster-robust sandwich covariance of the fitted coefficients.

    Bread is the inverse weighted cross-product of the projected covariates;
    meat sums, over clusters, the outer products of summed score
    contributions.  A G/(G-1) small-sample factor is applied, G the number
    of clusters.

    Raises
    ------
    FitError
        If the bread is singular or fewer than two clusters exist.
    """
    dim = dim or estimates.cluster_dim
    ids, n_clusters = design.cluster_ids(dim, rows=estimates.retained)
    if n_clusters < 2:
        raise FitError(f"need at least 2 clusters, got {n_clusters} for dimension {dim!r}")
    k = estimates.projected_design.shape[1]
    if n_clusters < k:
        warnings.warn(
            f"{n_clusters} clusters for {k} coefficients: covariance is low rank",
            stacklevel=2,
        )
    scores = estimates.projected_design * estimates.residuals[:, None]
    sums = np.zeros((n_clusters, k))
    for j in range(k):
        sums[:, j] = np.bincount(ids, weights=scores[:, j], minlength=n_clusters)
    meat = sums.T @ sums
    try:
        bread = np.linalg.inv(estimates.hessian)
    except np.linalg.LinAlgError:
        raise FitError("singular bread matrix in sandwich covariance") from None
    correction = n_clusters / (n_clusters - 1.0)
    vcov = correction * bread @ meat @ bread
    return (vcov + vcov.T) / 2.0


def effect_transform(beta: float, se: float) -> EffectEstimate:
    """Proportional effect exp(beta) - 1 with a 95 percent interval.

    Values are fractions (0.30 means +30 percent).
    """
    if not (np.isfinite(beta) and np.isfinite(se)):
        raise FitError("beta and se must be finite")
    return EffectEstimate(
        effect=float(np.exp(beta) - 1.0),
        low=float(np.exp(beta - 1.96 * se) - 1.0),
        high=float(np.exp(beta + 1.96 * se) - 1.0),
    )
