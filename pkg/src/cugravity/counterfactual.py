"""Exact-hat-algebra counterfactuals on a baseline trade matrix.

Everything is expressed in proportional changes ("hats"), so the only
inputs are the baseline flow matrix, the trade elasticity, and a matrix of
trade-cost changes.  The solver iterates the wage fixed point with share
updates of the Dekle-Eaton-Kortum form, renormalizing each sweep to hold
nominal world output constant.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import SolverError, ValidationError

DEFICIT_CONVENTIONS = ("multiplicative", "additive")


@dataclass(frozen=True)
class TradeMatrix:
    """Square bilateral flow matrix: rows export, columns import.

    The diagonal holds domestic absorption.  Income is the row sum,
    expenditure the column sum, and import shares divide each column by
    its sum.
    """

    countries: tuple
    flows: np.ndarray

    def __init__(self, countries, flows):
        object.__setattr__(self, "countries", tuple(countries))
        x = np.array(flows, dtype=np.float64, copy=True)
        n = len(self.countries)
        if len(set(self.countries)) != n:
            raise ValidationError("duplicate country labels in trade matrix")
        if x.shape != (n, n):
            raise ValidationError(
                f"flow matrix shape {x.shape} does not match {n} country labels"
            )
        if not np.all(np.isfinite(x)) or (x < 0).any():
            raise ValidationError("trade matrix entries must be finite and nonnegative")
        cols = x.sum(axis=0)
        if (cols <= 0).any():
            bad = [self.countries[j] for j in np.flatnonzero(cols <= 0)]
            raise ValidationError(f"zero expenditure column for importer(s): {', '.join(bad)}")
        x.setflags(write=False)
        object.__setattr__(self, "flows", x)

    @property
    def n(self) -> int:
        return len(self.countries)

    @property
    def income(self) -> np.ndarray:
        """Y_i: row sums (sales, including domestic)."""
        return self.flows.sum(axis=1)

    @property
    def expenditure(self) -> np.ndarray:
        """E_j: column sums (absorption, including domestic)."""
        return self.flows.sum(axis=0)

    @property
    def deficits(self) -> np.ndarray:
        """D_j = E_j - Y_j; sums to zero by construction."""
        return self.expenditure - self.income

    @property
    def world_output(self) -> float:
        return float(self.flows.sum())

    @property
    def shares(self) -> np.ndarray:
        """lambda_ij = X_ij / E_j, column-stochastic."""
        return self.flows / self.expenditure[None, :]

    def index_of(self, country: str) -> int:
        try:
            return self.countries.index(country)
        except ValueError:
            raise ValidationError(f"country {country!r} not in trade matrix") from None


@dataclass(frozen=True)
class CounterfactualSpec:
    """Trade-cost shock plus solver controls.

    ``tau_hat`` is the elementwise ratio of counterfactual to baseline trade
    costs; the solver raises it to the power -theta.  ``tol`` bounds the
    undamped wage update, which also bounds the market-clearing residual.
    """

    tau_hat: np.ndarray
    theta: float = 5.0
    deficit: str = "multiplicative"
    damping: float = 0.5
    tol: float = 1e-12
    max_iter: int = 10000

    def __post_init__(self):
        t = np.asarray(self.tau_hat, dtype=np.float64)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise ValidationError("tau_hat must be a square matrix")
        if not np.all(np.isfinite(t)) or (t <= 0).any():
            raise ValidationError("tau_hat entries must be finite and positive")
        object.__setattr__(self, "tau_hat", t)
        if not self.theta > 0:
            raise ValidationError("theta must be positive")
        if self.deficit not in DEFICIT_CONVENTIONS:
            raise ValidationError(
                f"deficit convention must be one of {DEFICIT_CONVENTIONS}, got {self.deficit!r}"
            )
        if not (0.0 < self.damping <= 1.0):
            raise ValidationError("damping must lie in (0, 1]")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")


@dataclass
class CounterfactualResult:
    """Converged hats plus recovered levels.

    ``lambda_hat`` holds proportional share changes (well defined even where
    the baseline share is zero); ``lambda_prime`` the counterfactual shares
    themselves.  ``Pi_hat`` is the inward-resistance change per importer and
    ``G_hat`` the welfare change (home-share sufficient statistic).
    """

    countries: tuple
    w_hat: np.ndarray
    lambda_hat: np.ndarray
    lambda_prime: np.ndarray
    expenditure_prime: np.ndarray
    X_prime: np.ndarray
    Pi_hat: np.ndarray
    G_hat: np.ndarray
    iterations: int
    converged: bool
    residual_trace: list = field(default_factory=list)


def build_tau_hat(beta, theta, members, labels, direction: str = "leave") -> np.ndarray:
    """Trade-cost change matrix for dissolving or forming a currency union.

    A union whose flow effect is exp(beta) is equivalent to a bilateral
    cost factor exp(-beta/theta) on member pairs.  Removing it ("leave")
    therefore raises member-pair costs by exp(+beta/theta); imposing it
    ("join") applies exp(-beta/theta).  All other cells, including the
    diagonal, stay at 1, and the two directions are exact reciprocals.
    """
    if direction not in ("leave", "join"):
        raise ValidationError(f"direction must be 'leave' or 'join', got {direction!r}")
    if not theta > 0:
        raise ValidationError("theta must be positive")
    labels = list(labels)
    members = set(members)
    missing = members - set(labels)
    if missing:
        raise ValidationError(f"member(s) not in labels: {', '.join(sorted(missing))}")
    n = len(labels)
    tau = np.ones((n, n))
    if len(members) < 2:
        warnings.warn(
            "fewer than two union members: tau_hat is the identity", stacklevel=2
        )
        return tau
    sign = 1.0 if direction == "leave" else -1.0
    value = float(np.exp(sign * beta / theta))
    in_union = np.array([c in members for c in labels])
    mask = np.outer(in_union, in_union)
    np.fill_diagonal(mask, False)
    tau[mask] = value
    return tau


def solve_counterfactual(baseline: TradeMatrix, spec: CounterfactualSpec) -> CounterfactualResult:
    """Solve the wage fixed point and assemble all counterfactual objects.

    Each sweep: shares respond to candidate wages through the
    Dekle-Eaton-Kortum update, expenditure follows the chosen deficit
    convention, and wages move toward market clearing with damping.  Wages
    are rescaled every sweep so nominal world output is unchanged.
    Convergence requires the undamped wage update below ``spec.tol``, which
    makes the world-scaled market-clearing residual at the reported point
    smaller than ``spec.tol`` as well.
    """
    n = baseline.n
    if spec.tau_hat.shape != (n, n):
        raise ValidationError(
            f"tau_hat shape {spec.tau_hat.shape} does not match {n} countries"
        )
    y = baseline.income
    if (y <= 0).any():
        bad = [baseline.countries[i] for i in np.flatnonzero(y <= 0)]
        raise SolverError(
            f"zero income row for exporter(s): {', '.join(bad)}; "
            "wage changes are undefined without baseline sales"
        )
    e = baseline.expenditure
    d = baseline.deficits
    lam = baseline.shares
    world = baseline.world_output
    tau_pow = spec.tau_hat ** (-spec.theta)

    w = np.ones(n)
    damping = spec.damping
    trace = []
    converged = False
    iterations = 0
    prev_diff = np.inf
    kernel = np.empty_like(lam)
    denom = np.empty(n)
    for iterations in range(1, spec.max_iter + 1):
        np.multiply(lam, tau_pow, out=kernel)
        kernel *= (w ** (-spec.theta))[:, None]
        denom = kernel.sum(axis=0)
        if (denom <= 0).any():
            bad = [baseline.countries[j] for j in np.flatnonzero(denom <= 0)]
            raise SolverError(
                f"counterfactual share denominator vanished for importer(s): {', '.join(bad)}",
                residual_trace=trace,
            )
        lam_prime = kernel / denom[None, :]
        if spec.deficit == "multiplicative":
            # Expenditure moves with own income; rescaling world expenditure
            # back to world output keeps aggregate accounts closed (own-scaled
            # deficits no longer net to zero on their own).
            e_prime = e * w
            e_prime *= world / e_prime.sum()
        else:
            e_prime = y * w + d
        target = (lam_prime @ e_prime) / y
        diff = float(np.abs(target - w).max())
        trace.append(diff)
        if diff < spec.tol:
            converged = True
            break
        if diff > prev_diff and iterations > 2:
            damping = max(damping / 2.0, 1.0 / 1024.0)
        prev_diff = diff
        target *= world / float(y @ target)
        w = (1.0 - damping) * w + damping * target
        w *= world / float(y @ w)

    if not converged:
        raise SolverError(
            f"wage fixed point did not converge in {spec.max_iter} iterations "
            f"(last update {trace[-1]:.3e})",
            residual_trace=trace,
        )

    lambda_hat = (w ** (-spec.theta))[:, None] * tau_pow / denom[None, :]
    x_prime = lam_prime * e_prime[None, :]
    pi_hat = denom ** (-1.0 / spec.theta)
    g_hat = np.diag(lambda_hat) ** (-1.0 / spec.theta)
    return CounterfactualResult(
        countries=baseline.countries,
        w_hat=w,
        lambda_hat=lambda_hat,
        lambda_prime=lam_prime,
        expenditure_prime=e_prime,
        X_prime=x_prime,
        Pi_hat=pi_hat,
        G_hat=g_hat,
        iterations=iterations,
        converged=True,
        residual_trace=trace,
    )


def attribute_union_trade(baseline: TradeMatrix, result: CounterfactualResult, members) -> list:
    """Per-country trade attributed to the union, in levels and percent.

    For each country, total international trade (exports plus imports,
    domestic excluded) is compared between baseline and counterfactual;
    the level column is baseline minus counterfactual, and the percent
    column expresses it relative to baseline trade.  Nonmember rows are
    included so diversion effects are visible.
    """
    members = set(members)
    for m in members:
        baseline.index_of(m)
    if tuple(result.countries) != tuple(baseline.countries):
        raise ValidationError("result and baseline country labels differ")
    off = ~np.eye(baseline.n, dtype=bool)
    base_x = baseline.flows
    cf_x = result.X_prime
    rows = []
    for i, country in enumerate(baseline.countries):
        base_total = float(base_x[i][off[i]].sum() + base_x[:, i][off[:, i]].sum())
        cf_total = float(cf_x[i][off[i]].sum() + cf_x[:, i][off[:, i]].sum())
        level = base_total - cf_total
        pct = 100.0 * level / base_total if base_total > 0 else 0.0
        rows.append(
            {
                "country": country,
                "is_member": country in members,
                "baseline_trade": base_total,
                "counterfactual_trade": cf_total,
                "level_change": level,
                "pct_change": pct,
            }
        )
    return rows
