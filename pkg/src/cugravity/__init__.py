"""Structural gravity estimation and currency-union counterfactuals.

The package has two halves: a Poisson pseudo-maximum-likelihood estimator
for bilateral trade panels with exporter-year, importer-year, and
directional-pair fixed effects absorbed by iterated weighted demeaning, and
an exact-hat-algebra general-equilibrium solver that turns an estimated
union coefficient into counterfactual trade flows, welfare changes, and a
per-country attribution of union trade.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .counterfactual import (
    CounterfactualResult,
    CounterfactualSpec,
    TradeMatrix,
    attribute_union_trade,
    build_tau_hat,
    solve_counterfactual,
)
from .dataio import (
    CompletionReport,
    SyntheticTruth,
    build_domestic_flows,
    complete_matrix,
    generate_synthetic,
    read_agreements,
    read_flows,
    read_gdp,
    read_regimes,
    write_flows,
)
from .design import (
    CLUSTER_DIMS,
    DesignSpec,
    FixedEffectIndex,
    build_design,
    index_fixed_effects,
    within_transform,
)
from .errors import (
    CodingError,
    CUGravityError,
    DesignError,
    FitError,
    NonConvergenceError,
    PanelError,
    SolverError,
    ValidationError,
)
from .panel import (
    AGREEMENT_KINDS,
    BASE_COVARIATES,
    LMU_ENTRY_YEARS,
    OPTIONAL_COVARIATES,
    REFERENCE_SAMPLE,
    STANDARDS,
    AgreementTable,
    CodingOptions,
    Panel,
    PanelObservation,
    RegimeTable,
    build_panel,
    code_pair_dummies,
    expand_event_study,
)
from .ppml import (
    EffectEstimate,
    EstimateSet,
    FitOptions,
    cluster_vcov,
    effect_transform,
    find_dropped_rows,
    fit_ppml,
    poisson_deviance,
)

__version__ = "0.1.0"

__all__ = [
    "AGREEMENT_KINDS",
    "AgreementTable",
    "BASE_COVARIATES",
    "CLUSTER_DIMS",
    "CodingError",
    "CodingOptions",
    "CompletionReport",
    "CounterfactualResult",
    "CounterfactualSpec",
    "CUGravityError",
    "DesignError",
    "DesignSpec",
    "EffectEstimate",
    "EstimateSet",
    "FitError",
    "FitOptions",
    "FixedEffectIndex",
    "KERNEL_BACKEND",
    "LMU_ENTRY_YEARS",
    "NonConvergenceError",
    "OPTIONAL_COVARIATES",
    "Panel",
    "PanelError",
    "PanelObservation",
    "REFERENCE_SAMPLE",
    "RegimeTable",
    "STANDARDS",
    "SolverError",
    "SyntheticTruth",
    "TradeMatrix",
    "ValidationError",
    "attribute_union_trade",
    "build_design",
    "build_domestic_flows",
    "build_panel",
    "build_tau_hat",
    "cluster_vcov",
    "code_pair_dummies",
    "complete_matrix",
    "effect_transform",
    "expand_event_study",
    "find_dropped_rows",
    "fit_ppml",
    "generate_synthetic",
    "index_fixed_effects",
    "poisson_deviance",
    "read_agreements",
    "read_flows",
    "read_gdp",
    "read_regimes",
    "solve_counterfactual",
    "within_transform",
    "write_flows",
]
