"""JSON Schemas and CSV headers for every file the CLI writes.

These are the documented output contracts; the test suite validates real
CLI output against them so schema drift fails loudly.
"""

from .counterfactual import DEFICIT_CONVENTIONS
from .design import CLUSTER_DIMS

_NUMBER = {"type": "number"}
_STRING = {"type": "string"}
_COUNT = {"type": "integer", "minimum": 0}
_YEAR_PAIR = {
    "type": "array",
    "items": {"type": "integer"},
    "minItems": 2,
    "maxItems": 2,
}
_COUNTRY_MAP = {"type": "object", "additionalProperties": _NUMBER}

COEFFICIENT_SCHEMA = {
    "type": "object",
    "required": [
        "name", "beta", "se", "ci_low", "ci_high",
        "effect_pct", "effect_pct_low", "effect_pct_high",
    ],
    "properties": {
        "name": _STRING,
        "beta": _NUMBER,
        "se": {"type": "number", "minimum": 0},
        "ci_low": _NUMBER,
        "ci_high": _NUMBER,
        "effect_pct": _NUMBER,
        "effect_pct_low": _NUMBER,
        "effect_pct_high": _NUMBER,
    },
    "additionalProperties": False,
}

ESTIMATES_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": [
        "coefficients", "cluster_dim", "n_clusters", "low_rank_clusters",
        "n_obs", "n_retained", "deviance", "iterations",
        "dropped_terms", "dropped_observations", "event_study", "window",
        "kernel_backend",
    ],
    "properties": {
        "coefficients": {"type": "array", "items": COEFFICIENT_SCHEMA, "minItems": 1},
        "cluster_dim": {"enum": list(CLUSTER_DIMS)},
        "n_clusters": _COUNT,
        "low_rank_clusters": {"type": "boolean"},
        "n_obs": _COUNT,
        "n_retained": _COUNT,
        "deviance": {"type": "number", "minimum": 0},
        "iterations": {"type": "integer", "minimum": 1},
        "dropped_terms": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "reason"],
                "properties": {"name": _STRING, "reason": _STRING},
                "additionalProperties": False,
            },
        },
        "dropped_observations": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["reason", "dimension", "groups", "rows"],
                "properties": {
                    "reason": {"enum": ["separated", "singleton"]},
                    "dimension": {"enum": ["exporter_year", "importer_year", "pair"]},
                    "groups": _COUNT,
                    "rows": _COUNT,
                },
                "additionalProperties": False,
            },
        },
        "event_study": {"type": "boolean"},
        "window": _YEAR_PAIR,
        "kernel_backend": {"enum": ["cython", "numpy"]},
    },
    "additionalProperties": False,
}

COMPLETION_SCHEMA = {
    "type": "object",
    "required": ["window", "zero_filled", "interpolated", "extrapolated",
                 "cells_touched", "missing_pairs"],
    "properties": {
        "window": _YEAR_PAIR,
        "zero_filled": _COUNT,
        "interpolated": _COUNT,
        "extrapolated": _COUNT,
        "cells_touched": _COUNT,
        "missing_pairs": {
            "type": "array",
            "items": {"type": "array", "items": _STRING, "minItems": 2, "maxItems": 2},
        },
    },
    "additionalProperties": False,
}

COUNTERFACTUAL_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": [
        "countries", "members", "beta", "theta", "direction", "deficit",
        "w_hat", "G_hat", "Pi_hat", "X_prime", "iterations",
        "final_residual", "window", "completion",
    ],
    "properties": {
        "countries": {"type": "array", "items": _STRING, "minItems": 1},
        "members": {"type": "array", "items": _STRING},
        "beta": _NUMBER,
        "theta": {"type": "number", "exclusiveMinimum": 0},
        "direction": {"enum": ["leave", "join"]},
        "deficit": {"enum": list(DEFICIT_CONVENTIONS)},
        "w_hat": _COUNTRY_MAP,
        "G_hat": _COUNTRY_MAP,
        "Pi_hat": _COUNTRY_MAP,
        "X_prime": {"type": "object", "additionalProperties": _COUNTRY_MAP},
        "iterations": {"type": "integer", "minimum": 1},
        "final_residual": {"type": "number", "minimum": 0},
        "window": _YEAR_PAIR,
        "completion": COMPLETION_SCHEMA,
    },
    "additionalProperties": False,
}

MANIFEST_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["subcommand", "config", "config_hash", "seed", "versions", "timestamp"],
    "properties": {
        "subcommand": {"enum": ["estimate", "simulate", "pipeline", "generate"]},
        "config": {"type": "object"},
        "config_hash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "seed": {"type": "integer"},
        "versions": {
            "type": "object",
            "required": ["python", "numpy", "pandas", "cugravity", "kernel_backend"],
            "properties": {
                "python": _STRING,
                "numpy": _STRING,
                "pandas": _STRING,
                "cugravity": _STRING,
                "kernel_backend": {"enum": ["cython", "numpy"]},
            },
            "additionalProperties": False,
        },
        "timestamp": _STRING,
    },
    "additionalProperties": False,
}

TRUTH_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": [
        "beta", "covariates", "countries", "years", "members",
        "scale", "zero_share_target", "realized_zero_share", "seed",
    ],
    "properties": {
        "beta": _COUNTRY_MAP,
        "covariates": {"type": "array", "items": _STRING},
        "countries": {"type": "array", "items": _STRING},
        "years": {"type": "array", "items": {"type": "integer"}},
        "members": {"type": "array", "items": _STRING},
        "scale": {"type": "number", "exclusiveMinimum": 0},
        "zero_share_target": {"type": ["number", "null"]},
        "realized_zero_share": {"type": "number", "minimum": 0, "maximum": 1},
        "seed": {"type": "integer"},
    },
    "additionalProperties": False,
}

ATTRIBUTION_HEADER = [
    "country", "is_member", "baseline_trade", "counterfactual_trade",
    "level_change", "pct_change",
]
EVENT_STUDY_HEADER = ["year", "beta", "se", "ci_low", "ci_high"]
