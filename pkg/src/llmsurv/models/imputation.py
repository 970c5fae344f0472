"""Train-split imputation: means for graded values, modes for labels.

The policy is fitted on training rows only and then applied unchanged to
any split, so held-out statistics never leak into the fill values.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..cohort import FeatureMatrix

#: Column kinds filled with the training mean; the rest use the mode.
MEAN_KINDS = ("continuous", "ordinal")


@dataclass
class ImputationPolicy:
    column_names: list[str]
    fill_values: np.ndarray
    dropped_columns: list[str]


def fit_imputer(matrix: FeatureMatrix) -> ImputationPolicy:
    """Learn per-column fill values from observed training cells.

    Continuous and ordinal columns are filled with the mean, nominal and
    binary columns with the mode (ties broken toward the smallest
    value). A column with no observed value at all cannot be imputed and
    is scheduled for removal, with a warning.
    """
    kept_names: list[str] = []
    fills: list[float] = []
    dropped: list[str] = []
    for j, col in enumerate(matrix.columns):
        observed = matrix.values[~matrix.mask[:, j], j]
        if observed.size == 0:
            dropped.append(col.name)
            continue
        if col.kind in MEAN_KINDS:
            fills.append(float(observed.mean()))
        else:
            values, counts = np.unique(observed, return_counts=True)
            fills.append(float(values[np.argmax(counts)]))
        kept_names.append(col.name)
    if dropped:
        warnings.warn(
            f"imputation: dropping all-missing columns {dropped}", stacklevel=2
        )
    return ImputationPolicy(
        column_names=kept_names,
        fill_values=np.asarray(fills, dtype=float),
        dropped_columns=dropped,
    )


def impute(policy: ImputationPolicy, matrix: FeatureMatrix) -> FeatureMatrix:
    """Apply a fitted policy; the result has no missing cells.

    Observed values pass through unchanged; columns the policy dropped
    are removed from the output.
    """
    sub = matrix.select_columns(policy.column_names)
    values = sub.values.copy()
    for j in range(sub.n_features):
        miss = sub.mask[:, j]
        values[miss, j] = policy.fill_values[j]
    return FeatureMatrix(
        patient_ids=list(sub.patient_ids),
        columns=list(sub.columns),
        values=values,
        mask=np.zeros_like(sub.mask),
    )
