"""Encoding of extracted clinical codes into model-ready columns.

Ordered severity scales enter as single ordinal columns. Nominal
categories (tumor type, treatment aim) are one-hot encoded with a shared
permutation group so importance analysis shuffles them as one unit. The
not-evaluable code maps to missing rather than to a level of its own.
"""
from __future__ import annotations

import numpy as np

from ..cohort import ColumnMeta, FeatureMatrix
from ..structurizer.pipeline import ClinicalFeatureSet
from ..structurizer.schemas import NOT_EVALUABLE, SCHEMAS

#: Categories carried as a single ordinal column (codes are ordered).
ORDINAL_CATEGORIES = (
    "general_condition",
    "disease_extent",
    "disease_control",
    "emergency",
)

#: Nominal categories expanded to one-hot columns.
ONE_HOT_CATEGORIES = ("pathology", "RT_aim")

#: Binary categories carried as a single 0/1 column.
BINARY_CATEGORIES = ("re_RT",)


def llm_columns() -> list[ColumnMeta]:
    cols: list[ColumnMeta] = []
    for key in ORDINAL_CATEGORIES:
        cols.append(ColumnMeta(name=f"llm_{key}", kind="ordinal"))
    for key in ONE_HOT_CATEGORIES:
        group = f"llm_{key}"
        for code in SCHEMAS[key].ordered_codes:
            if code == NOT_EVALUABLE:
                continue
            cols.append(ColumnMeta(name=f"llm_{key}_{code}", kind="binary", group=group))
    for key in BINARY_CATEGORIES:
        cols.append(ColumnMeta(name=f"llm_{key}", kind="binary"))
    return cols


def encode_feature_sets(
    feature_sets: list[ClinicalFeatureSet], patient_ids: list[str]
) -> FeatureMatrix:
    """Code matrix aligned to ``patient_ids``.

    Patients without a feature set (structurization gate failures) get an
    all-missing row, as does any category coded not-evaluable.
    """
    columns = llm_columns()
    by_pid = {fs.patient_id: fs for fs in feature_sets}
    n, p = len(patient_ids), len(columns)
    values = np.full((n, p), np.nan)
    mask = np.ones((n, p), dtype=bool)

    for i, pid in enumerate(patient_ids):
        fs = by_pid.get(pid)
        if fs is None:
            continue
        j = 0
        for key in ORDINAL_CATEGORIES:
            code = fs.codes[key]
            if code != NOT_EVALUABLE:
                values[i, j] = float(code)
                mask[i, j] = False
            j += 1
        for key in ONE_HOT_CATEGORIES:
            code = fs.codes[key]
            levels = [c for c in SCHEMAS[key].ordered_codes if c != NOT_EVALUABLE]
            if code != NOT_EVALUABLE:
                for level in levels:
                    values[i, j] = float(code == level)
                    mask[i, j] = False
                    j += 1
            else:
                j += len(levels)
        for key in BINARY_CATEGORIES:
            code = fs.codes[key]
            if code != NOT_EVALUABLE:
                values[i, j] = float(code)
                mask[i, j] = False
            j += 1
        assert j == p

    return FeatureMatrix(
        patient_ids=list(patient_ids), columns=columns, values=values, mask=mask
    )
