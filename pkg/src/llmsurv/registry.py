"""Registry of structured EHR features and clinical document slots.

Every feature the pipeline knows about is declared here once: its value
kind, the acquisition window (in days relative to the planning visit)
inside which an observation may be attributed to the visit, and an
optional mapping from raw category labels to numeric codes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

# Acquisition windows, days relative to the planning visit (inclusive).
# Anthropometrics and vitals are accepted from 28 days before to 7 days
# after the visit; laboratory panels from 14 days before to 14 days after.
WINDOW_ANTHRO: tuple[int, int] = (-28, 7)
WINDOW_LAB: tuple[int, int] = (-14, 14)

#: The ten free-text document slots attached to a patient record, in the
#: order they appear in structurization prompts.
DOCUMENT_SLOTS: tuple[str, ...] = (
    "CC", "PI", "Note", "Plan", "bMRI", "CCT", "APCT", "PET", "CXR", "abdomen",
)

#: Slots whose text is required before a record may be structurized.
REQUIRED_FOR_STRUCTURIZATION: tuple[str, ...] = ("Note",)


@dataclass(frozen=True)
class FeatureDef:
    """Declaration of one structured feature.

    ``kind`` is one of ``continuous``, ``ordinal``, ``nominal`` or
    ``binary``; it decides imputation (mean vs mode) downstream.
    ``value_map`` translates raw string labels to numeric codes at the
    ingestion boundary.
    """

    name: str
    kind: str
    window: tuple[int, int]
    value_map: dict[str, float] | None = field(default=None)


def _f(name: str, kind: str, window: tuple[int, int], value_map=None) -> FeatureDef:
    return FeatureDef(name=name, kind=kind, window=window, value_map=value_map)


#: The 39 structured features, grouped by acquisition window.
STRUCTURED_FEATURES: tuple[FeatureDef, ...] = (
    # demographics / anthropometrics / vitals
    _f("age", "continuous", WINDOW_ANTHRO),
    _f("sex", "binary", WINDOW_ANTHRO, value_map={"F": 0.0, "M": 1.0}),
    _f("height", "continuous", WINDOW_ANTHRO),
    _f("weight", "continuous", WINDOW_ANTHRO),
    _f("bmi", "continuous", WINDOW_ANTHRO),
    _f("sbp", "continuous", WINDOW_ANTHRO),
    _f("dbp", "continuous", WINDOW_ANTHRO),
    _f("pulse_rate", "continuous", WINDOW_ANTHRO),
    _f("body_temp", "continuous", WINDOW_ANTHRO),
    # complete blood count
    _f("wbc", "continuous", WINDOW_LAB),
    _f("rbc", "continuous", WINDOW_LAB),
    _f("platelet", "continuous", WINDOW_LAB),
    _f("hemoglobin", "continuous", WINDOW_LAB),
    _f("hematocrit", "continuous", WINDOW_LAB),
    _f("anc", "continuous", WINDOW_LAB),
    _f("alc", "continuous", WINDOW_LAB),
    _f("nlr", "continuous", WINDOW_LAB),
    _f("amc", "continuous", WINDOW_LAB),
    _f("aec", "continuous", WINDOW_LAB),
    _f("abc", "continuous", WINDOW_LAB),
    # chemistry / coagulation
    _f("calcium", "continuous", WINDOW_LAB),
    _f("phosphate", "continuous", WINDOW_LAB),
    _f("glucose", "continuous", WINDOW_LAB),
    _f("bun", "continuous", WINDOW_LAB),
    _f("creatinine", "continuous", WINDOW_LAB),
    _f("uric_acid", "continuous", WINDOW_LAB),
    _f("cholesterol", "continuous", WINDOW_LAB),
    _f("total_protein", "continuous", WINDOW_LAB),
    _f("albumin", "continuous", WINDOW_LAB),
    _f("alp", "continuous", WINDOW_LAB),
    _f("ast", "continuous", WINDOW_LAB),
    _f("alt", "continuous", WINDOW_LAB),
    _f("total_bilirubin", "continuous", WINDOW_LAB),
    _f("ggt", "continuous", WINDOW_LAB),
    _f("sodium", "continuous", WINDOW_LAB),
    _f("potassium", "continuous", WINDOW_LAB),
    _f("chloride", "continuous", WINDOW_LAB),
    _f("pt_inr", "continuous", WINDOW_LAB),
    _f("aptt", "continuous", WINDOW_LAB),
)

FEATURES_BY_NAME: dict[str, FeatureDef] = {f.name: f for f in STRUCTURED_FEATURES}

assert len(STRUCTURED_FEATURES) == 39


def feature_def(name: str) -> FeatureDef:
    """Look up a feature declaration; unknown names are an error."""
    try:
        return FEATURES_BY_NAME[name]
    except KeyError:
        raise KeyError(f"unknown structured feature: {name!r}") from None


def is_document_slot(name: str) -> bool:
    return name in DOCUMENT_SLOTS
