"""Category schemas for clinical-note structurization.

Seven categorical variables are extracted from free-text records. Each
schema fixes the response key, the closed set of admissible codes, and
the document slots its prompt consumes. Code 9 always means "not
evaluable" and doubles as the fallback when extraction fails.
"""
from __future__ import annotations

from dataclasses import dataclass

NOT_EVALUABLE = 9


@dataclass(frozen=True)
class CategorySchema:
    key: str
    allowed_codes: frozenset[int]
    code_labels: dict[str, str]  # code (as str) -> short label
    prompt_slots: tuple[str, ...]

    def __post_init__(self):
        if NOT_EVALUABLE not in self.allowed_codes:
            raise ValueError(f"{self.key}: code {NOT_EVALUABLE} must be admissible")

    @property
    def ordered_codes(self) -> tuple[int, ...]:
        return tuple(sorted(self.allowed_codes))


def _schema(key, codes, labels, slots) -> CategorySchema:
    return CategorySchema(
        key=key,
        allowed_codes=frozenset(codes),
        code_labels={str(c): l for c, l in zip(codes, labels)},
        prompt_slots=tuple(slots),
    )


SCHEMAS: dict[str, CategorySchema] = {
    s.key: s
    for s in (
        _schema(
            "general_condition",
            (0, 1, 2, 3, 9),
            ("Good condition", "Minor issues", "Moderate issues", "Severe issues",
             "Not evaluable"),
            ("CC", "PI", "Note", "CXR", "abdomen"),
        ),
        _schema(
            "pathology",
            (0, 1, 2, 3, 4, 5, 9),
            ("Epithelial origin", "Mesenchymal origin",
             "Lymphoid and hematologic origin", "Neuroendocrine origin",
             "CNS origin", "Others", "Not evaluable"),
            ("CC", "PI", "Note", "Plan"),
        ),
        _schema(
            "disease_extent",
            (0, 1, 2, 3, 9),
            ("No evidence of disease", "Tiny residual disease",
             "Moderate residual disease", "Extensive metastasis",
             "Not evaluable"),
            ("CC", "PI", "Note", "Plan", "bMRI", "CCT", "APCT", "PET"),
        ),
        _schema(
            "disease_control",
            (0, 1, 2, 3, 9),
            ("Complete response", "Partial response", "Stable disease",
             "Progressive disease", "Not evaluable"),
            ("CC", "PI", "Note", "Plan", "bMRI", "CCT", "APCT", "PET"),
        ),
        _schema(
            "RT_aim",
            (0, 1, 2, 3, 9),
            ("Definitive or postoperative", "Salvage", "Palliative", "Others",
             "Not evaluable"),
            ("CC", "PI", "Note", "Plan"),
        ),
        _schema(
            "re_RT",
            (0, 1, 9),
            ("No", "Yes", "Not evaluable"),
            ("CC", "PI", "Note"),
        ),
        _schema(
            "emergency",
            (0, 1, 2, 3, 9),
            ("Not emergent", "Slightly emergent", "Moderately emergent",
             "Emergent", "Not evaluable"),
            ("CC", "PI", "Note", "Plan"),
        ),
    )
}

CATEGORY_KEYS: tuple[str, ...] = tuple(SCHEMAS)
