"""Free-text record structurization: prompts, parsing, batch pipeline."""
from .accuracy import (
    AccuracyEstimate,
    AccuracyReport,
    ScoreRecord,
    evaluate_accuracy,
    read_score_records,
    score_against_gold,
    write_score_records,
)
from .parsing import (
    PARSE_FALLBACK,
    PARSE_STRICT,
    PARSE_TOLERANT,
    ParseFailure,
    ParsedCode,
    parse_response,
)
from .pipeline import (
    ClinicalFeatureSet,
    Provenance,
    StructurizePolicy,
    batch_structurize,
    read_feature_sets,
    structurize_patient,
    write_feature_sets,
)
from .prompts import EMPTY_SLOT_TEXT, PromptTemplate, load_templates, render_prompt
from .providers import CompletionProvider, DecodingParams, HttpChatProvider
from .schemas import CATEGORY_KEYS, NOT_EVALUABLE, SCHEMAS, CategorySchema

__all__ = [
    "AccuracyEstimate",
    "AccuracyReport",
    "CATEGORY_KEYS",
    "CategorySchema",
    "ClinicalFeatureSet",
    "CompletionProvider",
    "DecodingParams",
    "EMPTY_SLOT_TEXT",
    "HttpChatProvider",
    "NOT_EVALUABLE",
    "PARSE_FALLBACK",
    "PARSE_STRICT",
    "PARSE_TOLERANT",
    "ParseFailure",
    "ParsedCode",
    "PromptTemplate",
    "Provenance",
    "SCHEMAS",
    "ScoreRecord",
    "StructurizePolicy",
    "batch_structurize",
    "evaluate_accuracy",
    "load_templates",
    "parse_response",
    "read_feature_sets",
    "read_score_records",
    "render_prompt",
    "score_against_gold",
    "structurize_patient",
    "write_feature_sets",
    "write_score_records",
]
