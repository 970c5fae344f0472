"""Survival prediction from structured EHR features plus LLM-structured
clinical text, with a synthetic cohort generator for end-to-end testing."""

__version__ = "0.1.0"

from .cohort import (
    FeatureMatrix,
    Observation,
    PatientRecord,
    SurvivalOutcome,
    apply_exclusion,
    build_feature_matrix,
    split_cohort,
)
from .config import RunConfig, config_hash, load_config
from .errors import LlmsurvError
from .metrics import (
    BootstrapResult,
    CensoringEstimator,
    TimeGrid,
    bootstrap_ci,
    brier_score,
    c_index,
    integrated_brier_score,
    negative_binomial_log_likelihood,
    permutation_importance,
)
from .models import cox_fit, deepsurv_fit, load_model, rsf_fit, save_model
from .screening import kendall_tau_b, screen_features
from .synth import MockChatProvider, SynthConfig, generate_cohort

__all__ = [
    "BootstrapResult",
    "CensoringEstimator",
    "FeatureMatrix",
    "LlmsurvError",
    "MockChatProvider",
    "Observation",
    "PatientRecord",
    "RunConfig",
    "SurvivalOutcome",
    "SynthConfig",
    "TimeGrid",
    "apply_exclusion",
    "bootstrap_ci",
    "brier_score",
    "build_feature_matrix",
    "c_index",
    "config_hash",
    "cox_fit",
    "deepsurv_fit",
    "generate_cohort",
    "integrated_brier_score",
    "kendall_tau_b",
    "load_config",
    "load_model",
    "negative_binomial_log_likelihood",
    "permutation_importance",
    "rsf_fit",
    "save_model",
    "screen_features",
    "split_cohort",
    "__version__",
]
