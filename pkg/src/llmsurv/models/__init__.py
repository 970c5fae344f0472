"""Survival models sharing one fit/predict surface.

Every model exposes ``predict_risk`` (higher means worse prognosis) and
``predict_survival`` over a time grid, with imputation and scaling baked
into the fitted object so a serialized artifact is self-contained.
"""
from .base import RiskPrediction, StandardScaler, StepFunction, as_risk_predictions, breslow_baseline
from .cox import CoxModel, cox_fit
from .deepsurv import (
    DeepSurvNet,
    DeepSurvParams,
    TrainParams,
    cox_partial_loss,
    deepsurv_fit,
)
from .encoding import encode_feature_sets, llm_columns
from .imputation import ImputationPolicy, fit_imputer, impute
from .rsf import RsfParams, SurvivalForest, rsf_fit
from .serialize import ARTIFACT_FORMAT_VERSION, load_model, save_model

__all__ = [
    "ARTIFACT_FORMAT_VERSION",
    "CoxModel",
    "DeepSurvNet",
    "DeepSurvParams",
    "ImputationPolicy",
    "RiskPrediction",
    "RsfParams",
    "StandardScaler",
    "StepFunction",
    "SurvivalForest",
    "TrainParams",
    "as_risk_predictions",
    "breslow_baseline",
    "cox_fit",
    "cox_partial_loss",
    "deepsurv_fit",
    "encode_feature_sets",
    "fit_imputer",
    "impute",
    "llm_columns",
    "load_model",
    "rsf_fit",
    "save_model",
]
