"""Model artifacts: versioned, self-describing JSON.

Floats survive the round trip bitwise because Python's json writer emits
shortest-round-trip decimal forms. NaN never appears in a file; the few
arrays that hold NaN sentinels (tree thresholds at leaves) encode them
as null.
"""
from __future__ import annotations

import json

import numpy as np

from ..errors import ArtifactError
from .base import StandardScaler, StepFunction
from .cox import CoxModel
from .deepsurv import DeepSurvNet, DeepSurvParams, TrainParams
from .imputation import ImputationPolicy
from .rsf import RsfParams, SurvivalForest, _Tree

ARTIFACT_FORMAT_VERSION = 1


def _arr(a) -> list:
    """Array to nested lists, NaN encoded as null."""
    a = np.asarray(a)
    if a.dtype.kind == "f":
        return [None if np.isnan(x) else float(x) for x in a.ravel().tolist()] \
            if a.ndim == 1 else [_arr(row) for row in a]
    return a.tolist()


def _unarr(x, dtype=float) -> np.ndarray:
    if dtype is float:
        def conv(v):
            return np.nan if v is None else v
        if x and isinstance(x[0], list):
            return np.asarray([[conv(v) for v in row] for row in x], dtype=float)
        return np.asarray([conv(v) for v in x], dtype=float)
    return np.asarray(x, dtype=dtype)


def _scaler_to_doc(s: StandardScaler) -> dict:
    return {"mean": _arr(s.mean), "sd": _arr(s.sd), "active": _arr(s.active)}


def _scaler_from_doc(doc: dict) -> StandardScaler:
    return StandardScaler(
        mean=_unarr(doc["mean"]),
        sd=_unarr(doc["sd"]),
        active=_unarr(doc["active"], dtype=bool),
    )


def _imputer_to_doc(p: ImputationPolicy) -> dict:
    return {
        "column_names": list(p.column_names),
        "fill_values": _arr(p.fill_values),
        "dropped_columns": list(p.dropped_columns),
    }


def _imputer_from_doc(doc: dict) -> ImputationPolicy:
    return ImputationPolicy(
        column_names=list(doc["column_names"]),
        fill_values=_unarr(doc["fill_values"]),
        dropped_columns=list(doc["dropped_columns"]),
    )


def _step_to_doc(f: StepFunction) -> dict:
    return {"times": _arr(f.times), "values": _arr(f.values), "start": f.start}


def _step_from_doc(doc: dict) -> StepFunction:
    return StepFunction(
        times=_unarr(doc["times"]), values=_unarr(doc["values"]),
        start=float(doc["start"]),
    )


# ---------------------------------------------------------------------------
# per-model payloads

def _cox_payload(model: CoxModel) -> dict:
    return {
        "feature_names": list(model.feature_names),
        "ties": model.ties,
        "ridge": model.ridge,
        "coefficients": _arr(model.coefficients),
        "scaler": _scaler_to_doc(model.scaler),
        "imputer": _imputer_to_doc(model.imputer),
        "baseline": _step_to_doc(model.baseline),
        "n_iterations": model.n_iterations,
        "objective_trace": [float(x) for x in model.objective_trace],
    }


def _cox_restore(doc: dict) -> CoxModel:
    return CoxModel(
        feature_names=list(doc["feature_names"]),
        ties=doc["ties"],
        ridge=float(doc["ridge"]),
        coefficients=_unarr(doc["coefficients"]),
        scaler=_scaler_from_doc(doc["scaler"]),
        imputer=_imputer_from_doc(doc["imputer"]),
        baseline=_step_from_doc(doc["baseline"]),
        n_iterations=int(doc["n_iterations"]),
        objective_trace=list(doc["objective_trace"]),
    )


def _rsf_payload(model: SurvivalForest) -> dict:
    trees = []
    for tree in model.trees:
        trees.append(
            {
                "feature": _arr(tree.feature),
                "threshold": _arr(tree.threshold),
                "missing_left": _arr(tree.missing_left),
                "left": _arr(tree.left),
                "right": _arr(tree.right),
                "leaf_slot": _arr(tree.leaf_slot),
                "leaf_times": [_arr(x) for x in tree.leaf_times],
                "leaf_chf": [_arr(x) for x in tree.leaf_chf],
                "leaf_risk": _arr(tree.leaf_risk),
            }
        )
    p = model.params
    return {
        "feature_names": list(model.feature_names),
        "params": {
            "n_trees": p.n_trees, "mtry": p.mtry,
            "min_node_events": p.min_node_events, "max_depth": p.max_depth,
            "max_thresholds": p.max_thresholds, "seed": p.seed,
        },
        "grid": _arr(model.grid),
        "trees": trees,
    }


def _rsf_restore(doc: dict) -> SurvivalForest:
    trees = []
    for td in doc["trees"]:
        trees.append(
            _Tree(
                feature=_unarr(td["feature"], dtype=np.int32),
                threshold=_unarr(td["threshold"]),
                missing_left=_unarr(td["missing_left"], dtype=bool),
                left=_unarr(td["left"], dtype=np.int32),
                right=_unarr(td["right"], dtype=np.int32),
                leaf_slot=_unarr(td["leaf_slot"], dtype=np.int32),
                leaf_times=[_unarr(x) for x in td["leaf_times"]],
                leaf_chf=[_unarr(x) for x in td["leaf_chf"]],
                leaf_risk=_unarr(td["leaf_risk"]),
            )
        )
    return SurvivalForest(
        feature_names=list(doc["feature_names"]),
        params=RsfParams(**doc["params"]),
        grid=_unarr(doc["grid"]),
        trees=trees,
    )


def _deepsurv_payload(model: DeepSurvNet) -> dict:
    return {
        "feature_names": list(model.feature_names),
        "arch": {"hidden": list(model.arch.hidden), "dropout": model.arch.dropout},
        "train_params": {
            "learning_rate": model.train_params.learning_rate,
            "max_epochs": model.train_params.max_epochs,
            "patience": model.train_params.patience,
            "val_fraction": model.train_params.val_fraction,
            "seed": model.train_params.seed,
        },
        "weights": [{"w": _arr(w), "b": _arr(b)} for w, b in model.weights],
        "scaler": _scaler_to_doc(model.scaler),
        "imputer": _imputer_to_doc(model.imputer),
        "baseline": _step_to_doc(model.baseline),
        "score_shift": model.score_shift,
        "loss_trace": [[float(a), float(b)] for a, b in model.loss_trace],
        "best_epoch": model.best_epoch,
    }


def _deepsurv_restore(doc: dict) -> DeepSurvNet:
    arch = DeepSurvParams(
        hidden=tuple(doc["arch"]["hidden"]), dropout=float(doc["arch"]["dropout"])
    )
    tp = TrainParams(**doc["train_params"])
    weights = [(_unarr(x["w"]), _unarr(x["b"])) for x in doc["weights"]]
    return DeepSurvNet(
        feature_names=list(doc["feature_names"]),
        arch=arch,
        train_params=tp,
        weights=weights,
        scaler=_scaler_from_doc(doc["scaler"]),
        imputer=_imputer_from_doc(doc["imputer"]),
        baseline=_step_from_doc(doc["baseline"]),
        score_shift=float(doc["score_shift"]),
        loss_trace=[(a, b) for a, b in doc["loss_trace"]],
        best_epoch=int(doc["best_epoch"]),
    )


_SAVERS = {
    CoxModel: ("cox", _cox_payload),
    SurvivalForest: ("rsf", _rsf_payload),
    DeepSurvNet: ("deepsurv", _deepsurv_payload),
}
_LOADERS = {"cox": _cox_restore, "rsf": _rsf_restore, "deepsurv": _deepsurv_restore}


def save_model(model, path) -> None:
    try:
        model_type, payload = _SAVERS[type(model)]
    except KeyError:
        raise ArtifactError(f"cannot serialize {type(model).__name__}") from None
    doc = {
        "format_version": ARTIFACT_FORMAT_VERSION,
        "model_type": model_type,
        "model": payload(model),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, allow_nan=False)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ArtifactError(f"{path}: not a model artifact") from exc
    version = doc.get("format_version")
    if version != ARTIFACT_FORMAT_VERSION:
        raise ArtifactError(
            f"{path}: unsupported artifact version {version!r} "
            f"(expected {ARTIFACT_FORMAT_VERSION})"
        )
    model_type = doc.get("model_type")
    if model_type not in _LOADERS:
        raise ArtifactError(f"{path}: unknown model type {model_type!r}")
    return _LOADERS[model_type](doc["model"])
