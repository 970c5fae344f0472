"""Model comparison machinery shared by the CLI and the test harness.

The bootstrap statistics here are algebraically identical to the plain
metric functions but restated for resampling speed: concordance becomes
a weighted quadratic form over precomputed pair matrices, and the
integrated scores reuse precomputed per-patient loss surfaces. The test
suite pins both restatements to the reference implementations.
"""
from __future__ import annotations

import numpy as np

from .cohort import FeatureMatrix
from .config import (
    FEATURE_SET_STRUCTURED,
    FEATURE_SET_WITH_LLM,
    MODEL_KEYS,
    MetricsSettings,
    RunConfig,
)
from .errors import NoComparablePairsError
from .metrics import (
    SURVIVAL_CLAMP,
    BootstrapResult,
    CensoringEstimator,
    TimeGrid,
    bootstrap_ci,
    c_index,
    concordance_matrices,
    permutation_importance,
)
from .models import (
    DeepSurvParams,
    RsfParams,
    TrainParams,
    cox_fit,
    deepsurv_fit,
    rsf_fit,
)

METRIC_KEYS = ("c_index", "ibs", "nbll")

#: Fixed per-metric offsets from the metrics seed, so all models share
#: resample indices (paired comparisons) while metrics stay independent.
_METRIC_SEED_OFFSET = {"c_index": 0, "ibs": 1, "nbll": 2}


def design_matrix(
    base: FeatureMatrix,
    selected: list[str],
    feature_set: str,
    llm: FeatureMatrix | None = None,
) -> FeatureMatrix:
    """Model input for one feature-set arm.

    ``structured`` keeps the screened structured columns;
    ``structured+llm`` appends the encoded category columns, which skip
    screening by design (they exist because they are prognostic).
    """
    matrix = base.select_columns(selected)
    if feature_set == FEATURE_SET_STRUCTURED:
        return matrix
    if feature_set == FEATURE_SET_WITH_LLM:
        if llm is None:
            raise ValueError("structured+llm requires the encoded category matrix")
        return matrix.concat_columns(llm)
    raise ValueError(f"unknown feature set {feature_set!r}")


def fit_model(kind: str, matrix: FeatureMatrix, durations, events, cfg: RunConfig):
    if kind == "cox":
        return cox_fit(
            matrix, durations, events, ties=cfg.cox.ties, ridge=cfg.cox.ridge
        )
    if kind == "rsf":
        params = RsfParams(
            n_trees=cfg.rsf.n_trees,
            mtry=cfg.rsf.mtry,
            min_node_events=cfg.rsf.min_node_events,
            max_depth=cfg.rsf.max_depth,
            max_thresholds=cfg.rsf.max_thresholds,
            seed=cfg.rsf.seed,
        )
        return rsf_fit(matrix, durations, events, params)
    if kind == "deepsurv":
        arch = DeepSurvParams(
            hidden=tuple(cfg.deepsurv.hidden), dropout=cfg.deepsurv.dropout
        )
        train = TrainParams(
            learning_rate=cfg.deepsurv.learning_rate,
            max_epochs=cfg.deepsurv.max_epochs,
            patience=cfg.deepsurv.patience,
            val_fraction=cfg.deepsurv.val_fraction,
            seed=cfg.deepsurv.seed,
        )
        return deepsurv_fit(matrix, durations, events, arch=arch, train=train)
    raise ValueError(f"unknown model kind {kind!r}, expected one of {MODEL_KEYS}")


# ---------------------------------------------------------------------------
# resample statistics
#
# Each factory returns a function of an index array (a patient resample)
# suitable for bootstrap_ci over np.arange(n).

def make_c_statistic(risks, durations, events):
    score, comp = concordance_matrices(risks, durations, events)
    n = score.shape[0]

    def statistic(idx: np.ndarray) -> float:
        w = np.bincount(idx, minlength=n).astype(float)
        den = w @ (comp @ w)
        if den == 0:
            raise NoComparablePairsError("no comparable pairs in resample")
        return float(w @ (score @ w) / den)

    return statistic


def _integrated_statistic(surv_matrix, durations, events, grid, kind: str):
    surv = np.asarray(surv_matrix, dtype=float)
    durations = np.asarray(durations, dtype=float)
    events = np.asarray(events, dtype=bool)
    t = grid.times
    died = (durations[:, None] <= t[None, :]) & events[:, None]
    alive = durations[:, None] > t[None, :]
    if kind == "ibs":
        loss_died = surv**2
        loss_alive = (1.0 - surv) ** 2
        sign = 1.0
    else:
        clamped = np.clip(surv, SURVIVAL_CLAMP, 1.0 - SURVIVAL_CLAMP)
        loss_died = np.log1p(-clamped)
        loss_alive = np.log(clamped)
        sign = -1.0
    pad = np.concatenate([[0.0], t])

    def statistic(idx: np.ndarray) -> float:
        d, e = durations[idx], events[idx]
        censoring = CensoringEstimator(d, e)
        g_event = censoring.survival_before(d)
        w_event = np.where(g_event > 0, 1.0 / np.where(g_event > 0, g_event, 1.0), 0.0)
        g_grid = censoring.survival_at(t)
        w_alive = np.where(g_grid > 0, 1.0 / np.where(g_grid > 0, g_grid, 1.0), 0.0)
        terms = (
            died[idx] * (w_event[:, None] * loss_died[idx])
            + alive[idx] * (loss_alive[idx] * w_alive[None, :])
        )
        curve = terms.mean(axis=0)
        # At t = 0 every prediction is S = 1. For the squared loss the
        # alive side vanishes; for the log loss the clamp leaves a small
        # alive-side contribution log(1 - clamp) that must be kept.
        died0 = (d <= 0.0) & e
        g0 = censoring.survival_before(d[died0])
        w0 = np.where(g0 > 0, 1.0 / np.where(g0 > 0, g0, 1.0), 0.0)
        if kind == "ibs":
            at_zero = float(np.sum(w0 * 1.0) / d.size)
        else:
            g0_at = float(censoring.survival_at(np.array([0.0]))[0])
            w0_alive = 1.0 / g0_at if g0_at > 0 else 0.0
            clamp_hi = 1.0 - SURVIVAL_CLAMP
            at_zero = float(
                (
                    np.sum(w0 * np.log1p(-clamp_hi))
                    + np.sum((d > 0.0) * w0_alive * np.log(clamp_hi))
                )
                / d.size
            )
        value = np.trapezoid(np.concatenate([[at_zero], curve]), pad) / grid.horizon
        return float(sign * value)

    return statistic


def make_ibs_statistic(surv_matrix, durations, events, grid: TimeGrid):
    return _integrated_statistic(surv_matrix, durations, events, grid, "ibs")


def make_nbll_statistic(surv_matrix, durations, events, grid: TimeGrid):
    return _integrated_statistic(surv_matrix, durations, events, grid, "nbll")


def evaluate_model(
    model,
    matrix: FeatureMatrix,
    durations,
    events,
    grid: TimeGrid,
    settings: MetricsSettings,
) -> dict[str, BootstrapResult]:
    """Held-out metrics with percentile bootstrap CIs over patients."""
    durations = np.asarray(durations, dtype=float)
    events = np.asarray(events, dtype=bool)
    risks = model.predict_risk(matrix)
    surv = model.predict_survival(matrix, grid.times)
    statistics = {
        "c_index": make_c_statistic(risks, durations, events),
        "ibs": make_ibs_statistic(surv, durations, events, grid),
        "nbll": make_nbll_statistic(surv, durations, events, grid),
    }
    sample = np.arange(durations.size)
    out = {}
    for key, statistic in statistics.items():
        out[key] = bootstrap_ci(
            statistic,
            sample,
            n_resamples=settings.n_resamples,
            level=settings.level,
            seed=settings.seed + _METRIC_SEED_OFFSET[key],
        )
    return out


def run_importance(
    model, matrix: FeatureMatrix, durations, events, repeats: int, seed: int
) -> dict[str, np.ndarray]:
    return permutation_importance(
        model.predict_risk, matrix, durations, events, repeats=repeats, seed=seed
    )


def baseline_c_index(model, matrix: FeatureMatrix, durations, events) -> float:
    return c_index(model.predict_risk(matrix), durations, events)
