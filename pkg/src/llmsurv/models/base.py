"""Shared pieces of the survival models: scaling, baselines, predictions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class StandardScaler:
    """Train-set standardization with a guard for constant columns.

    Columns with zero variance are kept in place but marked inactive;
    they transform to exactly 0 so downstream coefficients for them stay
    at 0 rather than blowing up.
    """

    mean: np.ndarray
    sd: np.ndarray
    active: np.ndarray

    @classmethod
    def fit(cls, values: np.ndarray) -> "StandardScaler":
        mean = values.mean(axis=0)
        sd = values.std(axis=0)
        active = sd > 0
        return cls(mean=mean, sd=sd, active=active)

    def transform(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros_like(values, dtype=float)
        a = self.active
        out[:, a] = (values[:, a] - self.mean[a]) / self.sd[a]
        return out


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function equal to ``start`` before the first knot."""

    times: np.ndarray
    values: np.ndarray
    start: float = 0.0

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.times, t, side="right")
        out = np.where(idx == 0, self.start, self.values[np.maximum(idx - 1, 0)])
        return out


def breslow_baseline(durations, events, log_risks) -> StepFunction:
    """Baseline cumulative hazard given fitted per-patient log risks.

    H0(t) = sum over event times <= t of d_k / sum_{j at risk} exp(g_j).
    """
    durations = np.asarray(durations, dtype=float)
    events = np.asarray(events, dtype=bool)
    g = np.asarray(log_risks, dtype=float)
    order = np.argsort(durations, kind="stable")
    t = durations[order]
    e = events[order]
    expg = np.exp(g[order])
    uniq, first = np.unique(t, return_index=True)
    # Risk-set sums at each distinct time, accumulated from the right.
    seg_exp = np.add.reduceat(expg, first)
    at_risk_exp = np.cumsum(seg_exp[::-1])[::-1]
    d = np.add.reduceat(e.astype(float), first)
    has_event = d > 0
    increments = d[has_event] / at_risk_exp[has_event]
    return StepFunction(
        times=uniq[has_event], values=np.cumsum(increments), start=0.0
    )


@dataclass(frozen=True)
class RiskPrediction:
    """Per-patient prediction: scalar risk plus a survival curve on a grid."""

    patient_id: str
    risk_score: float
    survival: np.ndarray


def as_risk_predictions(patient_ids, risks, surv_matrix) -> list[RiskPrediction]:
    return [
        RiskPrediction(patient_id=pid, risk_score=float(r), survival=s)
        for pid, r, s in zip(patient_ids, risks, surv_matrix)
    ]
