"""Feed-forward network trained on the Cox partial likelihood.

The network maps standardized features to a scalar log-risk; the
training objective is the full-batch negative log partial likelihood
with Breslow tie handling, averaged over events. Gradients are computed
in closed form (they are verified against finite differences in the
test suite), and parameters follow Adam steps with early stopping on a
held-back validation fraction.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..cohort import FeatureMatrix
from ..errors import ConvergenceError
from .base import StandardScaler, StepFunction, breslow_baseline
from .imputation import ImputationPolicy, fit_imputer, impute


@dataclass(frozen=True)
class DeepSurvParams:
    hidden: tuple[int, ...] = (64, 64)
    dropout: float = 0.0


@dataclass(frozen=True)
class TrainParams:
    learning_rate: float = 1e-3
    max_epochs: int = 500
    patience: int = 20
    val_fraction: float = 0.1
    seed: int = 0


# ---------------------------------------------------------------------------
# partial likelihood on raw scores

def cox_partial_loss(scores, durations, events) -> tuple[float, np.ndarray]:
    """Event-averaged negative log partial likelihood and d(loss)/d(score).

    Ties share the full risk set (Breslow). The loss is shift-invariant
    in the scores, so the returned gradient sums to zero.
    """
    g = np.asarray(scores, dtype=float)
    t = np.asarray(durations, dtype=float)
    e = np.asarray(events, dtype=bool)
    if not e.any():
        raise ValueError("partial likelihood undefined without events")
    order = np.argsort(t, kind="stable")
    gs, es, ts = g[order], e[order], t[order]
    uniq, first, inv = np.unique(ts, return_index=True, return_inverse=True)

    m = gs.max()
    z = np.exp(gs - m)
    suffix = np.cumsum(z[::-1])[::-1]  # sum of z over the risk set of each row
    group_risk = suffix[first]  # risk-set sums at distinct times
    d = np.add.reduceat(es.astype(float), first)
    n_events = d.sum()

    log_risk = m + np.log(group_risk)
    loss = -(gs[es].sum() - (d * log_risk).sum()) / n_events

    # dloss/dg_j = (-e_j + exp(g_j) * sum_{t_k <= t_j} d_k / risk_k) / n_events
    cum_w = np.cumsum(d / group_risk)
    grad_sorted = (-es.astype(float) + z * cum_w[inv]) / n_events
    grad = np.empty_like(grad_sorted)
    grad[order] = grad_sorted
    return float(loss), grad


# ---------------------------------------------------------------------------
# network

def init_network(rng: np.random.Generator, n_features: int, hidden) -> list:
    """He-initialized weights for layers (n_features, *hidden, 1)."""
    sizes = [n_features, *hidden, 1]
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        params.append((w, np.zeros(fan_out)))
    return params


def forward_scores(params, X, dropout_masks=None) -> np.ndarray:
    a = X
    last = len(params) - 1
    for i, (w, b) in enumerate(params):
        z = a @ w + b
        if i < last:
            a = np.maximum(z, 0.0)
            if dropout_masks is not None:
                a = a * dropout_masks[i]
        else:
            a = z
    return a[:, 0]


def loss_and_gradients(params, X, durations, events, dropout_masks=None):
    """Partial-likelihood loss and its gradient for every weight and bias.

    Gradients mirror the structure of ``params``: a list of (dW, db).
    """
    activations = [X]
    pre = []
    a = X
    last = len(params) - 1
    for i, (w, b) in enumerate(params):
        z = a @ w + b
        pre.append(z)
        if i < last:
            a = np.maximum(z, 0.0)
            if dropout_masks is not None:
                a = a * dropout_masks[i]
        else:
            a = z
        activations.append(a)

    scores = activations[-1][:, 0]
    loss, dscores = cox_partial_loss(scores, durations, events)

    grads = [None] * len(params)
    delta = dscores[:, None]
    for i in range(last, -1, -1):
        w, _ = params[i]
        a_prev = activations[i]
        grads[i] = (a_prev.T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = delta @ w.T
            if dropout_masks is not None:
                delta = delta * dropout_masks[i - 1]
            delta = delta * (pre[i - 1] > 0.0)
    return loss, grads


# ---------------------------------------------------------------------------
# fitting

@dataclass
class DeepSurvNet:
    feature_names: list[str]
    arch: DeepSurvParams
    train_params: TrainParams
    weights: list
    scaler: StandardScaler
    imputer: ImputationPolicy
    baseline: StepFunction
    score_shift: float
    loss_trace: list[tuple[float, float]]
    best_epoch: int

    def _standardized(self, matrix: FeatureMatrix) -> np.ndarray:
        filled = impute(self.imputer, matrix)
        if filled.column_names != self.feature_names:
            raise ValueError("matrix columns do not match the fitted model")
        return self.scaler.transform(filled.values)

    def predict_risk(self, matrix: FeatureMatrix) -> np.ndarray:
        """Network score centered on the training mean; higher is worse."""
        return forward_scores(self.weights, self._standardized(matrix)) - self.score_shift

    def predict_survival(self, matrix: FeatureMatrix, times) -> np.ndarray:
        risk = self.predict_risk(matrix)
        h0 = self.baseline(times)
        return np.exp(-np.outer(np.exp(risk), h0))


def deepsurv_fit(
    matrix: FeatureMatrix,
    durations,
    events,
    arch: DeepSurvParams = DeepSurvParams(),
    train: TrainParams = TrainParams(),
) -> DeepSurvNet:
    durations = np.asarray(durations, dtype=float)
    events = np.asarray(events, dtype=bool)
    if not events.any():
        raise ValueError("no events in the training data")

    imputer = fit_imputer(matrix)
    filled = impute(imputer, matrix)
    scaler = StandardScaler.fit(filled.values)
    X = scaler.transform(filled.values)
    n = X.shape[0]

    rng = np.random.default_rng(train.seed)
    params = init_network(rng, X.shape[1], arch.hidden)

    # Hold back a validation slice for early stopping; fall back to a
    # fixed-epoch fit when the slice cannot contain an event.
    n_val = int(round(train.val_fraction * n))
    perm = rng.permutation(n)
    val_idx, fit_idx = perm[:n_val], perm[n_val:]
    use_val = events[val_idx].any() and events[fit_idx].any()
    if not use_val:
        if n_val > 0:
            warnings.warn(
                "validation slice has no events; early stopping disabled",
                stacklevel=2,
            )
        fit_idx = np.arange(n)
    Xf, tf, ef = X[fit_idx], durations[fit_idx], events[fit_idx]
    if use_val:
        Xv, tv, ev = X[val_idx], durations[val_idx], events[val_idx]

    # Adam state
    lr, b1, b2, eps = train.learning_rate, 0.9, 0.999, 1e-8
    m_state = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
    v_state = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]

    best_val = np.inf
    best_params = [(w.copy(), b.copy()) for w, b in params]
    best_epoch = 0
    wait = 0
    trace: list[tuple[float, float]] = []

    for epoch in range(1, train.max_epochs + 1):
        masks = None
        if arch.dropout > 0.0:
            keep = 1.0 - arch.dropout
            masks = [
                (rng.random((Xf.shape[0], h)) < keep) / keep for h in arch.hidden
            ]
        loss, grads = loss_and_gradients(params, Xf, tf, ef, masks)
        if not np.isfinite(loss):
            raise ConvergenceError(
                f"training loss diverged at epoch {epoch}", [x[0] for x in trace]
            )
        new_params = []
        for i, ((w, b), (gw, gb)) in enumerate(zip(params, grads)):
            mw, mb = m_state[i]
            vw, vb = v_state[i]
            mw = b1 * mw + (1 - b1) * gw
            mb = b1 * mb + (1 - b1) * gb
            vw = b2 * vw + (1 - b2) * gw**2
            vb = b2 * vb + (1 - b2) * gb**2
            m_state[i] = (mw, mb)
            v_state[i] = (vw, vb)
            corr1 = 1 - b1**epoch
            corr2 = 1 - b2**epoch
            w = w - lr * (mw / corr1) / (np.sqrt(vw / corr2) + eps)
            b = b - lr * (mb / corr1) / (np.sqrt(vb / corr2) + eps)
            new_params.append((w, b))
        params = new_params

        if use_val:
            val_loss, _ = cox_partial_loss(forward_scores(params, Xv), tv, ev)
        else:
            val_loss = loss
        trace.append((float(loss), float(val_loss)))
        if use_val:
            if val_loss < best_val:
                best_val = val_loss
                best_params = [(w.copy(), b.copy()) for w, b in params]
                best_epoch = epoch
                wait = 0
            else:
                wait += 1
                if wait >= train.patience:
                    break
        else:
            best_params = params
            best_epoch = epoch

    params = best_params
    scores = forward_scores(params, X)
    shift = float(scores.mean())
    baseline = breslow_baseline(durations, events, scores - shift)
    return DeepSurvNet(
        feature_names=filled.column_names,
        arch=arch,
        train_params=train,
        weights=params,
        scaler=scaler,
        imputer=imputer,
        baseline=baseline,
        score_shift=shift,
        loss_trace=trace,
        best_epoch=best_epoch,
    )
