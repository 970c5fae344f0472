"""Random survival forest with log-rank splitting.

Each tree is grown on a bootstrap resample. At a node, a random subset
of features is inspected; for every candidate threshold the standardized
two-sample log-rank statistic between the children is computed, and the
split with the largest statistic wins. Records with a missing split
value are routed to whichever child maximizes that same statistic, and
the learned direction is stored with the node for prediction time.

Terminal nodes carry the Nelson-Aalen cumulative hazard of their
in-node samples. The ensemble prediction is the average cumulative
hazard across trees; the scalar risk is its sum over a shared grid of
training event times, so higher values mean worse expected survival.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..cohort import FeatureMatrix


@dataclass(frozen=True)
class RsfParams:
    n_trees: int = 200
    mtry: int | None = None  # None: ceil(sqrt(n_features))
    min_node_events: int = 5  # each child of a split must keep this many events
    max_depth: int | None = None
    max_thresholds: int = 32  # above this, candidate cuts come from quantiles
    seed: int = 0


@dataclass
class _Tree:
    feature: np.ndarray
    threshold: np.ndarray
    missing_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_slot: np.ndarray
    leaf_times: list[np.ndarray]
    leaf_chf: list[np.ndarray]
    leaf_risk: np.ndarray


@dataclass
class SurvivalForest:
    feature_names: list[str]
    params: RsfParams
    grid: np.ndarray  # shared event-time grid for risk aggregation
    trees: list[_Tree]

    def _aligned_values(self, matrix: FeatureMatrix) -> np.ndarray:
        if matrix.column_names != self.feature_names:
            matrix = matrix.select_columns(self.feature_names)
        return matrix.values

    def predict_risk(self, matrix: FeatureMatrix) -> np.ndarray:
        """Mean over trees of the terminal cumulative hazard mass."""
        X = self._aligned_values(matrix)
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            slots = _traverse(tree, X)
            total += tree.leaf_risk[slots]
        return total / len(self.trees)

    def predict_chf(self, matrix: FeatureMatrix, times) -> np.ndarray:
        """Ensemble cumulative hazard evaluated at ``times``; (n, m)."""
        X = self._aligned_values(matrix)
        times = np.asarray(times, dtype=float)
        total = np.zeros((X.shape[0], times.size))
        for tree in self.trees:
            slots = _traverse(tree, X)
            for slot in np.unique(slots):
                curve = _step_eval(tree.leaf_times[slot], tree.leaf_chf[slot], times)
                total[slots == slot] += curve
        return total / len(self.trees)

    def predict_survival(self, matrix: FeatureMatrix, times) -> np.ndarray:
        return np.exp(-self.predict_chf(matrix, times))


def rsf_fit(matrix: FeatureMatrix, durations, events, params: RsfParams) -> SurvivalForest:
    """Grow the forest; fully deterministic for a given seed.

    Trees are independent given their spawned seeds, so the build order
    (or any parallel schedule) cannot change the result.
    """
    durations = np.asarray(durations, dtype=float)
    events = np.asarray(events, dtype=bool)
    if not events.any():
        raise ValueError("no events in the training data")
    X = matrix.values
    n, p = X.shape
    mtry = params.mtry if params.mtry is not None else math.ceil(math.sqrt(p))
    mtry = min(max(mtry, 1), p)
    grid = np.unique(durations[events])
    seeds = np.random.SeedSequence(params.seed).spawn(params.n_trees)
    trees = [
        _grow_tree(np.random.default_rng(s), X, durations, events, params, mtry, grid)
        for s in seeds
    ]
    return SurvivalForest(
        feature_names=matrix.column_names, params=params, grid=grid, trees=trees
    )


# ---------------------------------------------------------------------------
# tree growth

def _grow_tree(rng, X, t, e, params: RsfParams, mtry: int, grid: np.ndarray) -> _Tree:
    n, p = X.shape
    boot = rng.integers(0, n, size=n)

    feature: list[int] = []
    threshold: list[float] = []
    missing_left: list[bool] = []
    left: list[int] = []
    right: list[int] = []
    leaf_slot: list[int] = []
    leaf_times: list[np.ndarray] = []
    leaf_chf: list[np.ndarray] = []
    leaf_risk: list[float] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(np.nan)
        missing_left.append(False)
        left.append(-1)
        right.append(-1)
        leaf_slot.append(-1)
        return len(feature) - 1

    stack = [(boot, 0, new_node())]
    while stack:
        idx, depth, nid = stack.pop()
        tn = t[idx]
        en = e[idx].astype(float)
        u, inv = np.unique(tn, return_inverse=True)
        counts = np.bincount(inv, minlength=u.size).astype(float)
        ev_counts = np.bincount(inv, weights=en, minlength=u.size)
        at_risk = np.cumsum(counts[::-1])[::-1]

        split = None
        depth_ok = params.max_depth is None or depth < params.max_depth
        if depth_ok and en.sum() >= 2 * params.min_node_events and u.size >= 2:
            feats = np.sort(rng.choice(p, size=mtry, replace=False))
            split = _find_split(
                X[idx], inv, u.size, en, ev_counts, at_risk, feats, params
            )

        if split is None:
            has = ev_counts > 0
            lt = u[has]
            chf = np.cumsum(ev_counts[has] / at_risk[has])
            slot = len(leaf_times)
            leaf_times.append(lt)
            leaf_chf.append(chf)
            leaf_risk.append(float(_step_eval(lt, chf, grid).sum()))
            leaf_slot[nid] = slot
            continue

        f, thr, lmask = split
        feature[nid] = f
        threshold[nid] = thr
        # Files with a missing split value follow the learned direction;
        # when the node saw none, default toward the larger child.
        xcol = X[idx, f]
        miss = np.isnan(xcol)
        if miss.any():
            missing_left[nid] = bool(lmask[miss][0])
        else:
            missing_left[nid] = bool(lmask.sum() >= (~lmask).sum())
        lid, rid = new_node(), new_node()
        left[nid], right[nid] = lid, rid
        stack.append((idx[lmask], depth + 1, lid))
        stack.append((idx[~lmask], depth + 1, rid))

    return _Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=float),
        missing_left=np.asarray(missing_left, dtype=bool),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        leaf_slot=np.asarray(leaf_slot, dtype=np.int32),
        leaf_times=leaf_times,
        leaf_chf=leaf_chf,
        leaf_risk=np.asarray(leaf_risk, dtype=float),
    )


def _find_split(Xn, inv, n_times, en, ev_counts, at_risk, feats, params: RsfParams):
    """Best (feature, threshold, left-mask) by the log-rank statistic.

    For each candidate feature the statistic is evaluated for all
    thresholds at once, and when the feature has missing values both
    routings of the missing group are scored. Splits that would leave a
    child with fewer than ``min_node_events`` events are rejected.
    """
    event_rows = ev_counts > 0
    d = ev_counts[event_rows][:, None]
    Y = at_risk[event_rows][:, None]
    total_events = float(en.sum())
    n_node = Xn.shape[0]

    best = None
    best_score = 0.0
    for f in feats:
        x = Xn[:, f]
        miss = np.isnan(x)
        obs = ~miss
        xo = x[obs]
        if xo.size == 0:
            continue
        cand = np.unique(xo)
        if cand.size > params.max_thresholds:
            qs = np.linspace(0.0, 1.0, params.max_thresholds + 2)[1:-1]
            cand = np.unique(np.quantile(xo, qs, method="lower"))
        K = cand.size
        bucket = np.searchsorted(cand, xo, side="left")
        comb = inv[obs] * (K + 1) + bucket
        cnt2 = (
            np.bincount(comb, minlength=n_times * (K + 1))
            .reshape(n_times, K + 1)
            .cumsum(axis=1)[:, :K]
            .astype(float)
        )
        ev2 = (
            np.bincount(comb, weights=en[obs], minlength=n_times * (K + 1))
            .reshape(n_times, K + 1)
            .cumsum(axis=1)[:, :K]
        )
        if miss.any():
            cnt_m = np.bincount(inv[miss], minlength=n_times).astype(float)[:, None]
            ev_m = np.bincount(inv[miss], weights=en[miss], minlength=n_times)[:, None]
            variants = ((cnt2 + cnt_m, ev2 + ev_m, True), (cnt2, ev2, False))
        else:
            variants = ((cnt2, ev2, False),)

        for cnt_l, ev_l, missing_go_left in variants:
            at_risk_l = np.cumsum(cnt_l[::-1], axis=0)[::-1]
            yl = at_risk_l[event_rows]
            observed = ev_l[event_rows].sum(axis=0)
            frac = yl / Y
            expected = (d * frac).sum(axis=0)
            with np.errstate(divide="ignore", invalid="ignore"):
                var_terms = np.where(
                    Y > 1, d * frac * (1.0 - frac) * (Y - d) / (Y - 1), 0.0
                )
            variance = var_terms.sum(axis=0)
            events_l = ev_l.sum(axis=0)
            events_r = total_events - events_l
            n_l = cnt_l.sum(axis=0)
            valid = (
                (events_l >= params.min_node_events)
                & (events_r >= params.min_node_events)
                & (n_l >= 1)
                & (n_node - n_l >= 1)
                & (variance > 0)
            )
            if not valid.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                score = np.where(
                    valid, np.abs(observed - expected) / np.sqrt(variance), -np.inf
                )
            k = int(np.argmax(score))
            if score[k] > best_score:
                best_score = float(score[k])
                lmask = np.zeros(n_node, dtype=bool)
                lmask[obs] = bucket <= k
                if missing_go_left:
                    lmask[miss] = True
                best = (int(f), float(cand[k]), lmask)
    return best


# ---------------------------------------------------------------------------
# prediction helpers

def _traverse(tree: _Tree, X: np.ndarray) -> np.ndarray:
    """Vectorized routing of every row to its terminal node slot."""
    cur = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        f = tree.feature[cur]
        act = np.flatnonzero(f >= 0)
        if act.size == 0:
            break
        nodes = cur[act]
        x = X[act, f[act]]
        go_left = np.where(np.isnan(x), tree.missing_left[nodes], x <= tree.threshold[nodes])
        cur[act] = np.where(go_left, tree.left[nodes], tree.right[nodes])
    return tree.leaf_slot[cur]


def _step_eval(times: np.ndarray, values: np.ndarray, at: np.ndarray) -> np.ndarray:
    """Right-continuous step evaluation with 0 before the first knot."""
    if times.size == 0:
        return np.zeros(np.asarray(at).size)
    idx = np.searchsorted(times, at, side="right")
    out = np.where(idx == 0, 0.0, values[np.maximum(idx - 1, 0)])
    return out
