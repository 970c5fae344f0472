"""Survival model evaluation: discrimination, calibration, uncertainty.

Conventions used throughout:

* higher risk score = worse expected survival;
* predicted survival curves are right-continuous step or smooth
  functions evaluated on an explicit time grid;
* censoring weights come from the Kaplan-Meier estimator of the
  censoring distribution, with the left limit G(t-) used when weighting
  observed events.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateInputError, NoComparablePairsError

SURVIVAL_CLAMP = 1e-7


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing evaluation times with a record of their rule."""

    times: np.ndarray
    rule: str

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        t = self.times
        if t.ndim != 1 or t.size == 0:
            raise ValueError("time grid must be a non-empty 1-d array")
        if t[0] <= 0 or np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be strictly increasing and positive")

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @classmethod
    def from_observed(
        cls, durations, n_points: int = 100, horizon_quantile: float = 0.9
    ) -> "TimeGrid":
        """Equally spaced grid from 0 (exclusive) to a quantile of follow-up."""
        durations = np.asarray(durations, dtype=float)
        if durations.size == 0:
            raise ValueError("no observed durations")
        horizon = float(np.quantile(durations, horizon_quantile))
        if horizon <= 0:
            raise DegenerateInputError(
                "follow-up quantile is zero; cannot build a time grid"
            )
        times = horizon * np.arange(1, n_points + 1) / n_points
        return cls(
            times=times,
            rule=f"{n_points} points to the {horizon_quantile:g} quantile",
        )


class CensoringEstimator:
    """Kaplan-Meier estimate of the censoring survival function.

    This is the usual product-limit estimator with the roles of events
    and censorings swapped: a censoring is the "event" and deaths only
    shrink the risk set.
    """

    def __init__(self, durations, events):
        durations = np.asarray(durations, dtype=float)
        events = np.asarray(events, dtype=bool)
        if durations.size == 0:
            raise ValueError("no observations")
        order = np.argsort(durations, kind="stable")
        t = durations[order]
        censored = ~events[order]
        # Distinct observed times, censorings and at-risk counts at each.
        uniq, first = np.unique(t, return_index=True)
        n = t.size
        at_risk = n - first
        cens_counts = np.add.reduceat(censored.astype(float), first)
        factors = 1.0 - cens_counts / at_risk
        self._times = uniq
        self._surv = np.cumprod(factors)

    def survival_at(self, times) -> np.ndarray:
        """G(t), right-continuous."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        idx = np.searchsorted(self._times, times, side="right")
        out = np.where(idx == 0, 1.0, self._surv[np.maximum(idx - 1, 0)])
        return out

    def survival_before(self, times) -> np.ndarray:
        """G(t-), the left limit."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        idx = np.searchsorted(self._times, times, side="left")
        out = np.where(idx == 0, 1.0, self._surv[np.maximum(idx - 1, 0)])
        return out


# ---------------------------------------------------------------------------
# concordance

def _comparability(durations: np.ndarray, events: np.ndarray) -> np.ndarray:
    """Ordered-pair comparability matrix; entry (i, j) means i is the
    earlier (or tie-breaking) event against j."""
    t_i = durations[:, None]
    t_j = durations[None, :]
    e_i = events[:, None]
    e_j = events[None, :]
    earlier = (t_i < t_j) & e_i
    tied = (t_i == t_j) & e_i & ~e_j
    return earlier | tied


def c_index(risks, durations, events) -> float:
    """Concordance over comparable pairs, ties in risk scored half.

    A pair is comparable when the earlier time is an observed event, or
    when times are tied and exactly one of the two is an event (the event
    acts as the earlier observation). Tied event times are not
    comparable. Raises when no pair is comparable.
    """
    risks = np.asarray(risks, dtype=float)
    durations = np.asarray(durations, dtype=float)
    events = np.asarray(events, dtype=bool)
    comp = _comparability(durations, events)
    n_comp = comp.sum()
    if n_comp == 0:
        raise NoComparablePairsError("no comparable pairs")
    higher = risks[:, None] > risks[None, :]
    tied_risk = risks[:, None] == risks[None, :]
    score = (comp & higher).sum() + 0.5 * (comp & tied_risk).sum()
    return float(score / n_comp)


def concordance_matrices(risks, durations, events) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise score and comparability matrices for weighted resampling.

    With multiplicity weights w, ``(w @ S @ w) / (w @ M @ w)`` equals the
    concordance of the materialized resample: same-patient pairs are
    never comparable, so the diagonal (always zero) drops out.
    """
    risks = np.asarray(risks, dtype=float)
    comp = _comparability(
        np.asarray(durations, dtype=float), np.asarray(events, dtype=bool)
    )
    score = comp * (
        (risks[:, None] > risks[None, :]) + 0.5 * (risks[:, None] == risks[None, :])
    )
    return score.astype(np.float64), comp.astype(np.float64)


# ---------------------------------------------------------------------------
# Brier score and binomial log-likelihood

def _ipcw_weights(t: float, durations, events, censoring: CensoringEstimator):
    """Per-patient inverse-censoring weights for the two terms at time t.

    Returns (event_term_mask, event_weights, alive_mask, alive_weight,
    n_zero) where weights of terms whose censoring probability is zero
    are set to 0 and counted.
    """
    died_by_t = (durations <= t) & events
    alive_at_t = durations > t
    g_event = censoring.survival_before(durations)
    g_t = float(censoring.survival_at(np.array([t]))[0])
    n_zero = 0
    w_event = np.zeros_like(g_event)
    ok = g_event > 0
    w_event[ok] = 1.0 / g_event[ok]
    n_zero += int(np.sum(died_by_t & ~ok))
    if g_t > 0:
        w_alive = 1.0 / g_t
    else:
        w_alive = 0.0
        n_zero += int(alive_at_t.sum())
    return died_by_t, w_event, alive_at_t, w_alive, n_zero


def brier_score(
    t: float, surv_at_t, durations, events, censoring: CensoringEstimator
) -> float:
    """Censoring-weighted squared error of S(t | x) at one time point."""
    surv_at_t = np.asarray(surv_at_t, dtype=float)
    durations = np.asarray(durations, dtype=float)
    events = np.asarray(events, dtype=bool)
    died, w_event, alive, w_alive, n_zero = _ipcw_weights(
        t, durations, events, censoring
    )
    if n_zero:
        warnings.warn(
            f"brier score at t={t:g}: {n_zero} terms dropped (zero censoring weight)",
            stacklevel=2,
        )
    terms = died * w_event * surv_at_t**2 + alive * w_alive * (1.0 - surv_at_t) ** 2
    return float(terms.mean())


def _bll(t, surv_at_t, durations, events, censoring, eps=SURVIVAL_CLAMP):
    surv = np.clip(np.asarray(surv_at_t, dtype=float), eps, 1.0 - eps)
    died, w_event, alive, w_alive, n_zero = _ipcw_weights(
        t, np.asarray(durations, float), np.asarray(events, bool), censoring
    )
    terms = died * w_event * np.log1p(-surv) + alive * w_alive * np.log(surv)
    return float(terms.mean()), n_zero


def _integrate(grid: TimeGrid, values_at_zero: float, values: np.ndarray) -> float:
    """Time-normalized trapezoid integral over [0, horizon]."""
    times = np.concatenate([[0.0], grid.times])
    curve = np.concatenate([[values_at_zero], values])
    return float(np.trapezoid(curve, times) / grid.horizon)


def integrated_brier_score(
    grid: TimeGrid, surv_matrix, durations, events, censoring: CensoringEstimator
) -> float:
    """Trapezoid average of the Brier score over [0, horizon].

    ``surv_matrix`` is (n_patients, n_times), evaluated on ``grid``.
    """
    surv_matrix = np.asarray(surv_matrix, dtype=float)
    _check_surv_matrix(surv_matrix, grid, durations)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        bs = np.array(
            [
                brier_score(t, surv_matrix[:, k], durations, events, censoring)
                for k, t in enumerate(grid.times)
            ]
        )
        bs0 = brier_score(0.0, np.ones(surv_matrix.shape[0]), durations, events, censoring)
    return _integrate(grid, bs0, bs)


def negative_binomial_log_likelihood(
    grid: TimeGrid, surv_matrix, durations, events, censoring: CensoringEstimator
) -> float:
    """Time-averaged negative censoring-weighted binomial log-likelihood.

    Survival probabilities are clamped away from 0 and 1 before taking
    logs, so a perfect prediction scores -log(1 - clamp) rather than 0.
    """
    surv_matrix = np.asarray(surv_matrix, dtype=float)
    _check_surv_matrix(surv_matrix, grid, durations)
    values = np.empty(grid.times.size)
    n_zero = 0
    for k, t in enumerate(grid.times):
        values[k], nz = _bll(t, surv_matrix[:, k], durations, events, censoring)
        n_zero += nz
    v0, nz = _bll(0.0, np.ones(surv_matrix.shape[0]), durations, events, censoring)
    n_zero += nz
    if n_zero:
        warnings.warn(
            f"log-likelihood: {n_zero} terms dropped (zero censoring weight)",
            stacklevel=2,
        )
    return -_integrate(grid, v0, values)


def _check_surv_matrix(surv_matrix, grid, durations):
    n = np.asarray(durations).shape[0]
    if surv_matrix.shape != (n, grid.times.size):
        raise ValueError(
            f"survival matrix shape {surv_matrix.shape} does not match "
            f"{n} patients x {grid.times.size} grid points"
        )


# ---------------------------------------------------------------------------
# bootstrap

@dataclass(frozen=True)
class BootstrapResult:
    """Percentile bootstrap summary.

    ``point`` is the mean of the resampled statistics; ``plugin`` the
    statistic of the original sample, kept for reference.
    """

    point: float
    ci_lo: float
    ci_hi: float
    plugin: float
    n_resamples: int
    n_redraws: int

    def format(self, digits: int = 3) -> str:
        return (
            f"{self.point:.{digits}f} "
            f"({self.ci_lo:.{digits}f}-{self.ci_hi:.{digits}f})"
        )


def bootstrap_ci(
    statistic: Callable[[np.ndarray], float],
    sample: Sequence,
    n_resamples: int = 1000,
    level: float = 0.95,
    seed: int = 0,
    max_failure_fraction: float = 0.1,
) -> BootstrapResult:
    """Percentile bootstrap of ``statistic`` over patient-level resamples.

    ``sample`` is indexed with replacement; the statistic receives the
    resampled array. Resamples on which the statistic is undefined (for
    instance a concordance resample without comparable pairs) are
    redrawn; more than ``max_failure_fraction`` of failures aborts.
    """
    sample = np.asarray(sample)
    n = sample.shape[0]
    if n == 0:
        raise ValueError("empty sample")
    rng = np.random.default_rng(seed)
    stats = np.empty(n_resamples)
    n_failures = 0
    max_failures = int(np.ceil(max_failure_fraction * n_resamples))
    b = 0
    while b < n_resamples:
        idx = rng.integers(0, n, size=n)
        try:
            stats[b] = statistic(sample[idx])
        except (NoComparablePairsError, DegenerateInputError):
            n_failures += 1
            if n_failures > max_failures:
                raise DegenerateInputError(
                    f"statistic undefined on {n_failures} of "
                    f"{b + n_failures} bootstrap resamples"
                )
            continue
        b += 1
    plugin = float(statistic(sample))
    alpha = (1.0 - level) / 2.0
    lo, hi = np.percentile(stats, [100 * alpha, 100 * (1 - alpha)])
    return BootstrapResult(
        point=float(stats.mean()), ci_lo=float(lo), ci_hi=float(hi),
        plugin=plugin, n_resamples=n_resamples, n_redraws=n_failures,
    )


# ---------------------------------------------------------------------------
# permutation importance

def permutation_importance(
    predict_risk: Callable[[object], np.ndarray],
    matrix,
    durations,
    events,
    repeats: int = 10,
    seed: int = 0,
    groups: dict[str, list[str]] | None = None,
) -> dict[str, np.ndarray]:
    """Drop in concordance when a feature (group) is shuffled on test data.

    One-hot encodings of a single source variable must move together, so
    permutation operates on column groups; by default the groups come
    from the matrix column metadata. Values and missingness flags are
    permuted jointly. Returns ``repeats`` concordance drops per group,
    ``baseline - permuted`` (positive = the model relied on the group).
    """
    durations = np.asarray(durations, dtype=float)
    events = np.asarray(events, dtype=bool)
    baseline = c_index(predict_risk(matrix), durations, events)

    if groups is None:
        groups = {}
        for col in matrix.columns:
            groups.setdefault(col.group_key, []).append(col.name)

    rng = np.random.default_rng(seed)
    n = matrix.n_patients
    out: dict[str, np.ndarray] = {}
    for group_name, names in groups.items():
        cols = [matrix.column_index(c) for c in names]
        deltas = np.empty(repeats)
        for r in range(repeats):
            perm = rng.permutation(n)
            deltas[r] = baseline - _permuted_c_index(
                predict_risk, matrix, durations, events, cols, perm
            )
        out[group_name] = deltas
    return out


def _permuted_c_index(predict_risk, matrix, durations, events, cols, perm):
    """Concordance with the given columns rearranged by ``perm``."""
    import copy

    shuffled = copy.copy(matrix)
    shuffled.values = matrix.values.copy()
    shuffled.mask = matrix.mask.copy()
    shuffled.values[:, cols] = matrix.values[perm][:, cols]
    shuffled.mask[:, cols] = matrix.mask[perm][:, cols]
    return c_index(predict_risk(shuffled), durations, events)
