"""Feature screening against early mortality.

Each candidate feature is correlated with the 30-day mortality label
using Kendall's tau-b; features whose absolute correlation reaches the
selection threshold are kept for modelling. Screening is run on the
training split only so the held-out set never influences selection.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import kendalltau

from .cohort import FeatureMatrix, SurvivalOutcome
from .errors import DegenerateInputError

#: Day-30 deaths are counted as early mortality (boundary inclusive).
EARLY_MORTALITY_DAYS = 30

#: Default absolute-correlation cut for keeping a feature (inclusive).
DEFAULT_TAU_THRESHOLD = 0.1


@dataclass(frozen=True)
class ScreeningResult:
    feature_name: str
    tau: float
    p_value: float
    selected: bool


def derive_30dm(outcome: SurvivalOutcome) -> bool:
    """True when death occurred within 30 days of starting treatment."""
    return bool(outcome.event and outcome.duration_days <= EARLY_MORTALITY_DAYS)


def kendall_tau_b(x, y) -> tuple[float, float]:
    """Tie-corrected Kendall rank correlation with an asymptotic p-value.

    Pairs where either side is missing (NaN) are dropped. Fewer than two
    complete pairs, or zero variance on either side, leave the statistic
    undefined and raise DegenerateInputError.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-d arrays of equal length")
    keep = ~(np.isnan(x) | np.isnan(y))
    x, y = x[keep], y[keep]
    if x.size < 2 or np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateInputError("degenerate input")
    if x.size == 2:
        # scipy's asymptotic variance needs n > 2. With two complete
        # pairs both orderings give |tau| = 1, so the two-sided p is 1.
        tau = 1.0 if (x[1] - x[0]) * (y[1] - y[0]) > 0 else -1.0
        return tau, 1.0
    tau, p = kendalltau(x, y, variant="b", method="asymptotic")
    # The normal approximation can underflow for extreme statistics;
    # keep p inside (0, 1].
    p = float(np.clip(p, np.finfo(float).tiny, 1.0))
    return float(tau), p


def screen_features(
    matrix: FeatureMatrix,
    labels: dict[str, bool],
    threshold: float = DEFAULT_TAU_THRESHOLD,
) -> list[ScreeningResult]:
    """Correlate every matrix column with a binary label, sort by |tau|.

    ``labels`` maps patient id to the early-mortality flag; every matrix
    row must be labelled. Columns with a degenerate correlation are
    reported with tau 0 and a warning rather than dropped silently.
    Results come back ordered by descending absolute correlation.
    """
    try:
        y = np.array([labels[p] for p in matrix.patient_ids], dtype=float)
    except KeyError as exc:
        raise KeyError(f"no label for patient {exc.args[0]!r}") from None

    results = []
    for j, col in enumerate(matrix.columns):
        x = matrix.values[:, j]
        try:
            tau, p = kendall_tau_b(x, y)
        except DegenerateInputError:
            warnings.warn(
                f"screening: degenerate input for feature {col.name!r}",
                stacklevel=2,
            )
            results.append(
                ScreeningResult(feature_name=col.name, tau=0.0, p_value=1.0, selected=False)
            )
            continue
        results.append(
            ScreeningResult(
                feature_name=col.name, tau=tau, p_value=p,
                selected=abs(tau) >= threshold,
            )
        )
    results.sort(key=lambda r: (-abs(r.tau), r.feature_name))
    return results


def selected_features(results: list[ScreeningResult]) -> list[str]:
    return [r.feature_name for r in results if r.selected]


def write_screening(results: list[ScreeningResult], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("feature\ttau\tp_value\tselected\n")
        for r in results:
            fh.write(f"{r.feature_name}\t{r.tau!r}\t{r.p_value!r}\t{int(r.selected)}\n")


def read_screening(path) -> list[ScreeningResult]:
    out = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header != ["feature", "tau", "p_value", "selected"]:
            raise ValueError(f"{path}: unexpected screening header")
        for line in fh:
            name, tau, p, sel = line.rstrip("\n").split("\t")
            out.append(
                ScreeningResult(
                    feature_name=name, tau=float(tau), p_value=float(p),
                    selected=bool(int(sel)),
                )
            )
    return out
