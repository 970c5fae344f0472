"""Extraction accuracy against rater-scored gold labels.

Accuracy is binary correctness aggregated over case x rater pairs, one
figure per category plus their average, with percentile-bootstrap
confidence intervals resampled over cases (the natural exchangeable
unit: raters of one case are correlated).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .pipeline import ClinicalFeatureSet
from .schemas import CATEGORY_KEYS


@dataclass(frozen=True)
class ScoreRecord:
    case_id: str
    rater_id: str
    category: str
    gold_code: int
    predicted_correct: bool


@dataclass(frozen=True)
class AccuracyEstimate:
    category: str
    accuracy: float
    ci_lo: float
    ci_hi: float

    def format_percent(self) -> str:
        return (
            f"{100 * self.accuracy:.1f} "
            f"({100 * self.ci_lo:.1f}-{100 * self.ci_hi:.1f})"
        )


@dataclass(frozen=True)
class AccuracyReport:
    per_category: list[AccuracyEstimate]
    average: AccuracyEstimate
    n_cases: int
    n_raters: int


def score_against_gold(
    predicted: list[ClinicalFeatureSet],
    gold: dict[str, dict[str, int]],
    n_raters: int = 1,
) -> list[ScoreRecord]:
    """Exact-match scoring of predictions, replicated per rater.

    Synthetic gold codes are unambiguous, so every simulated rater
    agrees; the record layout still carries rater identity so externally
    scored files with disagreeing raters evaluate identically.
    """
    by_case = {fs.patient_id: fs for fs in predicted}
    records = []
    for case_id in sorted(gold):
        fs = by_case.get(case_id)
        if fs is None:
            raise KeyError(f"no prediction for gold case {case_id!r}")
        for category in CATEGORY_KEYS:
            gold_code = gold[case_id][category]
            correct = fs.codes[category] == gold_code
            for r in range(n_raters):
                records.append(
                    ScoreRecord(
                        case_id=case_id,
                        rater_id=f"rater{r + 1}",
                        category=category,
                        gold_code=gold_code,
                        predicted_correct=correct,
                    )
                )
    return records


def evaluate_accuracy(
    records: list[ScoreRecord],
    n_resamples: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> AccuracyReport:
    if not records:
        raise ValueError("no score records")
    cases = sorted({r.case_id for r in records})
    raters = sorted({r.rater_id for r in records})
    case_idx = {c: i for i, c in enumerate(cases)}

    # correctness[case, category] averaged over raters; every case must
    # cover every category.
    sums = np.zeros((len(cases), len(CATEGORY_KEYS)))
    counts = np.zeros_like(sums)
    cat_idx = {c: j for j, c in enumerate(CATEGORY_KEYS)}
    for r in records:
        if r.category not in cat_idx:
            raise ValueError(f"unknown category {r.category!r}")
        sums[case_idx[r.case_id], cat_idx[r.category]] += r.predicted_correct
        counts[case_idx[r.case_id], cat_idx[r.category]] += 1
    if (counts == 0).any():
        raise ValueError("every case must be scored on every category")
    per_case = sums / counts  # (n_cases, n_categories)

    rng = np.random.default_rng(seed)
    n = len(cases)
    draws = rng.integers(0, n, size=(n_resamples, n))
    resampled = per_case[draws]  # (B, n, k)
    cat_stats = resampled.mean(axis=1)  # (B, k)
    avg_stats = cat_stats.mean(axis=1)  # (B,)

    alpha = (1.0 - level) / 2.0
    q = [100 * alpha, 100 * (1 - alpha)]

    estimates = []
    for j, category in enumerate(CATEGORY_KEYS):
        lo, hi = np.percentile(cat_stats[:, j], q)
        estimates.append(
            AccuracyEstimate(
                category=category,
                accuracy=float(per_case[:, j].mean()),
                ci_lo=float(lo),
                ci_hi=float(hi),
            )
        )
    lo, hi = np.percentile(avg_stats, q)
    average = AccuracyEstimate(
        category="average",
        accuracy=float(per_case.mean(axis=0).mean()),
        ci_lo=float(lo),
        ci_hi=float(hi),
    )
    return AccuracyReport(
        per_category=estimates, average=average,
        n_cases=n, n_raters=len(raters),
    )


# ---------------------------------------------------------------------------
# gold label file I/O

GOLD_HEADER = ["case_id", "rater_id", "category", "gold_code", "predicted_correct"]


def write_score_records(records: list[ScoreRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t")
        writer.writerow(GOLD_HEADER)
        for r in records:
            writer.writerow(
                [r.case_id, r.rater_id, r.category, r.gold_code,
                 int(r.predicted_correct)]
            )


def read_score_records(path) -> list[ScoreRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader)
        if header != GOLD_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in reader:
            out.append(
                ScoreRecord(
                    case_id=row[0], rater_id=row[1], category=row[2],
                    gold_code=int(row[3]), predicted_correct=bool(int(row[4])),
                )
            )
    return out
