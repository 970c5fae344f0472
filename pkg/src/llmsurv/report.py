"""Rendering and persistence of the model-comparison results.

Everything here is deterministic given its inputs: fixed row order,
``repr`` floats in delimited files, no timestamps, no absolute paths.
Rendered tables are meant for terminal reading; the TSVs carry the same
numbers losslessly for downstream plotting.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .config import FEATURE_SETS, MODEL_KEYS
from .errors import ArtifactError
from .metrics import BootstrapResult
from .screening import ScreeningResult
from .structurizer import AccuracyReport

PERFORMANCE_HEADER = [
    "model",
    "feature_set",
    "metric",
    "point",
    "ci_lo",
    "ci_hi",
    "plugin",
    "n_resamples",
    "n_redraws",
]
IMPORTANCE_HEADER = ["model", "feature", "repeat", "delta_c"]

METRIC_LABELS = {"c_index": "C-index", "ibs": "IBS", "nbll": "NBLL"}


@dataclass
class EvalReport:
    """All evaluation outputs for one configuration.

    ``performance`` maps model -> feature set -> metric -> bootstrap
    summary; ``importance`` maps feature set -> model -> feature group ->
    per-repeat C-index drops.
    """

    config_hash: str
    n_train: int
    n_test: int
    performance: dict[str, dict[str, dict[str, BootstrapResult]]]
    importance: dict[str, dict[str, dict[str, tuple[float, ...]]]] = field(
        default_factory=dict
    )

    def result(self, model: str, feature_set: str, metric: str) -> BootstrapResult:
        return self.performance[model][feature_set][metric]

    def check_well_formed(self) -> None:
        """Every cell present and every interval ordered around its point."""
        problems = []
        for model in MODEL_KEYS:
            for feature_set in FEATURE_SETS:
                for metric in METRIC_LABELS:
                    try:
                        res = self.result(model, feature_set, metric)
                    except KeyError:
                        problems.append(f"missing {model}/{feature_set}/{metric}")
                        continue
                    if not res.ci_lo <= res.point <= res.ci_hi:
                        problems.append(
                            f"{model}/{feature_set}/{metric}: point {res.point!r} "
                            f"outside ({res.ci_lo!r}, {res.ci_hi!r})"
                        )
        if problems:
            raise ArtifactError("; ".join(problems))


# ---------------------------------------------------------------------------
# delimited output

def write_performance(path: str | Path, report: EvalReport) -> None:
    """Canonical row order; absent arms (partial runs) are skipped."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(PERFORMANCE_HEADER)
        for model in MODEL_KEYS:
            for feature_set in FEATURE_SETS:
                cell = report.performance.get(model, {}).get(feature_set)
                if cell is None:
                    continue
                for metric in METRIC_LABELS:
                    res = cell[metric]
                    writer.writerow(
                        [
                            model,
                            feature_set,
                            metric,
                            repr(res.point),
                            repr(res.ci_lo),
                            repr(res.ci_hi),
                            repr(res.plugin),
                            res.n_resamples,
                            res.n_redraws,
                        ]
                    )


def read_performance(
    path: str | Path,
) -> dict[str, dict[str, dict[str, BootstrapResult]]]:
    out: dict[str, dict[str, dict[str, BootstrapResult]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header != PERFORMANCE_HEADER:
            raise ArtifactError(f"unexpected performance table header: {header}")
        for row in reader:
            model, feature_set, metric = row[0], row[1], row[2]
            res = BootstrapResult(
                point=float(row[3]),
                ci_lo=float(row[4]),
                ci_hi=float(row[5]),
                plugin=float(row[6]),
                n_resamples=int(row[7]),
                n_redraws=int(row[8]),
            )
            out.setdefault(model, {}).setdefault(feature_set, {})[metric] = res
    return out


def write_importance(
    path: str | Path, importance: dict[str, dict[str, tuple[float, ...]]]
) -> None:
    """Long-format box-plot records for one feature set."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(IMPORTANCE_HEADER)
        for model in sorted(importance):
            groups = importance[model]
            for feature in sorted(groups):
                for repeat, delta in enumerate(groups[feature]):
                    writer.writerow([model, feature, repeat, repr(float(delta))])


def read_importance(path: str | Path) -> dict[str, dict[str, tuple[float, ...]]]:
    acc: dict[str, dict[str, list[float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header != IMPORTANCE_HEADER:
            raise ArtifactError(f"unexpected importance table header: {header}")
        for model, feature, _repeat, delta in reader:
            acc.setdefault(model, {}).setdefault(feature, []).append(float(delta))
    return {
        model: {feature: tuple(vals) for feature, vals in groups.items()}
        for model, groups in acc.items()
    }


ACCURACY_HEADER = ["category", "accuracy", "ci_lo", "ci_hi", "n_cases", "n_raters"]


def write_accuracy(path: str | Path, accuracy: AccuracyReport) -> None:
    """Per-category accuracy summary plus an ``average`` row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(ACCURACY_HEADER)
        for est in list(accuracy.per_category) + [accuracy.average]:
            writer.writerow(
                [
                    est.category,
                    repr(est.accuracy),
                    repr(est.ci_lo),
                    repr(est.ci_hi),
                    accuracy.n_cases,
                    accuracy.n_raters,
                ]
            )


# ---------------------------------------------------------------------------
# rendered tables

def _layout(rows: list[list[str]], indent: str = "") -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for row in rows:
        cells = [c.ljust(w) for c, w in zip(row, widths)]
        lines.append((indent + "  ".join(cells)).rstrip())
    return "\n".join(lines)


def render_performance(report: EvalReport) -> str:
    rows = [["model", "features"] + [METRIC_LABELS[m] for m in METRIC_LABELS]]
    for model in MODEL_KEYS:
        for feature_set in FEATURE_SETS:
            cells = [model, feature_set]
            for metric in METRIC_LABELS:
                cells.append(report.result(model, feature_set, metric).format())
            rows.append(cells)
    return _layout(rows)


def render_accuracy(accuracy: AccuracyReport) -> str:
    rows = [["category", "accuracy % (95% CI)"]]
    for est in accuracy.per_category:
        rows.append([est.category, est.format_percent()])
    rows.append(["average", accuracy.average.format_percent()])
    table = _layout(rows)
    raters = "rater" if accuracy.n_raters == 1 else "raters"
    return (
        f"{table}\n"
        f"({accuracy.n_cases} cases x {accuracy.n_raters} {raters}, "
        f"percentile bootstrap over cases)"
    )


def render_screening(results: list[ScreeningResult]) -> str:
    rows = [["feature", "tau", "p", "selected"]]
    for res in results:
        rows.append(
            [
                res.feature_name,
                format(res.tau, "+.4f"),
                format(res.p_value, ".3g"),
                "yes" if res.selected else "no",
            ]
        )
    return _layout(rows)


def render_importance(report: EvalReport) -> str:
    """Mean C-index drop per feature group, largest first."""
    blocks = []
    for feature_set in FEATURE_SETS:
        if feature_set not in report.importance:
            continue
        for model in MODEL_KEYS:
            groups = report.importance[feature_set].get(model)
            if not groups:
                continue
            means = {
                feature: sum(vals) / len(vals) for feature, vals in groups.items()
            }
            ranked = sorted(means.items(), key=lambda kv: (-kv[1], kv[0]))
            rows = [["feature", "mean dC"]]
            for feature, mean in ranked:
                rows.append([feature, format(mean, "+.4f")])
            blocks.append(f"{model} / {feature_set}\n" + _layout(rows, indent="  "))
    return "\n\n".join(blocks)


def render_report(
    report: EvalReport,
    accuracy: AccuracyReport | None = None,
    screening: list[ScreeningResult] | None = None,
) -> str:
    """Full plain-text report; the config hash pins the settings."""
    report.check_well_formed()
    parts = [
        "survival model comparison",
        f"config {report.config_hash}",
        f"train n={report.n_train}  test n={report.n_test}",
        "",
        "performance (held-out, percentile bootstrap 95% CI)",
        render_performance(report),
    ]
    if accuracy is not None:
        parts += ["", "structurization accuracy vs gold labels", render_accuracy(accuracy)]
    if screening is not None:
        parts += ["", "univariable screening (Kendall tau-b vs 30-day mortality)", render_screening(screening)]
    if report.importance:
        parts += ["", "permutation importance (mean C-index drop)", render_importance(report)]
    return "\n".join(parts) + "\n"
