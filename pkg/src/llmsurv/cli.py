"""Command-line pipeline driver.

Each subcommand reads its inputs from the run directory and writes its
outputs there, so stages can be rerun individually. All randomness comes
from the config; rerunning any stage with the same config reproduces its
artifacts byte for byte.

Run-directory layout::

    cohort.jsonl  gold.jsonl  resolved.yaml          (synth)
    exclusions.jsonl  outcomes.csv  split.json
    structured.csv  structured.mask.csv  structured.meta.json   (ingest)
    screening.tsv                                    (screen)
    features_llm.jsonl                               (structurize)
    models/{cox,rsf,deepsurv}_{structured,structured_llm}.json  (train)
    performance.tsv                                  (evaluate)
    importance_structured.tsv  importance_structured_llm.tsv    (importance)
    accuracy.tsv  report.txt                         (report)
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .cohort import (
    apply_exclusion,
    build_feature_matrix,
    outcome_arrays,
    read_cohort,
    read_matrix,
    read_outcomes,
    split_cohort,
    write_cohort,
    write_exclusions,
    write_matrix,
    write_outcomes,
)
from .config import (
    FEATURE_SET_WITH_LLM,
    FEATURE_SETS,
    MODEL_KEYS,
    RunConfig,
    config_hash,
    dump_resolved,
    load_config,
)
from .errors import ArtifactError, LlmsurvError
from .experiment import design_matrix, evaluate_model, fit_model, run_importance
from .metrics import TimeGrid
from .models import encode_feature_sets, load_model, save_model
from .report import (
    EvalReport,
    read_importance,
    read_performance,
    render_report,
    write_accuracy,
    write_importance,
    write_performance,
)
from .screening import (
    derive_30dm,
    read_screening,
    screen_features,
    selected_features,
    write_screening,
)
from .structurizer import (
    HttpChatProvider,
    StructurizePolicy,
    batch_structurize,
    evaluate_accuracy,
    read_feature_sets,
    score_against_gold,
    write_feature_sets,
    write_score_records,
)
from .synth import MockChatProvider, generate_cohort, gold_code_map

SPLIT_FORMAT_VERSION = 1

_FS_TAGS = {"structured": "structured", "structured+llm": "structured_llm"}


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise ArtifactError(f"missing {path.name}; run the {produced_by} stage first")
    return path


def _write_split(path: Path, seed: int, fraction: float, train, test) -> None:
    doc = {
        "format_version": SPLIT_FORMAT_VERSION,
        "seed": seed,
        "test_fraction": fraction,
        "train": list(train),
        "test": list(test),
    }
    path.write_text(json.dumps(doc, indent=1) + "\n")


def _read_split(path: Path) -> dict:
    doc = json.loads(_require(path, "ingest").read_text())
    if doc.get("format_version") != SPLIT_FORMAT_VERSION:
        raise ArtifactError(
            f"split file format version {doc.get('format_version')!r}, "
            f"expected {SPLIT_FORMAT_VERSION}"
        )
    return doc


def _make_provider(args, cfg: RunConfig, out: Path):
    if cfg.provider.kind == "mock":
        gold_path = _require(out / "gold.jsonl", "synth")
        gold = gold_code_map(read_feature_sets(gold_path))
        return MockChatProvider(
            gold, error_rate=cfg.synth.mock_error_rates, seed=cfg.provider.seed
        )
    if cfg.provider.kind == "http":
        return HttpChatProvider(
            endpoint=cfg.provider.endpoint,
            model=cfg.provider.model,
            timeout=cfg.provider.timeout,
        )
    raise ArtifactError(f"unknown provider kind {cfg.provider.kind!r}")


def _feature_set_arms(args) -> tuple[str, ...]:
    if getattr(args, "feature_set", None):
        return (args.feature_set,)
    return FEATURE_SETS


def _design_inputs(out: Path, feature_sets: tuple[str, ...]):
    """Structured matrix, selected columns and (if needed) the encoded
    category matrix, all aligned on the full post-exclusion cohort."""
    matrix = read_matrix(_require(out / "structured.csv", "ingest").with_suffix(""))
    screening = read_screening(_require(out / "screening.tsv", "screen"))
    selected = selected_features(screening)
    llm = None
    if FEATURE_SET_WITH_LLM in feature_sets:
        sets = read_feature_sets(_require(out / "features_llm.jsonl", "structurize"))
        llm = encode_feature_sets(sets, matrix.patient_ids)
    return matrix, selected, llm


# ---------------------------------------------------------------------------
# stages

def cmd_synth(args, cfg: RunConfig, out: Path) -> None:
    records, gold = generate_cohort(cfg.synth)
    write_cohort(records, out / "cohort.jsonl")
    write_feature_sets(gold, out / "gold.jsonl")
    dump_resolved(cfg, out / "resolved.yaml")
    print(f"wrote {len(records)} synthetic patients to {out / 'cohort.jsonl'}")


def cmd_ingest(args, cfg: RunConfig, out: Path) -> None:
    records = read_cohort(_require(out / "cohort.jsonl", "synth"))
    kept, excluded = apply_exclusion(records)
    write_exclusions(excluded, out / "exclusions.jsonl")
    write_outcomes(kept, out / "outcomes.csv")
    matrix = build_feature_matrix(kept)
    write_matrix(matrix, out / "structured")
    train, test = split_cohort(
        [r.patient_id for r in kept], cfg.split.test_fraction, cfg.split.seed
    )
    _write_split(out / "split.json", cfg.split.seed, cfg.split.test_fraction, train, test)
    print(
        f"kept {len(kept)} of {len(records)} patients "
        f"({len(excluded)} exclusion entries); train {len(train)}, test {len(test)}"
    )


def cmd_screen(args, cfg: RunConfig, out: Path) -> None:
    matrix = read_matrix(_require(out / "structured.csv", "ingest").with_suffix(""))
    outcomes = read_outcomes(_require(out / "outcomes.csv", "ingest"))
    split = _read_split(out / "split.json")
    train_matrix = matrix.select_rows(split["train"])
    labels = {pid: derive_30dm(outcomes[pid]) for pid in split["train"]}
    results = screen_features(train_matrix, labels, cfg.screening.tau_threshold)
    write_screening(results, out / "screening.tsv")
    n_sel = sum(r.selected for r in results)
    print(f"selected {n_sel} of {len(results)} features (training split only)")


def cmd_structurize(args, cfg: RunConfig, out: Path) -> None:
    records = read_cohort(_require(out / "cohort.jsonl", "synth"))
    eligible = [r for r in records if r.passes_structurization_gate()]
    provider = _make_provider(args, cfg, out)
    policy = StructurizePolicy(max_attempts=cfg.provider.max_attempts)
    sets = batch_structurize(eligible, provider, cfg.provider.parallelism, policy)
    write_feature_sets(sets, out / "features_llm.jsonl")
    skipped = len(records) - len(eligible)
    print(
        f"structurized {len(eligible)} patients via {provider.name}"
        + (f" ({skipped} ineligible)" if skipped else "")
    )


def cmd_train(args, cfg: RunConfig, out: Path) -> None:
    arms = _feature_set_arms(args)
    matrix, selected, llm = _design_inputs(out, arms)
    outcomes = read_outcomes(out / "outcomes.csv")
    split = _read_split(out / "split.json")
    durations, events = outcome_arrays(outcomes, split["train"])
    (out / "models").mkdir(exist_ok=True)
    for feature_set in arms:
        design = design_matrix(matrix, selected, feature_set, llm)
        design_train = design.select_rows(split["train"])
        for kind in MODEL_KEYS:
            model = fit_model(kind, design_train, durations, events, cfg)
            path = out / "models" / f"{kind}_{_FS_TAGS[feature_set]}.json"
            save_model(model, path)
            print(f"fit {kind} on {feature_set} ({design.n_features} features) -> {path.name}")


def _evaluation_context(args, cfg: RunConfig, out: Path):
    arms = _feature_set_arms(args)
    matrix, selected, llm = _design_inputs(out, arms)
    outcomes = read_outcomes(out / "outcomes.csv")
    split = _read_split(out / "split.json")
    durations, events = outcome_arrays(outcomes, split["test"])
    designs = {}
    for feature_set in arms:
        design = design_matrix(matrix, selected, feature_set, llm)
        designs[feature_set] = design.select_rows(split["test"])
    return arms, designs, durations, events, split


def cmd_evaluate(args, cfg: RunConfig, out: Path) -> None:
    arms, designs, durations, events, split = _evaluation_context(args, cfg, out)
    grid = TimeGrid.from_observed(
        durations,
        n_points=cfg.metrics.grid_points,
        horizon_quantile=cfg.metrics.horizon_quantile,
    )
    performance: dict[str, dict[str, dict]] = {}
    for kind in MODEL_KEYS:
        for feature_set in arms:
            path = _require(
                out / "models" / f"{kind}_{_FS_TAGS[feature_set]}.json", "train"
            )
            model = load_model(path)
            results = evaluate_model(
                model, designs[feature_set], durations, events, grid, cfg.metrics
            )
            performance.setdefault(kind, {})[feature_set] = results
            cell = results["c_index"]
            print(f"{kind:9s} {feature_set:15s} C {cell.format()}")
    report = EvalReport(
        config_hash=config_hash(cfg),
        n_train=len(split["train"]),
        n_test=len(split["test"]),
        performance=performance,
    )
    write_performance(out / "performance.tsv", report)


def cmd_importance(args, cfg: RunConfig, out: Path) -> None:
    arms, designs, durations, events, _split = _evaluation_context(args, cfg, out)
    for feature_set in arms:
        per_model = {}
        for kind in MODEL_KEYS:
            path = _require(
                out / "models" / f"{kind}_{_FS_TAGS[feature_set]}.json", "train"
            )
            model = load_model(path)
            deltas = run_importance(
                model,
                designs[feature_set],
                durations,
                events,
                cfg.importance.repeats,
                cfg.importance.seed,
            )
            per_model[kind] = {g: tuple(map(float, v)) for g, v in deltas.items()}
        target = out / f"importance_{_FS_TAGS[feature_set]}.tsv"
        write_importance(target, per_model)
        print(f"wrote {target.name}")


def cmd_report(args, cfg: RunConfig, out: Path) -> None:
    performance = read_performance(_require(out / "performance.tsv", "evaluate"))
    split = _read_split(out / "split.json")
    report = EvalReport(
        config_hash=config_hash(cfg),
        n_train=len(split["train"]),
        n_test=len(split["test"]),
        performance=performance,
    )
    for feature_set in FEATURE_SETS:
        path = out / f"importance_{_FS_TAGS[feature_set]}.tsv"
        if path.exists():
            report.importance[feature_set] = read_importance(path)
    screening = None
    if (out / "screening.tsv").exists():
        screening = read_screening(out / "screening.tsv")
    accuracy = None
    gold_path = out / "gold.jsonl"
    pred_path = out / "features_llm.jsonl"
    if gold_path.exists() and pred_path.exists():
        gold = gold_code_map(read_feature_sets(gold_path))
        predicted = [
            fs for fs in read_feature_sets(pred_path) if fs.patient_id in gold
        ]
        # Score only the intersection, in case structurize ran on a subset.
        covered = {fs.patient_id for fs in predicted}
        gold = {pid: codes for pid, codes in gold.items() if pid in covered}
        records = score_against_gold(predicted, gold)
        write_score_records(records, out / "accuracy_records.tsv")
        accuracy = evaluate_accuracy(
            records,
            n_resamples=cfg.metrics.n_resamples,
            level=cfg.metrics.level,
            seed=cfg.metrics.seed,
        )
        write_accuracy(out / "accuracy.tsv", accuracy)
    text = render_report(report, accuracy=accuracy, screening=screening)
    (out / "report.txt").write_text(text)
    print(text, end="")


# ---------------------------------------------------------------------------
# argument plumbing

_COMMANDS = {
    "synth": (cmd_synth, "generate a synthetic cohort with gold labels"),
    "ingest": (cmd_ingest, "exclusions, feature matrix, outcomes and split"),
    "screen": (cmd_screen, "univariable feature screening on the training split"),
    "structurize": (cmd_structurize, "extract category codes from clinical notes"),
    "train": (cmd_train, "fit all survival models per feature set"),
    "evaluate": (cmd_evaluate, "held-out metrics with bootstrap CIs"),
    "importance": (cmd_importance, "permutation feature importance"),
    "report": (cmd_report, "render the comparison report"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="llmsurv",
        description="survival modelling with LLM-structured clinical features",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (func, help_text) in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", type=Path, default=None, help="YAML config file")
        p.add_argument("--out", type=Path, default=Path("runs/default"),
                       help="run directory for all artifacts")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed override (reseeds every stage)")
        if name in ("train", "evaluate", "importance"):
            p.add_argument("--feature-set", choices=FEATURE_SETS, default=None,
                           help="restrict to one feature-set arm")
        if name == "structurize":
            p.add_argument("--provider", choices=("mock", "http"), default=None)
            p.add_argument("--endpoint", default=None, help="chat endpoint URL")
            p.add_argument("--model", default=None, help="model name for the endpoint")
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.reseed(args.seed)
    if getattr(args, "provider", None):
        cfg.provider.kind = args.provider
    if getattr(args, "endpoint", None):
        cfg.provider.endpoint = args.endpoint
    if getattr(args, "model", None):
        cfg.provider.model = args.model
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        out: Path = args.out
        out.mkdir(parents=True, exist_ok=True)
        args.func(args, cfg, out)
    except (LlmsurvError, OSError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
