"""Shared fixtures.

The expensive full-scale pipeline run is session-scoped and lazy: only
tests that actually ask for it (the directional-reproduction and
importance-pattern acceptance criteria) pay for it.
"""
import time
import warnings

import numpy as np
import pytest

from llmsurv.cohort import (
    apply_exclusion,
    build_feature_matrix,
    outcome_arrays,
    split_cohort,
)
from llmsurv.config import RunConfig
from llmsurv.experiment import design_matrix, evaluate_model, fit_model, run_importance
from llmsurv.metrics import TimeGrid
from llmsurv.models import encode_feature_sets
from llmsurv.screening import derive_30dm, screen_features, selected_features
from llmsurv.structurizer import batch_structurize
from llmsurv.synth import MockChatProvider, SynthConfig, generate_cohort, gold_code_map


@pytest.fixture(scope="session")
def small_cohort():
    """300 patients with gold labels; enough signal for unit tests."""
    records, gold = generate_cohort(SynthConfig(n_patients=300, seed=5))
    return records, gold


@pytest.fixture(scope="session")
def small_matrix(small_cohort):
    records, _gold = small_cohort
    kept, _ = apply_exclusion(records)
    matrix = build_feature_matrix(kept)
    outcomes = {r.patient_id: r.outcome for r in kept}
    return matrix, outcomes


@pytest.fixture(scope="session")
def default_pipeline():
    """The full default experiment, run in-process once per session.

    Returns a dict with per-arm metric results, importance
    distributions, and the wall-clock seconds the whole thing took.
    """
    started = time.perf_counter()
    cfg = RunConfig()
    records, gold = generate_cohort(cfg.synth)
    kept, _ = apply_exclusion(records)
    matrix = build_feature_matrix(kept)
    outcomes = {r.patient_id: r.outcome for r in kept}
    train, test = split_cohort(
        matrix.patient_ids, cfg.split.test_fraction, cfg.split.seed
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        screening = screen_features(
            matrix.select_rows(train),
            {p: derive_30dm(outcomes[p]) for p in train},
            cfg.screening.tau_threshold,
        )
    selected = selected_features(screening)
    provider = MockChatProvider(
        gold_code_map(gold), error_rate=cfg.synth.mock_error_rates,
        seed=cfg.provider.seed,
    )
    sets = batch_structurize(kept, provider)
    llm = encode_feature_sets(sets, matrix.patient_ids)

    d_tr, e_tr = outcome_arrays(outcomes, train)
    d_te, e_te = outcome_arrays(outcomes, test)
    grid = TimeGrid.from_observed(
        d_te, n_points=cfg.metrics.grid_points,
        horizon_quantile=cfg.metrics.horizon_quantile,
    )
    results = {}
    importance = {}
    for feature_set in ("structured", "structured+llm"):
        design = design_matrix(matrix, selected, feature_set, llm)
        design_train = design.select_rows(train)
        design_test = design.select_rows(test)
        for kind in ("cox", "rsf", "deepsurv"):
            model = fit_model(kind, design_train, d_tr, e_tr, cfg)
            results[(kind, feature_set)] = evaluate_model(
                model, design_test, d_te, e_te, grid, cfg.metrics
            )
            if feature_set == "structured+llm":
                importance[kind] = run_importance(
                    model, design_test, d_te, e_te,
                    cfg.importance.repeats, cfg.importance.seed,
                )
    return {
        "results": results,
        "importance": importance,
        "elapsed": time.perf_counter() - started,
        "n_test": len(test),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
