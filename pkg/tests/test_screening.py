"""Early-mortality screening: tau-b against an oracle, selection, TSV I/O."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llmsurv.cohort import ColumnMeta, FeatureMatrix, SurvivalOutcome
from llmsurv.errors import DegenerateInputError
from llmsurv.screening import (
    DEFAULT_TAU_THRESHOLD,
    derive_30dm,
    kendall_tau_b,
    read_screening,
    screen_features,
    selected_features,
    write_screening,
)
from tests.oracles import tau_b_oracle


def test_early_mortality_boundary_is_inclusive():
    assert derive_30dm(SurvivalOutcome(30, True))
    assert not derive_30dm(SurvivalOutcome(31, True))
    assert not derive_30dm(SurvivalOutcome(10, False))
    assert derive_30dm(SurvivalOutcome(0, True))


@settings(max_examples=80)
@given(
    data=st.lists(
        st.tuples(st.integers(0, 4), st.integers(0, 1)), min_size=2, max_size=40
    )
)
def test_tau_matches_bruteforce_oracle(data):
    x = np.array([a for a, _ in data], dtype=float)
    y = np.array([b for _, b in data], dtype=float)
    if np.all(x == x[0]) or np.all(y == y[0]):
        with pytest.raises(DegenerateInputError):
            kendall_tau_b(x, y)
        return
    tau, p = kendall_tau_b(x, y)
    assert tau == pytest.approx(tau_b_oracle(x, y), abs=1e-12)
    assert 0.0 < p <= 1.0


def test_tau_drops_incomplete_pairs():
    x = np.array([1.0, 2.0, np.nan, 4.0, 5.0])
    y = np.array([0.0, 1.0, 1.0, np.nan, 1.0])
    tau, _ = kendall_tau_b(x, y)
    assert tau == pytest.approx(tau_b_oracle([1.0, 2.0, 5.0], [0.0, 1.0, 1.0]), abs=1e-12)


def test_tau_degenerate_inputs():
    with pytest.raises(DegenerateInputError):
        kendall_tau_b([1.0], [0.0])
    with pytest.raises(DegenerateInputError):
        kendall_tau_b([2.0, 2.0, 2.0], [0.0, 1.0, 0.0])
    with pytest.raises(DegenerateInputError):
        kendall_tau_b([np.nan, 1.0, 2.0], [0.0, np.nan, 1.0])  # one complete pair
    with pytest.raises(ValueError):
        kendall_tau_b([1.0, 2.0], [1.0])


def _matrix(columns, values):
    values = np.asarray(values, dtype=float)
    return FeatureMatrix(
        patient_ids=[f"P{i}" for i in range(values.shape[0])],
        columns=[ColumnMeta(c, "continuous") for c in columns],
        values=values,
        mask=np.isnan(values),
    )


def test_screen_orders_by_absolute_tau_and_applies_threshold():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 2, size=60).astype(bool)
    strong = y.astype(float) + rng.normal(0, 0.1, 60)
    weak = rng.normal(0, 1, 60)
    anti = -strong
    m = _matrix(["weak", "strong", "anti"], np.column_stack([weak, strong, anti]))
    labels = {p: bool(v) for p, v in zip(m.patient_ids, y)}

    results = screen_features(m, labels)
    assert [r.feature_name for r in results[:2]] in (["anti", "strong"], ["strong", "anti"])
    by_name = {r.feature_name: r for r in results}
    assert by_name["strong"].selected
    assert by_name["anti"].selected  # negative correlation counts via |tau|
    for r in results:
        assert r.selected == (abs(r.tau) >= DEFAULT_TAU_THRESHOLD)
    assert [abs(r.tau) for r in results] == sorted((abs(r.tau) for r in results), reverse=True)
    assert selected_features(results) == [r.feature_name for r in results if r.selected]


def test_screen_threshold_is_inclusive():
    x = np.array([0.0, 1.0, 2.0, 3.0])
    y = {"P0": False, "P1": False, "P2": True, "P3": True}
    m = _matrix(["x"], x[:, None])
    (res,) = screen_features(m, y, threshold=abs(kendall_tau_b(x, np.array([0, 0, 1, 1.0]))[0]))
    assert res.selected


def test_screen_degenerate_column_warns_and_reports_zero():
    values = np.column_stack([np.ones(6), np.arange(6.0)])
    m = _matrix(["flat", "ramp"], values)
    labels = {p: i % 2 == 0 for i, p in enumerate(m.patient_ids)}
    with pytest.warns(UserWarning, match="degenerate input for feature 'flat'"):
        results = screen_features(m, labels)
    flat = next(r for r in results if r.feature_name == "flat")
    assert (flat.tau, flat.p_value, flat.selected) == (0.0, 1.0, False)
    assert results[-1] is flat  # |tau| 0 sorts last


def test_screen_requires_labels_for_every_row():
    m = _matrix(["x"], np.arange(4.0)[:, None])
    with pytest.raises(KeyError, match="no label for patient 'P3'"):
        screen_features(m, {"P0": True, "P1": False, "P2": True})


def test_screening_tsv_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    m = _matrix(["a", "b"], rng.normal(size=(30, 2)))
    labels = {p: bool(v) for p, v in zip(m.patient_ids, rng.integers(0, 2, 30))}
    results = screen_features(m, labels)

    path = tmp_path / "screening.tsv"
    write_screening(results, path)
    assert read_screening(path) == results  # repr floats survive exactly

    path.write_text("feature\ttau\tp\tkeep\n")
    with pytest.raises(ValueError, match="header"):
        read_screening(path)
