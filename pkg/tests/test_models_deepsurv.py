"""Network survival model: loss oracle, backprop check, training behaviour."""

import numpy as np
import pytest

from llmsurv.cohort import ColumnMeta, FeatureMatrix
from llmsurv.models import (
    DeepSurvParams,
    TrainParams,
    cox_partial_loss,
    deepsurv_fit,
    load_model,
    save_model,
)
from llmsurv.models.deepsurv import forward_scores, init_network, loss_and_gradients
from tests.oracles import breslow_partial_loglik, random_survival_instance


def _fm(values):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] == 1:
        values = values.T
    n, p = values.shape
    return FeatureMatrix(
        patient_ids=[f"P{i}" for i in range(n)],
        columns=[ColumnMeta(f"x{j}", "continuous") for j in range(p)],
        values=values,
        mask=np.zeros((n, p), dtype=bool),
    )


# ---------------------------------------------------------------------------
# loss


def test_loss_matches_partial_likelihood_oracle():
    for seed in range(6):
        rng = np.random.default_rng(seed)
        durations, events, x = random_survival_instance(rng, 25)
        beta = rng.normal()
        loss, _ = cox_partial_loss(beta * x, durations, events)
        oracle = -breslow_partial_loglik(beta, x, durations, events) / events.sum()
        assert loss == pytest.approx(oracle, abs=1e-10)


def test_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    durations, events, x = random_survival_instance(rng, 12)
    g = rng.normal(size=12)
    loss, grad = cox_partial_loss(g, durations, events)
    assert abs(grad.sum()) < 1e-12  # shift direction is flat
    h = 1e-6
    for i in range(12):
        up, dn = g.copy(), g.copy()
        up[i] += h
        dn[i] -= h
        numeric = (cox_partial_loss(up, durations, events)[0]
                   - cox_partial_loss(dn, durations, events)[0]) / (2 * h)
        assert grad[i] == pytest.approx(numeric, abs=1e-6)


def test_loss_is_shift_invariant():
    rng = np.random.default_rng(2)
    durations, events, x = random_survival_instance(rng, 20)
    g = rng.normal(size=20)
    base_loss, base_grad = cox_partial_loss(g, durations, events)
    shifted_loss, shifted_grad = cox_partial_loss(g + 37.0, durations, events)
    assert shifted_loss == pytest.approx(base_loss, abs=1e-9)
    assert shifted_grad == pytest.approx(base_grad, abs=1e-9)


def test_loss_requires_events():
    with pytest.raises(ValueError, match="without events"):
        cox_partial_loss(np.zeros(4), np.arange(1.0, 5.0), np.zeros(4, dtype=bool))


# ---------------------------------------------------------------------------
# network plumbing


def test_init_network_shapes():
    params = init_network(np.random.default_rng(0), n_features=5, hidden=(8, 3))
    shapes = [(w.shape, b.shape) for w, b in params]
    assert shapes == [((5, 8), (8,)), ((8, 3), (3,)), ((3, 1), (1,))]
    scores = forward_scores(params, np.zeros((4, 5)))
    assert scores.shape == (4,)


def test_backprop_matches_finite_differences():
    rng = np.random.default_rng(3)
    durations, events, _ = random_survival_instance(rng, 14)
    X = rng.normal(size=(14, 3))
    params = init_network(rng, 3, (4,))
    loss, grads = loss_and_gradients(params, X, durations, events)

    def loss_at(p):
        return cox_partial_loss(forward_scores(p, X), durations, events)[0]

    h = 1e-6
    for li, (w, b) in enumerate(params):
        corners = {(0, 0), (w.shape[0] - 1, w.shape[1] - 1), (w.shape[0] // 2, 0)}
        for idx in sorted(corners):
            perturbed = [(wi.copy(), bi.copy()) for wi, bi in params]
            perturbed[li][0][idx] += h
            up = loss_at(perturbed)
            perturbed[li][0][idx] -= 2 * h
            dn = loss_at(perturbed)
            assert grads[li][0][idx] == pytest.approx((up - dn) / (2 * h), abs=1e-5)
        perturbed = [(wi.copy(), bi.copy()) for wi, bi in params]
        perturbed[li][1][0] += h
        up = loss_at(perturbed)
        perturbed[li][1][0] -= 2 * h
        dn = loss_at(perturbed)
        assert grads[li][1][0] == pytest.approx((up - dn) / (2 * h), abs=1e-5)


# ---------------------------------------------------------------------------
# training


def test_fit_is_deterministic_and_learns_a_linear_signal():
    rng = np.random.default_rng(4)
    n = 120
    x = rng.normal(size=n)
    durations = np.maximum(1.0, np.exp(-x) * 40.0 + rng.exponential(2.0, size=n))
    events = np.ones(n, dtype=bool)
    m = _fm(x)
    train = TrainParams(learning_rate=0.01, max_epochs=150, seed=0)
    a = deepsurv_fit(m, durations, events, DeepSurvParams(hidden=(8,)), train)
    b = deepsurv_fit(m, durations, events, DeepSurvParams(hidden=(8,)), train)
    assert np.array_equal(a.predict_risk(m), b.predict_risk(m))

    risks = a.predict_risk(m)
    # higher covariate means shorter survival; ranking should recover it
    order = np.argsort(x)
    assert np.corrcoef(risks[order], np.arange(n))[0, 1] > 0.8
    assert abs(risks.mean()) < 10.0  # centered by the training shift
    assert len(a.loss_trace) <= train.max_epochs
    assert 0 < a.best_epoch <= train.max_epochs


def test_early_stopping_restores_the_best_epoch():
    rng = np.random.default_rng(5)
    n = 80
    X = rng.normal(size=(n, 2))
    durations = rng.integers(1, 50, size=n).astype(float)
    events = rng.random(n) < 0.7
    net = deepsurv_fit(
        _fm(X),
        durations,
        events,
        DeepSurvParams(hidden=(16,)),
        TrainParams(learning_rate=0.05, max_epochs=400, patience=5, val_fraction=0.25, seed=1),
    )
    # pure noise plus an aggressive step: validation should stall well
    # before the epoch budget and the best epoch precede the stop
    assert len(net.loss_trace) < 400
    assert net.best_epoch <= len(net.loss_trace)
    val = [v for _, v in net.loss_trace]
    assert val[net.best_epoch - 1] == min(val)


def test_eventless_validation_slice_falls_back_to_fixed_epochs():
    rng = np.random.default_rng(6)
    n = 30
    X = rng.normal(size=(n, 2))
    durations = rng.integers(1, 20, size=n).astype(float)
    events = np.zeros(n, dtype=bool)
    events[3] = True  # a lone event cannot sit in both slices
    with pytest.warns(UserWarning, match="early stopping disabled"):
        net = deepsurv_fit(
            _fm(X),
            durations,
            events,
            DeepSurvParams(hidden=(4,)),
            TrainParams(max_epochs=20, val_fraction=0.3, seed=2),
        )
    assert len(net.loss_trace) == 20
    assert net.best_epoch == 20


def test_zero_validation_fraction_runs_the_full_budget():
    rng = np.random.default_rng(7)
    durations, events, x = random_survival_instance(rng, 40)
    net = deepsurv_fit(
        _fm(x),
        durations,
        events,
        DeepSurvParams(hidden=(4,)),
        TrainParams(max_epochs=15, val_fraction=0.0, seed=3),
    )
    assert len(net.loss_trace) == 15
    assert net.best_epoch == 15


def test_dropout_training_is_deterministic():
    rng = np.random.default_rng(8)
    durations, events, x = random_survival_instance(rng, 50)
    m = _fm(np.column_stack([x, rng.normal(size=50)]))
    arch = DeepSurvParams(hidden=(8,), dropout=0.5)
    train = TrainParams(max_epochs=30, seed=4)
    a = deepsurv_fit(m, durations, events, arch, train)
    b = deepsurv_fit(m, durations, events, arch, train)
    assert np.array_equal(a.predict_risk(m), b.predict_risk(m))
    assert np.isfinite(a.predict_risk(m)).all()


def test_survival_curves_are_proper():
    rng = np.random.default_rng(9)
    durations, events, x = random_survival_instance(rng, 60)
    m = _fm(x)
    net = deepsurv_fit(m, durations, events, DeepSurvParams(hidden=(4,)), TrainParams(max_epochs=40, seed=5))
    times = np.linspace(1.0, durations.max(), 15)
    surv = net.predict_survival(m, times)
    assert surv.shape == (60, 15)
    assert np.all((surv >= 0.0) & (surv <= 1.0))
    assert np.all(np.diff(surv, axis=1) <= 1e-12)


def test_no_events_is_rejected():
    m = _fm(np.zeros(6))
    with pytest.raises(ValueError, match="no events"):
        deepsurv_fit(m, np.arange(1.0, 7.0), np.zeros(6, dtype=bool))


def test_serialization_round_trip(tmp_path):
    rng = np.random.default_rng(10)
    durations, events, x = random_survival_instance(rng, 40)
    m = _fm(x)
    net = deepsurv_fit(m, durations, events, DeepSurvParams(hidden=(6,)), TrainParams(max_epochs=25, seed=6))
    path = tmp_path / "deepsurv.json"
    save_model(net, path)
    loaded = load_model(path)
    assert np.array_equal(loaded.predict_risk(m), net.predict_risk(m))
    times = np.array([1.0, 4.0, 9.0])
    assert np.array_equal(loaded.predict_survival(m, times), net.predict_survival(m, times))
