"""Training loop semantics, Fisher estimation, and the anchor penalty."""

import numpy as np
import pytest

from driftlab import nn
from driftlab.benchmarks import LabeledSet
from driftlab.errors import NumericError, ValidationError
from driftlab.optim import OptimizerState
from driftlab.training import (EwcState, estimate_fisher_diag, ewc_penalty,
                               snapshot_params, train_classifier)

import oracles


def separable_data(seed=0, n=80):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal((-2.0, 0.0), 0.5, (n // 2, 2)),
                   rng.normal((2.0, 0.0), 0.5, (n // 2, 2))])
    y = np.repeat([0, 1], n // 2)
    return LabeledSet(X, y)


def fresh_model(seed=1, dims=(2, 8, 2)):
    return nn.init_classifier(list(dims), seed)


def params_of(model):
    return [w.copy() for w in model.weights] + [b.copy() for b in model.biases]


def test_zero_epochs_is_a_no_op():
    model = fresh_model()
    before = params_of(model)
    log = train_classifier(model, separable_data(), epochs=0, batch_size=16,
                           opt=OptimizerState("adam", 0.01), seed=0)
    assert log.n_steps == 0
    assert log.epoch_losses.shape == (0,)
    for b_arr, a_arr in zip(before, params_of(model)):
        assert np.array_equal(b_arr, a_arr)


def test_training_is_deterministic_in_seed():
    data = separable_data()
    m1, m2, m3 = fresh_model(), fresh_model(), fresh_model()
    for m, seed in ((m1, 5), (m2, 5), (m3, 6)):
        train_classifier(m, data, epochs=3, batch_size=16,
                         opt=OptimizerState("adam", 0.01), seed=seed)
    assert all(np.array_equal(a, b) for a, b in zip(params_of(m1), params_of(m2)))
    assert not np.array_equal(m1.weights[0], m3.weights[0])


def test_loss_falls_on_separable_data():
    model = fresh_model()
    log = train_classifier(model, separable_data(), epochs=10, batch_size=16,
                           opt=OptimizerState("adam", 0.01), seed=1)
    assert log.epoch_losses[-1] < log.epoch_losses[0]
    assert log.epoch_losses[-1] < 0.1
    assert log.n_steps == 10 * 5  # 80 samples / batch 16


def test_labels_outside_model_range_are_rejected():
    model = fresh_model()
    data = LabeledSet(np.zeros((4, 2)), np.array([0, 1, 2, 0]))
    with pytest.raises(ValidationError):
        train_classifier(model, data, epochs=1, batch_size=2,
                         opt=OptimizerState("adam", 0.01), seed=0)


def test_zero_penalty_hook_changes_nothing():
    data = separable_data()
    plain, hooked = fresh_model(), fresh_model()
    zero = lambda m: (0.0, [(np.zeros_like(w), np.zeros_like(b))
                            for w, b in zip(m.weights, m.biases)])
    train_classifier(plain, data, epochs=3, batch_size=16,
                     opt=OptimizerState("adam", 0.01), seed=2)
    train_classifier(hooked, data, epochs=3, batch_size=16,
                     opt=OptimizerState("adam", 0.01), seed=2, penalty=zero)
    for a, b in zip(params_of(plain), params_of(hooked)):
        assert np.array_equal(a, b)


def test_penalty_gradients_are_applied():
    data = separable_data()
    plain, hooked = fresh_model(), fresh_model()
    pull = lambda m: (0.0, [(np.full_like(w, 0.1), np.full_like(b, 0.1))
                            for w, b in zip(m.weights, m.biases)])
    train_classifier(plain, data, epochs=1, batch_size=80,
                     opt=OptimizerState("sgd", 0.5), seed=2)
    train_classifier(hooked, data, epochs=1, batch_size=80,
                     opt=OptimizerState("sgd", 0.5), seed=2, penalty=pull)
    assert not np.array_equal(plain.weights[0], hooked.weights[0])


def test_non_finite_loss_is_reported_with_location():
    model = fresh_model()
    bad = lambda m: (np.inf, [(np.zeros_like(w), np.zeros_like(b))
                              for w, b in zip(m.weights, m.biases)])
    with pytest.raises(NumericError, match="epoch 0, batch 0"):
        train_classifier(model, separable_data(), epochs=1, batch_size=16,
                         opt=OptimizerState("adam", 0.01), seed=0, penalty=bad)


# ---------------------------------------------------------------------------
# Fisher estimation
# ---------------------------------------------------------------------------


def test_fisher_is_nonnegative_and_shaped_like_params():
    model = fresh_model()
    data = separable_data()
    fisher = estimate_fisher_diag(model, data, seed=3)
    assert len(fisher) == model.n_layers
    for (fw, fb), w, b in zip(fisher, model.weights, model.biases):
        assert fw.shape == w.shape and fb.shape == b.shape
        assert (fw >= 0).all() and (fb >= 0).all()


def test_fisher_with_deterministic_predictive_matches_closed_form():
    # a linear model with huge logit separation: the sampled label is the
    # argmax with probability ~1, so the estimate equals the closed-form
    # single-sample gradient squares
    W = np.array([[30.0, -30.0], [0.0, 0.0]])
    b = np.zeros(2)
    model = nn.Classifier([2, 2], [W.copy()], [b.copy()])
    X = np.array([[1.0, 0.2], [-1.0, -0.4], [2.0, 1.0]])
    data = LabeledSet(X, np.zeros(3, dtype=int))
    fisher = estimate_fisher_diag(model, data, seed=0)
    want_w = np.zeros_like(W)
    want_b = np.zeros_like(b)
    for x in X:
        y_hat = int(np.argmax(x @ W + b))
        gw, gb = oracles.linear_softmax_grad(W, b, x, y_hat)
        want_w += gw ** 2
        want_b += gb ** 2
    assert np.allclose(fisher[0][0], want_w / 3, atol=1e-12)
    assert np.allclose(fisher[0][1], want_b / 3, atol=1e-12)


def test_fisher_approaches_expected_fisher_on_large_samples():
    rng = np.random.default_rng(8)
    W = rng.normal(size=(2, 2)) * 0.5
    b = rng.normal(size=2) * 0.1
    X = rng.normal(size=(1500, 2))
    model = nn.Classifier([2, 2], [W.copy()], [b.copy()])
    fisher = estimate_fisher_diag(model, LabeledSet(X, np.zeros(1500, dtype=int)), seed=4)
    want_w, want_b = oracles.expected_fisher_linear_softmax(W, b, X)
    assert np.allclose(fisher[0][0], want_w, rtol=0.15, atol=0.01)
    assert np.allclose(fisher[0][1], want_b, rtol=0.15, atol=0.01)


def test_fisher_subsample_bounds():
    model = fresh_model()
    data = separable_data(n=20)
    estimate_fisher_diag(model, data, seed=0, n_samples=5)
    with pytest.raises(ValidationError):
        estimate_fisher_diag(model, data, seed=0, n_samples=0)
    with pytest.raises(ValidationError):
        estimate_fisher_diag(model, data, seed=0, n_samples=21)


# ---------------------------------------------------------------------------
# Anchor penalty
# ---------------------------------------------------------------------------


def unit_fisher(model):
    return [(np.ones_like(w), np.ones_like(b))
            for w, b in zip(model.weights, model.biases)]


def test_penalty_worked_example():
    # theta - theta* = (1, -1), unit fisher, lam = 1 -> loss exactly 1.0
    model = nn.Classifier([1, 2], [np.array([[1.0, -1.0]])], [np.zeros(2)])
    anchor = nn.Classifier([1, 2], [np.array([[0.0, 0.0]])], [np.zeros(2)])
    state = EwcState()
    state.add_anchor(snapshot_params(anchor), unit_fisher(anchor))
    loss, grads = ewc_penalty(model, state, 1.0)
    assert loss == 1.0
    assert np.array_equal(grads[0][0], np.array([[1.0, -1.0]]))
    assert np.array_equal(grads[0][1], np.zeros(2))


def test_penalty_vanishes_at_lam_zero_or_without_anchors():
    model = fresh_model()
    loss, grads = ewc_penalty(model, EwcState(), 5.0)
    assert loss == 0.0
    assert all(not dw.any() and not db.any() for dw, db in grads)
    state = EwcState()
    state.add_anchor(snapshot_params(model), unit_fisher(model))
    loss, grads = ewc_penalty(model, state, 0.0)
    assert loss == 0.0
    assert all(not dw.any() and not db.any() for dw, db in grads)


def test_penalty_sums_over_anchors():
    model = nn.Classifier([1, 1], [np.array([[2.0]])], [np.zeros(1)])
    anchor = nn.Classifier([1, 1], [np.array([[0.0]])], [np.zeros(1)])
    state = EwcState()
    state.add_anchor(snapshot_params(anchor), unit_fisher(anchor))
    state.add_anchor(snapshot_params(anchor), unit_fisher(anchor))
    loss, grads = ewc_penalty(model, state, 1.0)
    assert loss == 2.0 * (0.5 * 4.0)  # two identical anchors
    assert grads[0][0][0, 0] == 4.0


def test_penalty_rejects_mismatched_anchor_shapes():
    model = fresh_model(dims=(2, 4, 2))
    other = fresh_model(dims=(2, 6, 2))
    state = EwcState()
    state.add_anchor(snapshot_params(other), unit_fisher(other))
    with pytest.raises(ValidationError):
        ewc_penalty(model, state, 1.0)


def test_penalty_negative_lam_rejected():
    model = fresh_model()
    with pytest.raises(ValidationError):
        ewc_penalty(model, EwcState(), -0.5)


def test_snapshot_is_decoupled_from_the_live_model():
    model = fresh_model()
    snap = snapshot_params(model)
    model.weights[0][0, 0] += 9.0
    assert snap[0][0][0, 0] != model.weights[0][0, 0]
