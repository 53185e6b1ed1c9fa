"""Strategy roster contracts: ordering, routing, frozen experts, degenerate
equalities, checkpoint round-trips."""

import numpy as np
import pytest

from driftlab import nn
from driftlab.benchmarks import StreamGuard, build_stream, recipe_covariate_shift
from driftlab.errors import ConfigError, ContractError
from driftlab.memory import compose_replay_trainset, concat_sets
from driftlab.strategies import (EXPERT_INIT_MODES, STRATEGY_NAMES,
                                 Hyperparams, read_classifiers,
                                 save_checkpoint, strategy_dispatch,
                                 write_classifier)

import oracles


def small_stream(n_domains=3, seed=11, shift=6.0, n_train=60):
    recipes = recipe_covariate_shift(
        [[0.0, -1.5], [0.0, 1.5]], [shift, 0.0], 1.0,
        n_domains=n_domains, n_train=n_train, n_val=20, n_test=30,
    )
    return build_stream(recipes, seed)


def small_hp(**overrides):
    base = dict(hidden=(8,), epochs=4, batch_size=16, learning_rate=0.02,
                router_hidden=(8,), router_epochs=8, n_per_class=10, quota=8)
    base.update(overrides)
    return Hyperparams(**base)


def run_stream(name, stream, seed=3, hp=None):
    hp = hp or small_hp()
    strategy = strategy_dispatch(name, seed, stream.dim, stream.n_classes, hp)
    guard = StreamGuard(stream, privileged=strategy.privileged)
    for t in range(stream.n_domains):
        guard.advance(t)
        strategy.train_on_domain(t, guard)
    return strategy


def params_equal(a, b):
    return all(np.array_equal(wa, wb) for wa, wb in zip(a.weights, b.weights)) and \
        all(np.array_equal(ba, bb) for ba, bb in zip(a.biases, b.biases))


def test_dispatch_knows_the_whole_roster():
    stream = small_stream(n_domains=1)
    for name in STRATEGY_NAMES:
        strategy = strategy_dispatch(name, 0, stream.dim, stream.n_classes, small_hp())
        assert strategy.name == name


def test_dispatch_rejects_unknown_names_listing_valid_ones():
    with pytest.raises(ConfigError) as err:
        strategy_dispatch("g2dd", 0, 2, 2, small_hp())
    for name in STRATEGY_NAMES:
        assert name in str(err.value)


def test_domains_must_arrive_in_order():
    stream = small_stream()
    strategy = strategy_dispatch("seqft", 0, stream.dim, stream.n_classes, small_hp())
    guard = StreamGuard(stream)
    guard.advance(0)
    with pytest.raises(ContractError, match="expected 0, got 1"):
        strategy.train_on_domain(1, guard)


def test_predict_before_training_is_a_contract_error():
    for name in ("seqft", "g2d", "centroid_router"):
        strategy = strategy_dispatch(name, 0, 2, 2, small_hp())
        with pytest.raises(ContractError):
            strategy.predict(np.zeros((2, 2)))


def test_route_is_only_for_router_strategies():
    stream = small_stream(n_domains=1)
    seqft = run_stream("seqft", stream)
    with pytest.raises(ContractError, match="no domain router"):
        seqft.route(np.zeros((2, 2)))


def test_expert_bank_prediction_decomposes_through_the_router():
    stream = small_stream()
    g2d = run_stream("g2d", stream)
    X = np.vstack([d.test.X for d in stream.domains])
    routed = g2d.route(X)
    want = np.empty(len(X), dtype=int)
    for i, r in enumerate(routed):
        want[i] = nn.predict(g2d.experts[r], X[i : i + 1])[0]
    assert np.array_equal(g2d.predict(X), want)


def test_routing_is_invariant_to_positive_logit_scaling():
    stream = small_stream()
    g2d = run_stream("g2d", stream)
    X = stream.domains[1].test.X
    before = g2d.route(X)
    g2d.router.weights[-1] *= 3.0
    g2d.router.biases[-1] *= 3.0
    assert np.array_equal(g2d.route(X), before)


def test_experts_are_frozen_once_their_domain_ends():
    stream = small_stream()
    strategy = strategy_dispatch("g2d", 3, stream.dim, stream.n_classes, small_hp())
    guard = StreamGuard(stream)
    snapshots = []
    for t in range(stream.n_domains):
        guard.advance(t)
        strategy.train_on_domain(t, guard)
        snapshots.append(strategy.experts[t].copy())
    for t, snap in enumerate(snapshots):
        assert params_equal(strategy.experts[t], snap)


def test_single_domain_router_is_the_constant_zero():
    stream = small_stream(n_domains=1)
    g2d = run_stream("g2d", stream)
    assert g2d.router is None
    assert (g2d.route(stream.domains[0].test.X) == 0).all()


def test_fresh_expert_init_differs_from_sequential():
    stream = small_stream()
    seq = run_stream("g2d", stream, hp=small_hp(expert_init="sequential"))
    fresh = run_stream("g2d", stream, hp=small_hp(expert_init="fresh"))
    assert params_equal(seq.experts[0], fresh.experts[0])  # first expert shares the seed
    assert not params_equal(seq.experts[1], fresh.experts[1])
    assert tuple(EXPERT_INIT_MODES) == ("sequential", "fresh")


def test_ewc_with_zero_lambda_walks_seqft_bit_for_bit():
    stream = small_stream()
    seqft = run_stream("seqft", stream, seed=9)
    ewc = run_stream("ewc", stream, seed=9, hp=small_hp(lam=0.0))
    assert params_equal(seqft.model, ewc.model)


def test_ewc_with_positive_lambda_leaves_the_seqft_trajectory():
    stream = small_stream()
    seqft = run_stream("seqft", stream, seed=9)
    ewc = run_stream("ewc", stream, seed=9, hp=small_hp(lam=50.0))
    assert not params_equal(seqft.model, ewc.model)
    assert len(ewc.ewc) == stream.n_domains


def test_mtl_first_domain_equals_seqft_first_domain():
    stream = small_stream(n_domains=1)
    seqft = run_stream("seqft", stream, seed=4)
    mtl = run_stream("mtl", stream, seed=4)
    assert params_equal(seqft.model, mtl.model)


def test_er_with_unlimited_quota_composes_the_mtl_trainset():
    stream = small_stream()
    T = stream.n_domains
    hp = small_hp(quota=stream.domains[0].train.X.shape[0])
    er = strategy_dispatch("er", 5, stream.dim, stream.n_classes, hp)
    guard = StreamGuard(stream)
    for t in range(T - 1):
        guard.advance(t)
        er.train_on_domain(t, guard)
    guard.advance(T - 1)
    er_trainset = compose_replay_trainset(guard.train(T - 1), er.buffer)
    mtl_trainset = concat_sets([stream.domains[t].train for t in range(T)])
    order_a = np.lexsort((er_trainset.y, *er_trainset.X.T))
    order_b = np.lexsort((mtl_trainset.y, *mtl_trainset.X.T))
    assert np.array_equal(er_trainset.X[order_a], mtl_trainset.X[order_b])
    assert np.array_equal(er_trainset.y[order_a], mtl_trainset.y[order_b])


def test_g2d_and_gen_replay_draw_bit_identical_buffers():
    stream = small_stream()
    g2d = run_stream("g2d", stream, seed=7)
    gen = run_stream("gen_replay", stream, seed=7)
    assert [b.fingerprint for b in g2d.synthetic] == \
        [b.fingerprint for b in gen.synthetic]
    for a, b in zip(g2d.synthetic, gen.synthetic):
        assert np.array_equal(a.data.X, b.data.X)


def test_g2d_router_trains_on_current_domain_buffer_too():
    stream = small_stream(n_domains=2)
    g2d = run_stream("g2d", stream)
    assert [b.domain_id for b in g2d.synthetic] == [0, 1]
    assert g2d.router.n_outputs == 2


def test_oracle_router_reads_only_seen_domains():
    stream = small_stream()
    oracle = run_stream("oracle_router", stream)
    assert oracle.privileged
    assert oracle.router_kind == "oracle"
    assert oracle.router.n_outputs == stream.n_domains


def test_routers_separate_well_spread_domains():
    stream = small_stream(shift=10.0, n_train=100)
    X = np.vstack([d.test.X for d in stream.domains])
    true = np.concatenate([np.full(len(d.test), d.domain_id) for d in stream.domains])
    for name in ("g2d", "oracle_router", "centroid_router"):
        strategy = run_stream(name, stream, hp=small_hp(
            epochs=6, router_epochs=60, n_per_class=25))
        assert np.mean(strategy.route(X) == true) > 0.95


def test_clone_is_independent_of_the_original():
    stream = small_stream(n_domains=2)
    strategy = strategy_dispatch("seqft", 2, stream.dim, stream.n_classes, small_hp())
    guard = StreamGuard(stream)
    guard.advance(0)
    strategy.train_on_domain(0, guard)
    frozen = [w.copy() for w in strategy.model.weights]
    clone = strategy.clone()
    guard.advance(1)
    clone.train_on_domain(1, guard)
    assert all(np.array_equal(w, f) for w, f in zip(strategy.model.weights, frozen))
    assert strategy.last_trained == 0
    assert clone.last_trained == 1


def test_strategy_seeds_make_runs_reproducible():
    stream = small_stream()
    a = run_stream("gen_replay", stream, seed=13)
    b = run_stream("gen_replay", stream, seed=13)
    c = run_stream("gen_replay", stream, seed=14)
    assert params_equal(a.model, b.model)
    assert not params_equal(a.model, c.model)


def test_classifier_text_block_round_trips_exactly(tmp_path):
    model = nn.init_classifier([3, 5, 2], 8)
    model.weights[0][0, 0] = -1.2345678901234567e-8
    path = tmp_path / "model.txt"
    with open(path, "w") as fh:
        write_classifier(fh, "model", model)
    back = read_classifiers(path)["model"]
    assert back.layer_dims == model.layer_dims
    assert params_equal(model, back)


def test_checkpoints_cover_each_strategy_family(tmp_path):
    stream = small_stream(n_domains=2)

    g2d = run_stream("g2d", stream)
    save_checkpoint(g2d, tmp_path / "g2d")
    experts = read_classifiers(tmp_path / "g2d" / "experts.txt")
    assert set(experts) == {"expert0", "expert1"}
    assert params_equal(experts["expert1"], g2d.experts[1])
    router = read_classifiers(tmp_path / "g2d" / "router.txt")["router"]
    assert params_equal(router, g2d.router)
    assert (tmp_path / "g2d" / "buffers.txt").exists()

    centroid = run_stream("centroid_router", stream)
    save_checkpoint(centroid, tmp_path / "centroid")
    text = (tmp_path / "centroid" / "router.txt").read_text()
    assert text.startswith("router centroids")

    ewc = run_stream("ewc", stream)
    save_checkpoint(ewc, tmp_path / "ewc")
    assert (tmp_path / "ewc" / "model.txt").exists()
    assert (tmp_path / "ewc" / "anchors.txt").exists()


def test_predictions_match_oracle_forward_pass():
    stream = small_stream(n_domains=2)
    g2d = run_stream("g2d", stream)
    X = stream.domains[0].test.X
    want = oracles.route_then_classify(
        (g2d.router.weights, g2d.router.biases),
        [(e.weights, e.biases) for e in g2d.experts],
        X,
    )
    assert np.array_equal(g2d.predict(X), want)
