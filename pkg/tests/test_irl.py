import time

import pytest
import numpy as np

from predictive_planner.errors import DegenerateScenario
from predictive_planner.features import FEATURE_NAMES
from predictive_planner.irl import (
    IrlSample,
    cost,
    demo_accuracy,
    irl_gradient,
    irl_loss,
    label_by_weights,
    label_demo,
    load_weights,
    proposal_distribution,
    save_weights,
    select_behavior,
    train_irl,
    write_loss_history
)
from predictive_planner.models import IrlTrainConfig
from predictive_planner.utils.optim import Adam


def random_samples(count: int, proposals: int = 6, seed: int = 0):
    rng = np.random.default_rng(seed)
    return [
        IrlSample(features=rng.uniform(0.0, 1.0, size=(proposals, 7)), label=int(rng.integers(proposals)),
                  scenario_id=f's{i}')
        for i in range(count)
    ]


def planted_corpus(count: int, weights: np.ndarray, seed: int, margin: float = 1.0):
    """Scenes of 12 random proposals whose planted-cost minimum leads the runner-up by ``margin``."""
    rng = np.random.default_rng(seed)
    samples = []
    while len(samples) < count:
        features = rng.uniform(0.0, 1.0, size=(12, 7))
        costs = np.sort(cost(weights, features))
        if costs[1] - costs[0] < margin:
            continue
        samples.append(IrlSample(features=features, label=label_by_weights(features, weights),
                                 scenario_id=f'p{len(samples)}'))
    return samples


def test_cost():
    features = np.random.default_rng(0).normal(size=7)
    assert cost(np.zeros(7), features) == 0.0
    assert cost(np.eye(7)[0], np.array([0.5, 9, 9, 9, 9, 9, 9])) == pytest.approx(0.5)
    weights = np.random.default_rng(1).normal(size=7)
    assert cost(weights, features) == pytest.approx(sum(w * f for w, f in zip(weights, features)))
    with pytest.raises(ValueError):
        cost(np.zeros(7), np.zeros(6))


def test_proposal_distribution():
    np.testing.assert_allclose(proposal_distribution([1.0, 1.0, 1.0]), [1 / 3] * 3)
    np.testing.assert_allclose(proposal_distribution([0.0, np.log(2.0)]), [2 / 3, 1 / 3])
    probs = proposal_distribution([5.0, 1005.0])
    assert np.all(np.isfinite(probs))
    assert probs[0] == pytest.approx(1.0)
    assert probs[1] == pytest.approx(0.0, abs=1e-300)
    with pytest.raises(ValueError):
        proposal_distribution([])


def test_distribution_is_shift_invariant():
    costs = np.random.default_rng(2).normal(size=8)
    np.testing.assert_allclose(proposal_distribution(costs), proposal_distribution(costs + 123.4))


def test_loss_with_zero_weights():
    samples = random_samples(3, proposals=5)
    assert irl_loss(np.zeros(7), samples) == pytest.approx(np.log(5.0))


def test_loss_with_identical_features():
    features = np.tile(np.arange(7.0), (4, 1))
    weights = np.random.default_rng(3).normal(size=7)
    loss = irl_loss(weights, [IrlSample(features, 2)], weight_decay=0.1)
    assert loss == pytest.approx(np.log(4.0) + 0.05 * weights @ weights)


def test_loss_matches_direct_evaluation():
    samples = random_samples(4)
    weights = np.random.default_rng(4).normal(size=7)
    expected = np.mean([
        -np.log(np.exp(-s.features @ weights)[s.label] / np.exp(-s.features @ weights).sum()) for s in samples
    ]) + 0.5 * 1e-2 * weights @ weights
    assert irl_loss(weights, samples) == pytest.approx(expected)


def test_gradient_two_proposals():
    features = np.zeros((2, 7))
    features[0, 0] = 1.0
    grad = irl_gradient(np.zeros(7), [IrlSample(features, 0)])
    # Demonstrated 1.0 minus expected 0.5
    assert grad[0] == pytest.approx(0.5)
    np.testing.assert_allclose(grad[1:], 0.0)


def test_gradient_with_identical_features_is_weight_decay():
    features = np.tile(np.arange(7.0), (3, 1))
    weights = np.random.default_rng(5).normal(size=7)
    np.testing.assert_allclose(irl_gradient(weights, [IrlSample(features, 1)], 0.3), 0.3 * weights)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(6)
    eps = 1e-6
    for instance in range(100):
        samples = random_samples(int(rng.integers(1, 9)), proposals=int(rng.integers(2, 15)), seed=instance)
        weights = rng.normal(scale=2.0, size=7)
        grad = irl_gradient(weights, samples)
        for i in range(7):
            step = np.eye(7)[i] * eps
            numeric = (irl_loss(weights + step, samples) - irl_loss(weights - step, samples)) / (2 * eps)
            assert grad[i] == pytest.approx(numeric, rel=1e-5, abs=1e-8), (instance, i)


def test_gradient_descent_lowers_the_loss():
    samples = random_samples(8)
    weights = np.random.default_rng(11).normal(size=7)
    step = 1e-3 * irl_gradient(weights, samples)
    assert irl_loss(weights - step, samples) < irl_loss(weights, samples)


def test_degenerate_samples_are_rejected():
    with pytest.raises(DegenerateScenario):
        irl_loss(np.zeros(7), [IrlSample(np.zeros((1, 7)), 0)])
    with pytest.raises(DegenerateScenario):
        irl_gradient(np.zeros(7), [IrlSample(np.zeros((3, 7)), 3)])
    with pytest.raises(ValueError):
        irl_loss(np.zeros(7), [])


def test_label_demo():
    truth = np.array([[0.0, 0.0], [24.0, 0.0]])
    assert label_demo([np.array([[50.0, 0.0]])], truth) == 0
    assert label_demo([np.array([[50.0, 0.0]]), np.array([[25.0, 0.0]])], truth) == 1
    assert label_demo([np.array([[23.0, 0.0]]), np.array([[25.0, 0.0]])], truth) == 0
    with pytest.raises(ValueError):
        label_demo([], truth)


def test_select_behavior_uniform_keeps_order():
    proposals = ['a', 'b', 'c', 'd']
    ranked = select_behavior(proposals, np.random.default_rng(7).normal(size=(4, 7)), np.zeros(7))
    assert [p for p, _ in ranked] == proposals
    assert [prob for _, prob in ranked] == pytest.approx([0.25] * 4)


def test_select_behavior_ranks_unsafe_last():
    features = np.zeros((4, 7))
    features[1, 6] = 50.0
    weights = np.zeros(7)
    weights[6] = 1.0
    ranked = select_behavior(['a', 'b', 'c', 'd'], features, weights)
    assert ranked[-1][0] == 'b'
    assert sum(prob for _, prob in ranked) == pytest.approx(1.0)


def test_select_behavior_is_invariant_to_cost_shift():
    features = np.random.default_rng(8).uniform(size=(6, 7))
    weights = np.random.default_rng(9).normal(size=7)
    shifted = features.copy()
    shifted[:, 0] += 10.0
    first = [p for p, _ in select_behavior(list(range(6)), features, weights)]
    second = [p for p, _ in select_behavior(list(range(6)), shifted, weights)]
    assert first == second


def test_select_behavior_rejects_misaligned_features():
    with pytest.raises(ValueError):
        select_behavior(['a', 'b'], np.zeros((3, 7)), np.zeros(7))


def test_first_step_is_adam_step():
    samples = random_samples(4)
    cfg = IrlTrainConfig(steps=1, batch_size=4, learning_rate=0.05)
    weights, history = train_irl(samples, cfg)

    grad = irl_gradient(np.zeros(7), samples, cfg.weight_decay)
    expected = Adam(7).step(np.zeros(7), grad, 0.05)
    np.testing.assert_allclose(weights, expected)
    assert history == [(0, pytest.approx(np.log(6.0)), 0.05)]


def test_identical_features_decay_towards_zero():
    samples = [IrlSample(np.tile(np.ones(7), (3, 1)), 0) for _ in range(4)]
    start = np.full(7, 2.0)
    cfg = IrlTrainConfig(steps=300, weight_decay=0.5, learning_rate=0.05)
    weights, _ = train_irl(samples, cfg, initial_weights=start)
    assert np.all(np.abs(weights) < np.abs(start))


def test_learning_rate_schedule():
    cfg = IrlTrainConfig(steps=120, decay_every=50, lr_decay=0.9, learning_rate=0.01)
    _, history = train_irl(random_samples(4), cfg)
    assert history[49][2] == pytest.approx(0.01)
    assert history[50][2] == pytest.approx(0.009)
    assert history[100][2] == pytest.approx(0.0081)


def test_planted_weights_are_recovered():
    """Default training settings recover the ranking of planted weights"""
    planted = np.array([3.0, 1.0, 0.5, 2.0, 1.5, 0.5, 4.0])
    train = planted_corpus(500, planted, seed=0)
    held_out = planted_corpus(100, planted, seed=1)

    start = time.perf_counter()
    weights, history = train_irl(train, IrlTrainConfig())
    assert time.perf_counter() - start < 120.0
    assert len(history) == 500
    assert history[-1][1] < history[0][1]
    assert demo_accuracy(weights, held_out) >= 0.9


def test_weights_file_roundtrip(tmp_path):
    path = tmp_path / 'weights.txt'
    weights = np.random.default_rng(10).normal(size=7)
    save_weights(weights, str(path))

    lines = path.read_text().splitlines()
    assert len(lines) == 7
    assert [line.split()[0] for line in lines] == list(FEATURE_NAMES)
    np.testing.assert_array_equal(load_weights(str(path)), weights)


def test_load_weights_rejects_partial_file(tmp_path):
    path = tmp_path / 'weights.txt'
    path.write_text('travel 1.0\nacc 2.0\n')
    with pytest.raises(ValueError):
        load_weights(str(path))


def test_write_loss_history(tmp_path):
    path = tmp_path / 'loss.csv'
    write_loss_history([(0, 1.5, 0.01), (1, 1.25, 0.01)], str(path))
    assert path.read_text().splitlines() == ['step,loss,lr', '0,1.5,0.01', '1,1.25,0.01']
