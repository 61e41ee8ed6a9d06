import pytest
import numpy as np

from predictive_planner.models import Lane, MapModel, PredictorConfig, Scenario
from predictive_planner.planner import HAND_TUNED_WEIGHTS, BehaviorPlanner, build_irl_samples
from predictive_planner.prediction.learned import init_params
from predictive_planner.utils.checkpointer import Checkpointer


@pytest.fixture
def busy_scene(make_scenario):
    return make_scenario(two_lanes=True, others=[(60.0, 8.0, 0.0), (10.0, 12.0, 3.5), (90.0, 9.0, 3.5)])


@pytest.fixture
def three_lane_scene(make_scenario):
    """AV in the middle of three lanes, so every plan set holds 30 proposals."""
    centerline = [[float(x), 0.0] for x in range(0, 301, 10)]
    lanes = [
        Lane(id='right', centerline=[[x, -3.5] for x, _ in centerline], speed_limit=13.5, left_neighbor='middle'),
        Lane(id='middle', centerline=centerline, speed_limit=13.5, left_neighbor='left', right_neighbor='right'),
        Lane(id='left', centerline=[[x, 3.5] for x, _ in centerline], speed_limit=13.5, right_neighbor='middle')
    ]
    base = make_scenario(others=[(60.0, 8.0, 0.0), (10.0, 12.0, 3.5), (90.0, 9.0, 3.5), (40.0, 7.0, -3.5)])
    return Scenario(scenario_id='three_lanes', map=MapModel(lanes=lanes), agents=base.agents, av_index=0)


def test_rejects_unknown_inference_mode():
    with pytest.raises(ValueError):
        BehaviorPlanner(inference='streaming')


def test_default_weights():
    planner = BehaviorPlanner()
    np.testing.assert_array_equal(planner.weights, HAND_TUNED_WEIGHTS)
    assert planner.weights is not HAND_TUNED_WEIGHTS


def test_plan_result(busy_scene):
    result = BehaviorPlanner(PredictorConfig(backend='idm_reactive')).plan(busy_scene)

    assert len(result.proposals) == 20
    assert len(result.futures) == 20
    assert result.features.shape == (20, 7)
    assert result.history.num_agents == 3
    assert sum(prob for _, prob in result.ranked) == pytest.approx(1.0)
    assert result.elapsed > 0.0

    costs = result.features @ HAND_TUNED_WEIGHTS
    assert result.best is result.proposals[int(np.argmin(costs))]


@pytest.mark.parametrize('fusion', ['early', 'late', 'none'])
def test_batch_and_single_inference_agree(three_lane_scene, fusion):
    cfg = PredictorConfig(backend='learned', fusion=fusion, num_modes=2, embed_dim=8)
    params = init_params(cfg, seed=3)
    batch = BehaviorPlanner(cfg, params, inference='batch').plan(three_lane_scene)
    single = BehaviorPlanner(cfg, params, inference='single').plan(three_lane_scene)

    assert len(batch.proposals) == 30

    np.testing.assert_allclose(batch.features, single.features, atol=1e-6)
    for a, b in zip(batch.futures, single.futures):
        np.testing.assert_allclose(a.mu, b.mu, atol=1e-6)
    np.testing.assert_allclose(
        sorted(p for _, p in batch.ranked), sorted(p for _, p in single.ranked), atol=1e-6
    )


def test_scenario_features_label(make_scenario):
    """A speed-limit cruise is labeled with the constant-speed proposal"""
    sample = BehaviorPlanner().scenario_features(make_scenario(av_speed=13.5))
    assert sample.features.shape == (10, 7)
    assert sample.label == 9
    assert sample.scenario_id == 'test'


def test_build_irl_samples_uses_checkpoint(make_scenario, tmp_path, mocker):
    scenarios = [make_scenario(av_speed=v, scenario_id=f's{v}') for v in (5.0, 9.0)]
    planner = BehaviorPlanner()
    checkpointer = Checkpointer('corpus', str(tmp_path))

    first = build_irl_samples(scenarios, planner, checkpointer)
    assert [s.scenario_id for s in first] == ['s5.0', 's9.0']
    assert checkpointer.path('irl_features').exists()

    spy = mocker.spy(planner, 'scenario_features')
    second = build_irl_samples(scenarios, planner, checkpointer)
    assert spy.call_count == 0
    np.testing.assert_array_equal(second[0].features, first[0].features)


def test_build_irl_samples_skips_single_proposal_scenes(make_scenario, mocker):
    planner = BehaviorPlanner()
    scenario = make_scenario()
    single = planner.scenario_features(scenario)
    single.features = single.features[:1]
    mocker.patch.object(planner, 'scenario_features', return_value=single)
    assert build_irl_samples([scenario], planner) == []
