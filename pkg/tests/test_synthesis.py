import pytest
import numpy as np

from predictive_planner.data import load_scenarios, save_scenarios
from predictive_planner.features import rectangles_overlap
from predictive_planner.geometry import RoadNetwork, project_points
from predictive_planner.synthesis import TEMPLATES, synthesize_scenarios


def test_templates():
    assert list(TEMPLATES) == ['car_follow', 'cut_in', 'lane_change', 'intersection_yield', 'curved_road']


def test_same_seed_is_identical():
    first = synthesize_scenarios('cut_in', 3, seed=11)
    second = synthesize_scenarios('cut_in', 3, seed=11)
    assert [s.model_dump_json() for s in first] == [s.model_dump_json() for s in second]


def test_seed_and_index_select_the_scenario():
    assert synthesize_scenarios('car_follow', 1, seed=1)[0] != synthesize_scenarios('car_follow', 1, seed=2)[0]
    # Scenario i does not depend on how many scenarios are requested
    assert synthesize_scenarios('car_follow', 3, seed=4)[:2] == synthesize_scenarios('car_follow', 2, seed=4)


def test_scenario_ids():
    scenarios = synthesize_scenarios('lane_change', 2, seed=5)
    assert [s.scenario_id for s in scenarios] == ['lane_change_5_0', 'lane_change_5_1']


def test_car_follow_contract():
    for scenario in synthesize_scenarios('car_follow', 20, seed=0):
        assert len(scenario.agents) == 2
        assert scenario.av_index == 0
        assert [lane.id for lane in scenario.map.lanes] == ['lane_0']
        av, leader = scenario.agents
        assert np.all(np.array(leader.x) > np.array(av.x))
        np.testing.assert_allclose(av.y, 0.0, atol=1e-6)
        np.testing.assert_allclose(leader.y, 0.0, atol=1e-6)


def test_lane_change_reaches_left_lane():
    for scenario in synthesize_scenarios('lane_change', 10, seed=0):
        assert scenario.av.y[0] == pytest.approx(0.0, abs=1e-6)
        assert scenario.av.y[-1] > 3.0


def test_cut_in_vehicle_moves_right():
    for scenario in synthesize_scenarios('cut_in', 10, seed=0):
        cutter = scenario.agents[1]
        assert cutter.id == 'cutter'
        assert cutter.y[0] == pytest.approx(3.5, abs=1e-6)
        assert cutter.y[-1] < cutter.y[0]


def test_intersection_yield_never_collides():
    for scenario in synthesize_scenarios('intersection_yield', 20, seed=0):
        av, crossing = scenario.agents
        assert len(scenario.map.crosswalks) == 1
        for t in range(len(av.x)):
            assert not rectangles_overlap(
                (av.x[t], av.y[t], av.heading[t]), (av.length, av.width),
                (crossing.x[t], crossing.y[t], crossing.heading[t]), (crossing.length, crossing.width)
            )


def test_curved_road_follows_the_arc():
    for scenario in synthesize_scenarios('curved_road', 5, seed=0):
        path = RoadNetwork(scenario.map).path('arc')
        for agent in scenario.agents:
            _, _, distance = project_points(path, np.stack([agent.x, agent.y], axis=-1))
            assert np.all(distance < 0.1)
            heading = np.unwrap(agent.heading)
            assert heading[-1] >= heading[0] - 1e-6


@pytest.mark.parametrize('template', list(TEMPLATES))
def test_templates_validate_and_roundtrip(template, tmp_path):
    scenarios = synthesize_scenarios(template, 10, seed=3)
    path = tmp_path / f'{template}.jsonl'
    save_scenarios(scenarios, str(path))
    assert load_scenarios(str(path)) == scenarios
    for scenario in scenarios:
        assert scenario.av.id == 'av'
        assert all(min(agent.speed) >= 0.0 for agent in scenario.agents)


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        synthesize_scenarios('roundabout', 1)
    with pytest.raises(ValueError):
        synthesize_scenarios('car_follow', 0)


@pytest.mark.slow
def test_large_batch_roundtrip(tmp_path):
    scenarios = synthesize_scenarios('car_follow', 500, seed=0)
    path = tmp_path / 'car_follow.jsonl'
    save_scenarios(scenarios, str(path))
    assert len(load_scenarios(str(path))) == 500
