import logging

import pytest
import numpy as np
from pathlib import Path

from predictive_planner.models import WINDOW_LENGTH, AgentTrack, Lane, MapModel, Scenario


@pytest.fixture
def test_data_dir() -> Path:
    """Fixture that provides path to test data directory"""
    return Path(__file__).parent / 'test_data'


@pytest.fixture
def sample_scenarios_path(test_data_dir: Path) -> Path:
    return test_data_dir / 'sample_scenarios.jsonl'


def straight_track(agent_id: str, x0: float, speed: float, y: float = 0.0,
                   length: float = 4.5, width: float = 1.8, kind: str = 'vehicle') -> AgentTrack:
    """Constant-speed track along +x."""
    t = 0.1 * np.arange(WINDOW_LENGTH)
    return AgentTrack(
        id=agent_id, kind=kind, length=length, width=width,
        x=(x0 + speed * t).tolist(), y=[y] * WINDOW_LENGTH,
        heading=[0.0] * WINDOW_LENGTH, speed=[speed] * WINDOW_LENGTH
    )


def straight_map(two_lanes: bool = False, speed_limit: float = 13.5) -> MapModel:
    centerline = [[float(x), 0.0] for x in range(0, 301, 10)]
    if not two_lanes:
        return MapModel(lanes=[Lane(id='lane_0', centerline=centerline, speed_limit=speed_limit)])
    return MapModel(lanes=[
        Lane(id='right', centerline=centerline, speed_limit=speed_limit, left_neighbor='left'),
        Lane(id='left', centerline=[[x, 3.5] for x, _ in centerline], speed_limit=speed_limit,
             right_neighbor='right')
    ])


@pytest.fixture
def make_scenario():
    """Factory for straight-road scenarios: the AV is agent 0, others are (x0, speed, y) tuples."""
    def factory(av_x: float = 20.0, av_speed: float = 10.0, others=(), two_lanes: bool = False,
                scenario_id: str = 'test') -> Scenario:
        agents = [straight_track('av', av_x, av_speed, length=4.8, width=1.9)]
        agents += [straight_track(f'agent_{i}', x0, v, y) for i, (x0, v, y) in enumerate(others)]
        return Scenario(scenario_id=scenario_id, map=straight_map(two_lanes), agents=agents, av_index=0)
    return factory


@pytest.fixture(autouse=True)
def restore_root_logger():
    """Drop handlers installed by setup_logging during a test."""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    for handler in root.handlers[:]:
        if handler not in handlers and type(handler) in (logging.StreamHandler, logging.FileHandler):
            root.removeHandler(handler)
            handler.close()
    root.setLevel(level)
