import pytest
import numpy as np

from predictive_planner.models import AgentState, PredictorConfig
from predictive_planner.prediction.base import AgentHistory
from predictive_planner.prediction.ctrv import CtrvPredictor, ctrv_rollout, estimate_yaw_rate


def integrate_fine(x, y, heading, speed, yaw_rate, duration, dt=1e-3):
    """Midpoint integration of the unicycle model."""
    for _ in range(int(round(duration / dt))):
        mid = heading + 0.5 * yaw_rate * dt
        x += speed * np.cos(mid) * dt
        y += speed * np.sin(mid) * dt
        heading += yaw_rate * dt
    return x, y


def test_straight_rollout_along_y():
    states = ctrv_rollout((0.0, 0.0, np.pi / 2, 5.0), yaw_rate=0.0, steps=50, dt=0.1)
    assert states.shape == (50, 4)
    np.testing.assert_allclose(states[:, 0], 0.0, atol=1e-12)
    np.testing.assert_allclose(states[:, 1], 5.0 * 0.1 * np.arange(1, 51))


def test_turning_rollout_matches_integrator():
    states = ctrv_rollout((0.0, 0.0, 0.0, 10.0), yaw_rate=0.1, steps=50, dt=0.1)
    x, y = integrate_fine(0.0, 0.0, 0.0, 10.0, 0.1, 5.0)
    assert abs(states[-1, 0] - x) < 1e-4
    assert abs(states[-1, 1] - y) < 1e-4


def test_turning_rollout_stays_on_circle():
    """v = 10 and yaw rate 0.1 trace a 100 m circle around (0, 100)"""
    states = ctrv_rollout((0.0, 0.0, 0.0, 10.0), yaw_rate=0.1)
    radius = np.hypot(states[:, 0], states[:, 1] - 100.0)
    np.testing.assert_allclose(radius, 100.0, atol=1e-9)


def test_rollout_at_rest():
    states = ctrv_rollout((3.0, 4.0, 1.0, 0.0), yaw_rate=0.0)
    np.testing.assert_allclose(states[:, :2], np.tile([3.0, 4.0], (50, 1)))


def test_rollout_accepts_agent_state():
    agent = AgentState(x=1.0, y=2.0, heading=0.0, speed=2.0, length=4.5, width=1.8)
    states = ctrv_rollout(agent, steps=10)
    assert states[-1, 0] == pytest.approx(3.0)


def test_rollout_rejects_bad_dt():
    with pytest.raises(ValueError):
        ctrv_rollout((0.0, 0.0, 0.0, 1.0), dt=0.0)


def test_estimate_yaw_rate():
    headings = 0.2 * 0.1 * np.arange(21)
    assert estimate_yaw_rate(headings) == pytest.approx(0.2)
    assert estimate_yaw_rate(np.array([0.5])) == 0.0
    # Wraps across +-pi
    assert estimate_yaw_rate(np.array([np.pi - 0.01, -np.pi + 0.01])) == pytest.approx(0.2)


def test_predictor_straight_agent(make_scenario):
    """An agent at the origin at 10 m/s is 10 m further along after 1 s in every mode"""
    scenario = make_scenario(av_x=-60.0, others=[(-20.0, 10.0, 0.0)])
    history = AgentHistory.from_scenario(scenario)
    predictor = CtrvPredictor(PredictorConfig())
    futures = predictor.predict(history, scenario.av_future())

    assert futures.mu.shape == (3, 1, 50, 2)
    assert futures.mu[0, 0, 9, 0] == pytest.approx(10.0)
    np.testing.assert_allclose(futures.mu[0], futures.mu[1])
    np.testing.assert_allclose(futures.mu[0], futures.mu[2])
    np.testing.assert_allclose(futures.sigma, PredictorConfig().sigma_floor)
    np.testing.assert_allclose(futures.mode_probs, 1.0 / 3.0)


def test_predictor_ignores_plan(make_scenario):
    scenario = make_scenario(others=[(50.0, 8.0, 0.0)])
    history = AgentHistory.from_scenario(scenario)
    predictor = CtrvPredictor()
    plan = scenario.av_future()
    stopped = plan.copy()
    stopped[:, :2] = plan[0, :2]
    stopped[:, 3] = 0.0
    np.testing.assert_array_equal(predictor.predict(history, plan).mu, predictor.predict(history, stopped).mu)


def test_predictor_empty_scene(make_scenario):
    scenario = make_scenario()
    history = AgentHistory.from_scenario(scenario)
    futures = CtrvPredictor(PredictorConfig(num_modes=4)).predict(history, scenario.av_future())
    assert futures.num_agents == 0
    assert futures.num_modes == 4
    np.testing.assert_allclose(futures.mode_probs, 0.25)
