"""
Constant turn rate and velocity (CTRV) prediction.

Each agent keeps its current speed and the yaw rate observed over the end of its history.
The backend ignores the AV plan, which makes it the non-reactive baseline.

Example:
    >>> states = ctrv_rollout((0.0, 0.0, 0.0, 10.0), yaw_rate=0.0, steps=50, dt=0.1)
    >>> float(states[9, 0])
    10.0
"""

import logging
from typing import Sequence

import numpy as np

from predictive_planner.models import DT, FUTURE_STEPS
from predictive_planner.prediction.base import AgentHistory, BasePredictor, PredictedFutures


logger = logging.getLogger(__name__)

STRAIGHT_YAW_RATE = 1e-4
YAW_RATE_WINDOW = 5


def ctrv_rollout(
    agent: Sequence[float],
    yaw_rate: float = 0.0,
    steps: int = FUTURE_STEPS,
    dt: float = DT
) -> np.ndarray:
    """
    Closed-form CTRV rollout.

    Args:
        agent: Current (x, y, heading, speed); an AgentState also works through its fields
        yaw_rate: Constant turn rate (rad/s); below 1e-4 in magnitude the straight-line limit is used
        steps: Number of future steps
        dt: Step length (s)

    Returns:
        np.ndarray: (steps, 4) x, y, heading, speed at t = dt .. steps * dt
    """
    if dt <= 0.0:
        raise ValueError(f'dt must be positive, got {dt}')
    if hasattr(agent, 'heading'):
        x0, y0, theta0, v = agent.x, agent.y, agent.heading, agent.speed
    else:
        x0, y0, theta0, v = (float(value) for value in agent[:4])

    t = dt * np.arange(1, steps + 1)
    if abs(yaw_rate) < STRAIGHT_YAW_RATE:
        theta = np.full_like(t, theta0)
        x = x0 + v * t * np.cos(theta0)
        y = y0 + v * t * np.sin(theta0)
    else:
        theta = theta0 + yaw_rate * t
        x = x0 + v / yaw_rate * (np.sin(theta) - np.sin(theta0))
        y = y0 + v / yaw_rate * (np.cos(theta0) - np.cos(theta))
    return np.stack([x, y, theta, np.full_like(t, v)], axis=-1)


def estimate_yaw_rate(headings: np.ndarray, dt: float = DT, window: int = YAW_RATE_WINDOW) -> float:
    """Mean yaw rate over the last ``window`` steps of a heading history."""
    headings = np.asarray(headings, dtype=float)
    window = min(window, len(headings) - 1)
    if window < 1:
        return 0.0
    change = np.angle(np.exp(1j * (headings[-1] - headings[-1 - window])))
    return float(change / (window * dt))


class CtrvPredictor(BasePredictor):
    """Plan-independent CTRV rollout of every agent, replicated over the K modes."""

    name = 'ctrv'

    def rollout(self, history: AgentHistory, steps: int = FUTURE_STEPS) -> np.ndarray:
        """(N, steps, 4) CTRV states of every agent of ``history``."""
        return np.stack([
            ctrv_rollout(state[-1], estimate_yaw_rate(state[:, 2]), steps=steps)
            for state in history.states
        ])

    def _predict(self, history: AgentHistory, plan: np.ndarray) -> PredictedFutures:
        return self.replicate_single_mode(self.rollout(history, plan.shape[0])[..., :2])
