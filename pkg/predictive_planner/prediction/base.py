"""
Base prediction interface for conditional motion prediction.

This module provides the abstract base class shared by every prediction backend, together
with the two records that flow through it: the joint agent history a backend conditions on,
and the multi-modal Gaussian futures it returns.

The module defines:
- PredictedFutures: K joint modes of per-agent, per-step Gaussian means and standard
  deviations, plus mode probabilities
- AgentHistory: the nearest surrounding agents of a scene with their past states,
  boxes, matched lanes and (when known) ground-truth futures
- BasePredictor: the predict / predict_batch interface with empty-scene handling

Example:
    >>> class ConstantPositionPredictor(BasePredictor):
    ...     def _predict(self, history, plan):
    ...         mu = np.repeat(history.current[:, None, :2], FUTURE_STEPS, axis=1)
    ...         return self.replicate_single_mode(mu)
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence, Union

import numpy as np

from predictive_planner.errors import PredictionError
from predictive_planner.geometry import RoadNetwork, project_points
from predictive_planner.models import (
    FUTURE_STEPS,
    PLAN_STATE_DIM,
    PredictorConfig,
    Scenario
)


logger = logging.getLogger(__name__)

LANE_CONTEXT_POINTS = 10
LANE_CONTEXT_SPACING = 5.0

# A TrajectoryProposal or a raw (T_f, 4) state array
PlanLike = Union[np.ndarray, Any]


def plan_states(plan: PlanLike) -> np.ndarray:
    """Return the (T_f, 4) state array of a proposal or of a raw plan array."""
    states = getattr(plan, 'states', plan)
    states = np.asarray(states, dtype=float)
    if states.ndim != 2 or states.shape[1] != PLAN_STATE_DIM:
        raise PredictionError(f'plan must be shaped (T_f, {PLAN_STATE_DIM}), got {states.shape}')
    return states


@dataclass(frozen=True, eq=False)
class PredictedFutures:
    """
    Joint multi-modal Gaussian futures of the surrounding agents.

    Correlation between x and y is fixed to 0.

    Attributes:
        mu (np.ndarray): (K, N, T_f, 2) absolute mean positions (m)
        sigma (np.ndarray): (K, N, T_f, 2) standard deviations (m), strictly positive
        mode_probs (np.ndarray): (K,) probabilities summing to 1
    """
    mu: np.ndarray
    sigma: np.ndarray
    mode_probs: np.ndarray

    def __post_init__(self):
        if self.mu.shape != self.sigma.shape or self.mu.ndim != 4 or self.mu.shape[-1] != 2:
            raise PredictionError(f'mu {self.mu.shape} and sigma {self.sigma.shape} must both be (K, N, T, 2)')
        if self.mode_probs.shape != (self.mu.shape[0],):
            raise PredictionError(f'mode_probs {self.mode_probs.shape} must be ({self.mu.shape[0]},)')
        if abs(float(np.sum(self.mode_probs)) - 1.0) > 1e-6 or np.any(self.mode_probs < 0.0):
            raise PredictionError('mode_probs must be a probability vector')
        if np.any(~(self.sigma > 0.0)):
            raise PredictionError('sigma must be strictly positive')

    @property
    def num_modes(self) -> int:
        return self.mu.shape[0]

    @property
    def num_agents(self) -> int:
        return self.mu.shape[1]

    @property
    def horizon(self) -> int:
        return self.mu.shape[2]


@dataclass(eq=False)
class AgentHistory:
    """
    Joint history X of the agents surrounding the AV.

    Agents are the ``max_agents`` nearest to the AV at the current step, ordered by distance
    (ties by track index). History arrays end at the current step.

    Attributes:
        agent_indices (List[int]): Track indices in the source scenario
        states (np.ndarray): (N, T_h + 1, 4) x, y, heading, speed up to and including now
        lengths (np.ndarray): (N,) box lengths (m)
        widths (np.ndarray): (N,) box widths (m)
        lane_ids (List[Optional[str]]): Lane each agent follows, None when off-map
        lane_context (np.ndarray): (N, 10, 2) points ahead along each agent's lane
        av_state (np.ndarray): (4,) AV state now
        av_length (float): AV box length (m)
        av_width (float): AV box width (m)
        network (Optional[RoadNetwork]): Lane paths of the scene map
        future (Optional[np.ndarray]): (N, T_f, 2) ground-truth positions, if known
        scenario_id (str): Source scene identifier
    """
    agent_indices: List[int]
    states: np.ndarray
    lengths: np.ndarray
    widths: np.ndarray
    lane_ids: List[Optional[str]]
    lane_context: np.ndarray
    av_state: np.ndarray
    av_length: float
    av_width: float
    network: Optional[RoadNetwork] = None
    future: Optional[np.ndarray] = None
    scenario_id: str = ''
    kinds: List[str] = field(default_factory=list)

    @property
    def num_agents(self) -> int:
        return len(self.agent_indices)

    @property
    def current(self) -> np.ndarray:
        """(N, 4) current states."""
        return self.states[:, -1, :]

    @classmethod
    def from_scenario(
        cls,
        scenario: Scenario,
        max_agents: int = 10,
        network: Optional[RoadNetwork] = None,
        include_future: bool = True
    ) -> 'AgentHistory':
        """
        Build the joint history of the nearest agents of a scenario.

        Args:
            scenario: Source scene
            max_agents: Maximum number of surrounding agents N
            network: Lane paths of the scene map; built if omitted
            include_future: Attach the ground-truth future positions

        Returns:
            AgentHistory: History of at most ``max_agents`` agents
        """
        network = network or RoadNetwork(scenario.map)
        now = scenario.current_index
        av = scenario.av.as_array()
        others = scenario.other_indices()
        distances = [
            np.hypot(scenario.agents[i].x[now] - av[now, 0], scenario.agents[i].y[now] - av[now, 1])
            for i in others
        ]
        order = sorted(range(len(others)), key=lambda j: (distances[j], others[j]))
        chosen = [others[j] for j in order[:max_agents]]

        tracks = [scenario.agents[i].as_array() for i in chosen]
        states = np.stack([t[:now + 1] for t in tracks]) if tracks else np.zeros((0, now + 1, 4))
        future = None
        if include_future:
            future = np.stack([t[now + 1:, :2] for t in tracks]) if tracks else np.zeros((0, FUTURE_STEPS, 2))

        lane_ids = []
        lane_context = np.zeros((len(chosen), LANE_CONTEXT_POINTS, 2))
        for n, state in enumerate(states[:, -1] if len(chosen) else []):
            lane_id = network.match_lane(state[0], state[1], state[2])
            lane_ids.append(lane_id)
            lane_context[n] = _lane_context(network, lane_id, state)

        logger.debug(f'Scenario {scenario.scenario_id}: history of {len(chosen)} agents')
        return cls(
            agent_indices=chosen,
            states=states,
            lengths=np.array([scenario.agents[i].length for i in chosen]),
            widths=np.array([scenario.agents[i].width for i in chosen]),
            lane_ids=lane_ids,
            lane_context=lane_context,
            av_state=av[now].copy(),
            av_length=scenario.av.length,
            av_width=scenario.av.width,
            network=network,
            future=future,
            scenario_id=scenario.scenario_id,
            kinds=[scenario.agents[i].kind for i in chosen]
        )


def _lane_context(network: RoadNetwork, lane_id: Optional[str], state: np.ndarray) -> np.ndarray:
    """Points every 5 m ahead along the agent's lane, or along its heading when off-map."""
    offsets = LANE_CONTEXT_SPACING * np.arange(LANE_CONTEXT_POINTS)
    if lane_id is None:
        return state[None, :2] + offsets[:, None] * np.array([np.cos(state[2]), np.sin(state[2])])
    path = network.path(lane_id)
    s0, _, _ = project_points(path, state[:2])
    s = np.clip(float(s0) + offsets, 0.0, path.length)
    x, y, _, _ = path.interpolate(s)
    return np.stack([x, y], axis=-1)


class BasePredictor(ABC):
    """
    Abstract base class for conditional prediction backends.

    Concrete backends implement :meth:`_predict` for a non-empty scene; batch-capable
    backends may also override :meth:`_predict_batch` to share work across plans.

    Attributes:
        cfg (PredictorConfig): Predictor configuration
    """

    name = 'base'

    def __init__(self, cfg: Optional[PredictorConfig] = None):
        self.cfg = cfg or PredictorConfig()

    @abstractmethod
    def _predict(self, history: AgentHistory, plan: np.ndarray) -> PredictedFutures:
        """
        Predict futures of a non-empty history conditioned on one plan.

        Args:
            history: Joint agent history with at least one agent
            plan: (T_f, 4) AV plan states

        Returns:
            PredictedFutures for all agents of ``history``
        """
        pass

    def _predict_batch(self, history: AgentHistory, plans: List[np.ndarray]) -> List[PredictedFutures]:
        return [self._predict(history, plan) for plan in plans]

    def predict(self, history: AgentHistory, plan: PlanLike) -> PredictedFutures:
        """Predict the joint futures of ``history`` given one AV plan."""
        states = plan_states(plan)
        if history.num_agents == 0:
            return self.empty(states.shape[0])
        return self._predict(history, states)

    def predict_batch(self, history: AgentHistory, plans: Sequence[PlanLike]) -> List[PredictedFutures]:
        """Predict for many plans at once; elementwise equal to calling :meth:`predict` per plan."""
        states = [plan_states(p) for p in plans]
        if not states:
            return []
        if history.num_agents == 0:
            return [self.empty(s.shape[0]) for s in states]
        return self._predict_batch(history, states)

    def empty(self, horizon: int = FUTURE_STEPS) -> PredictedFutures:
        """K modes over zero agents with uniform probabilities."""
        k = self.cfg.num_modes
        return PredictedFutures(
            mu=np.zeros((k, 0, horizon, 2)),
            sigma=np.ones((k, 0, horizon, 2)),
            mode_probs=np.full(k, 1.0 / k)
        )

    def replicate_single_mode(self, mu: np.ndarray) -> PredictedFutures:
        """
        Wrap one deterministic joint future as K identical modes.

        Args:
            mu: (N, T_f, 2) positions

        Returns:
            PredictedFutures with uniform mode probabilities and sigma at the floor
        """
        k = self.cfg.num_modes
        mu = np.broadcast_to(mu, (k,) + mu.shape).copy()
        return PredictedFutures(
            mu=mu,
            sigma=np.full_like(mu, self.cfg.sigma_floor),
            mode_probs=np.full(k, 1.0 / k)
        )

