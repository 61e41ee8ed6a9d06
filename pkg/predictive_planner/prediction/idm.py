"""
Plan-reactive intelligent driver model (IDM) prediction.

Every agent that follows a lane is rolled out along that lane's reference path at a constant
lateral offset, with its longitudinal acceleration given by the IDM against the nearest
leader in its lane. Each agent drives towards a desired speed estimated from its own
history and capped at the lane speed limit. The AV's planned position at each step is a
leader candidate, so surrounding traffic reacts to the plan being evaluated: a braking plan
slows the vehicles behind the AV. Agents without a lane fall back to CTRV.

All agents are updated synchronously at 10 Hz: accelerations are computed from the
state at step t, then every agent advances.

Example:
    >>> predictor = IdmReactivePredictor(PredictorConfig(backend='idm_reactive'))
    >>> futures = predictor.predict(history, proposal)
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from predictive_planner.geometry import ReferencePath, frenet_to_cartesian_array, project_points
from predictive_planner.models import DT, FeatureConfig, IdmParams, PredictorConfig, Scenario
from predictive_planner.prediction.base import AgentHistory, BasePredictor, PredictedFutures, plan_states
from predictive_planner.prediction.ctrv import ctrv_rollout, estimate_yaw_rate


logger = logging.getLogger(__name__)

MIN_GAP = 0.1


def idm_acceleration(
    speed,
    desired_speed,
    gap=np.inf,
    approach_rate=0.0,
    params: Optional[IdmParams] = None
):
    """
    IDM acceleration, clipped to [-max_decel, max_accel].

    Args:
        speed: Own speed v (m/s)
        desired_speed: Free-road target speed v0 (m/s)
        gap: Bumper-to-bumper distance to the leader (m); inf on a free road
        approach_rate: v - v_leader (m/s)
        params: IDM parameters

    Returns:
        Acceleration (m/s^2), scalar or array like the inputs
    """
    params = params or IdmParams()
    speed = np.maximum(np.asarray(speed, dtype=float), 0.0)
    desired_speed = np.maximum(np.asarray(desired_speed, dtype=float), MIN_GAP)
    gap = np.maximum(np.asarray(gap, dtype=float), MIN_GAP)

    free_road = (speed / desired_speed) ** params.exponent
    desired_gap = params.min_gap + np.maximum(
        0.0,
        speed * params.time_headway
        + speed * approach_rate / (2.0 * np.sqrt(params.max_accel * params.comfortable_decel))
    )
    interaction = (desired_gap / gap) ** 2
    accel = params.max_accel * (1.0 - free_road - interaction)
    return np.clip(accel, -params.max_decel, params.max_accel)


def estimate_desired_speed(
    speeds,
    speed_limit: float,
    params: Optional[IdmParams] = None,
    dt: float = DT
) -> float:
    """
    Free-road target speed of an agent, inferred from its recorded speeds.

    An agent still speeding up has its last acceleration matched to the IDM free-road term
    a = a_max * (1 - (v / v0)^delta) and solved for v0. Otherwise the highest recorded speed
    is kept. The estimate never exceeds the lane speed limit.

    Args:
        speeds: Recorded speeds up to and including now (m/s)
        speed_limit: Speed limit of the agent's lane (m/s)
        params: IDM parameters
        dt: Sample spacing (s)

    Returns:
        float: Desired speed v0 (m/s)
    """
    params = params or IdmParams()
    speeds = np.maximum(np.asarray(speeds, dtype=float), 0.0)
    desired = float(speeds.max())
    if speeds.size >= 2:
        previous = speeds[-2]
        ratio = 1.0 - (speeds[-1] - previous) / (dt * params.max_accel)
        if ratio <= 0.0:
            return float(speed_limit)
        if ratio < 1.0 and previous > 0.0:
            desired = max(desired, previous / ratio ** (1.0 / params.exponent))
    return float(min(desired, speed_limit))


class IdmReactivePredictor(BasePredictor):
    """
    Lane-following IDM rollout that treats the AV plan as a potential leader.

    Attributes:
        cfg (PredictorConfig): Predictor configuration
        params (IdmParams): IDM parameters
        lane_half_width (float): Lateral window for counting the AV as in-lane (m)
    """

    name = 'idm_reactive'

    def __init__(
        self,
        cfg: Optional[PredictorConfig] = None,
        params: Optional[IdmParams] = None,
        lane_half_width: float = FeatureConfig().lane_half_width
    ):
        super().__init__(cfg)
        self.params = params or IdmParams()
        self.lane_half_width = lane_half_width

    def _predict(self, history: AgentHistory, plan: np.ndarray) -> PredictedFutures:
        return self.replicate_single_mode(self.rollout(history, plan)[..., :2])

    def rollout(self, history: AgentHistory, plan: np.ndarray, dt: float = DT) -> np.ndarray:
        """
        Simulate every agent of ``history`` against ``plan``.

        Args:
            history: Joint agent history
            plan: (T_f, 4) AV plan states
            dt: Step length (s)

        Returns:
            np.ndarray: (N, T_f, 4) predicted x, y, heading, speed
        """
        steps = plan.shape[0]
        current = history.current
        states = np.zeros((history.num_agents, steps, 4))

        followers: Dict[str, List[int]] = {}
        for n, lane_id in enumerate(history.lane_ids):
            if lane_id is None or history.network is None:
                states[n] = ctrv_rollout(current[n], estimate_yaw_rate(history.states[n, :, 2]), steps, dt)
            else:
                followers.setdefault(lane_id, []).append(n)

        for lane_id, members in followers.items():
            path = history.network.path(lane_id)
            states[members] = self._rollout_lane(path, history, members, plan, dt)
        return states

    def _av_track_on_path(self, path: ReferencePath, history: AgentHistory, plan: np.ndarray) -> Tuple:
        """AV arc length, in-lane flag and speed at t = 0 .. T_f - 1 on ``path``."""
        xy = np.vstack([history.av_state[None, :2], plan[:-1, :2]])
        speed = np.concatenate([[history.av_state[3]], plan[:-1, 3]])
        s, d, _ = project_points(path, xy)
        in_lane = np.abs(d) < self.lane_half_width
        return s, in_lane, speed

    def _rollout_lane(
        self,
        path: ReferencePath,
        history: AgentHistory,
        members: List[int],
        plan: np.ndarray,
        dt: float
    ) -> np.ndarray:
        params = self.params
        current = history.current[members]
        s, d, _ = project_points(path, current[:, :2])
        v = current[:, 3].copy()
        lengths = history.lengths[members]
        desired = np.array([
            estimate_desired_speed(history.states[n, :, 3], path.speed_limit, params, dt) for n in members
        ])
        av_s, av_in_lane, av_speed = self._av_track_on_path(path, history, plan)

        steps = plan.shape[0]
        s_out = np.zeros((len(members), steps))
        v_out = np.zeros((len(members), steps))
        for t in range(steps):
            # Leader candidates: lane members plus the AV while it is in this lane
            cand_s = s.copy()
            cand_v = v.copy()
            cand_len = lengths.copy()
            if av_in_lane[t]:
                cand_s = np.append(cand_s, av_s[t])
                cand_v = np.append(cand_v, av_speed[t])
                cand_len = np.append(cand_len, history.av_length)

            ahead = cand_s[None, :] - s[:, None]
            ahead[np.arange(len(members)), np.arange(len(members))] = np.inf
            ahead = np.where((ahead > 0.0) & (ahead <= params.lookahead), ahead, np.inf)
            leader = np.argmin(ahead, axis=1)
            has_leader = np.isfinite(ahead[np.arange(len(members)), leader])

            gap = np.where(
                has_leader,
                ahead[np.arange(len(members)), leader] - 0.5 * (lengths + cand_len[leader]),
                np.inf
            )
            approach = np.where(has_leader, v - cand_v[leader], 0.0)
            accel = idm_acceleration(v, desired, gap, approach, params)

            v_next = np.maximum(v + accel * dt, 0.0)
            s = s + 0.5 * (v + v_next) * dt
            v = v_next
            s_out[:, t] = s
            v_out[:, t] = v

        if np.any(s_out > path.length):
            logger.debug(f'IDM rollout reached the end of lane {path.lane_id}; holding at the path end')
        s_out = np.minimum(s_out, path.length)
        x, y, heading, _, _ = frenet_to_cartesian_array(
            path, s_out, v_out, np.repeat(d[:, None], steps, axis=1), np.zeros_like(s_out)
        )
        return np.stack([x, y, heading, v_out], axis=-1)


def idm_reactive_rollout(
    scenario: Scenario,
    plan,
    idm_params: Optional[IdmParams] = None,
    max_agents: int = 10
) -> np.ndarray:
    """
    Roll out the surrounding agents of a scenario against one AV plan.

    Args:
        scenario: Source scene
        plan: TrajectoryProposal or (T_f, 4) plan states
        idm_params: IDM parameters
        max_agents: Number of nearest agents simulated

    Returns:
        np.ndarray: (N, T_f, 4) x, y, heading, speed of the agents in
        :meth:`AgentHistory.from_scenario` order
    """
    history = AgentHistory.from_scenario(scenario, max_agents, include_future=False)
    return IdmReactivePredictor(params=idm_params).rollout(history, plan_states(plan))
