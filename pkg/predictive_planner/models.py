"""
Pydantic models for the behavior-planning toolkit.

This module defines the typed records that flow between the pipeline stages and the
typed configuration sections that parameterise them. It uses Pydantic for validation
and serialization, which gives the scenario file format its schema: unknown fields are
rejected, non-finite numbers are rejected, and cross-field invariants (one clock for all
tracks, exactly one AV, symmetric lane adjacency) are checked on load.

Key models include:
- Scenario, MapModel, Lane, Crosswalk, AgentTrack: a 7-second driving scene
- RawTrackSet, RawTrack: long recordings with per-step validity, cut into scenarios
- AgentState: the physical state of one agent at one timestep
- LongitudinalCoeffs, LateralCoeffs: Frenet polynomial coefficients
- PredictorConfig, FeatureConfig, IrlTrainConfig, CmpTrainConfig, IdmParams,
  GenerationConfig, EvalThresholds, DataConfig: typed configuration sections
- EvalReport: aggregated planning and prediction metrics

Example:
    scenario = Scenario.model_validate_json(line)
    av = scenario.state_at(scenario.av_index, scenario.current_index)
    print(av.speed)
"""

import math
from typing import List, Literal, Optional

import numpy as np
from numpy.polynomial import polynomial as P
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


DT = 0.1
HISTORY_STEPS = 20
FUTURE_STEPS = 50
PLAN_STATE_DIM = 4
WINDOW_LENGTH = HISTORY_STEPS + FUTURE_STEPS + 1
HORIZON = FUTURE_STEPS * DT

AgentKind = Literal['vehicle', 'pedestrian', 'cyclist']
Maneuver = Literal['keep', 'change_left', 'change_right']

_STRICT = ConfigDict(extra='forbid', allow_inf_nan=False)


class AgentState(BaseModel):
    """
    Physical state of one traffic participant at one timestep.

    Attributes:
        x (float): Position east (m)
        y (float): Position north (m)
        heading (float): Yaw angle (rad)
        speed (float): Scalar speed (m/s), never negative
        length (float): Bounding box length (m)
        width (float): Bounding box width (m)
        kind (str): 'vehicle', 'pedestrian' or 'cyclist'
    """
    model_config = _STRICT

    x: float
    y: float
    heading: float
    speed: float = Field(..., ge=0.0)
    length: float = Field(..., gt=0.0)
    width: float = Field(..., gt=0.0)
    kind: AgentKind = 'vehicle'


class Lane(BaseModel):
    """
    A lane centerline with its speed limit and left/right adjacency.

    Attributes:
        id (str): Unique lane identifier within the map
        centerline (List[List[float]]): Ordered (x, y) points in meters
        speed_limit (float): Legal speed on the lane (m/s)
        left_neighbor (Optional[str]): Lane reachable by a legal change to the left
        right_neighbor (Optional[str]): Lane reachable by a legal change to the right
    """
    model_config = _STRICT

    id: str
    centerline: List[List[float]] = Field(..., description="Ordered (x, y) points of the lane centerline")
    speed_limit: float = Field(..., gt=0.0)
    left_neighbor: Optional[str] = None
    right_neighbor: Optional[str] = None

    @field_validator('centerline')
    @classmethod
    def _check_centerline(cls, value: List[List[float]]) -> List[List[float]]:
        if len(value) < 2:
            raise ValueError('centerline needs at least 2 points')
        if any(len(p) != 2 for p in value):
            raise ValueError('centerline points must be (x, y) pairs')
        pts = np.asarray(value, dtype=float)
        if np.sum(np.hypot(*np.diff(pts, axis=0).T)) < 1.0:
            raise ValueError('centerline is shorter than 1 m')
        return value

    @property
    def points(self) -> np.ndarray:
        return np.asarray(self.centerline, dtype=float)


class Crosswalk(BaseModel):
    model_config = _STRICT

    polygon: List[List[float]] = Field(..., description="Crosswalk outline as (x, y) points")


class MapModel(BaseModel):
    """
    Map of a scenario: lanes with adjacency plus optional crosswalk polygons.

    Adjacency must be symmetric: if lane A names B as its left neighbor, B must name A as
    its right neighbor.

    Attributes:
        lanes (List[Lane]): All lanes of the scene
        crosswalks (List[Crosswalk]): Crosswalk outlines, used for rendering only
    """
    model_config = _STRICT

    lanes: List[Lane] = Field(default_factory=list)
    crosswalks: List[Crosswalk] = Field(default_factory=list)

    @model_validator(mode='after')
    def _check_adjacency(self) -> 'MapModel':
        by_id = {lane.id: lane for lane in self.lanes}
        if len(by_id) != len(self.lanes):
            raise ValueError('lane ids must be unique')
        for lane in self.lanes:
            if lane.left_neighbor is not None:
                other = by_id.get(lane.left_neighbor)
                if other is None or other.right_neighbor != lane.id:
                    raise ValueError(f'lane adjacency is not symmetric for lane {lane.id} (left)')
            if lane.right_neighbor is not None:
                other = by_id.get(lane.right_neighbor)
                if other is None or other.left_neighbor != lane.id:
                    raise ValueError(f'lane adjacency is not symmetric for lane {lane.id} (right)')
        return self

    def lane(self, lane_id: str) -> Lane:
        for lane in self.lanes:
            if lane.id == lane_id:
                return lane
        raise KeyError(lane_id)


class AgentTrack(BaseModel):
    """
    Per-step state sequence of one agent over a scenario window.

    Attributes:
        id (str): Agent identifier
        kind (str): Agent type
        length (float): Bounding box length (m)
        width (float): Bounding box width (m)
        x, y, heading, speed (List[float]): Per-step arrays sharing the scenario clock
    """
    model_config = _STRICT

    id: str
    kind: AgentKind = 'vehicle'
    length: float = Field(..., gt=0.0)
    width: float = Field(..., gt=0.0)
    x: List[float]
    y: List[float]
    heading: List[float]
    speed: List[float]

    @model_validator(mode='after')
    def _check_arrays(self) -> 'AgentTrack':
        n = len(self.x)
        if not (len(self.y) == len(self.heading) == len(self.speed) == n):
            raise ValueError(f'agent {self.id}: x/y/heading/speed arrays differ in length')
        if any(v < 0.0 for v in self.speed):
            raise ValueError(f'agent {self.id}: negative speed')
        return self

    def as_array(self) -> np.ndarray:
        """Return the track as an (L, 4) array of x, y, heading, speed."""
        return np.stack([self.x, self.y, self.heading, self.speed], axis=-1).astype(float)

    def state_at(self, t: int) -> AgentState:
        return AgentState(
            x=self.x[t], y=self.y[t], heading=self.heading[t], speed=self.speed[t],
            length=self.length, width=self.width, kind=self.kind
        )


class Scenario(BaseModel):
    """
    A 7-second driving scene: 2 s of history, the current step and 5 s of future.

    All tracks share one clock of length ``WINDOW_LENGTH`` at ``timestep_s`` spacing; the
    current step is index ``HISTORY_STEPS``. Exactly one agent, ``av_index``, is the
    autonomous vehicle; its future is the demonstration.

    Attributes:
        scenario_id (str): Identifier used in reports
        map (MapModel): Lanes and crosswalks
        agents (List[AgentTrack]): All tracks including the AV
        av_index (int): Index of the AV in ``agents``
        timestep_s (float): Sampling period, 0.1 s
    """
    model_config = _STRICT

    scenario_id: str = ''
    map: MapModel
    agents: List[AgentTrack]
    av_index: int
    timestep_s: float = DT

    @model_validator(mode='after')
    def _check_scene(self) -> 'Scenario':
        if not 0 <= self.av_index < len(self.agents):
            raise ValueError(f'av_index {self.av_index} out of range for {len(self.agents)} agents')
        for agent in self.agents:
            if len(agent.x) != WINDOW_LENGTH:
                raise ValueError(
                    f'agent {agent.id}: track has {len(agent.x)} steps, expected {WINDOW_LENGTH}'
                )
        if not math.isclose(self.timestep_s, DT, rel_tol=1e-9):
            raise ValueError(f'timestep_s must be {DT}')
        return self

    @property
    def current_index(self) -> int:
        return HISTORY_STEPS

    @property
    def av(self) -> AgentTrack:
        return self.agents[self.av_index]

    @property
    def speed_limit(self) -> float:
        return max(lane.speed_limit for lane in self.map.lanes) if self.map.lanes else 0.0

    def state_at(self, agent_index: int, t: int) -> AgentState:
        return self.agents[agent_index].state_at(t)

    def av_future(self) -> np.ndarray:
        """Ground-truth AV future as a (FUTURE_STEPS, 4) array of x, y, heading, speed."""
        return self.av.as_array()[self.current_index + 1:]

    def other_indices(self) -> List[int]:
        return [i for i in range(len(self.agents)) if i != self.av_index]


class RawTrack(BaseModel):
    """A long recording of one agent with a validity flag per step."""
    model_config = _STRICT

    id: str
    kind: AgentKind = 'vehicle'
    length: float = Field(..., gt=0.0)
    width: float = Field(..., gt=0.0)
    x: List[float]
    y: List[float]
    heading: List[float]
    speed: List[float]
    valid: List[bool]

    @model_validator(mode='after')
    def _check_arrays(self) -> 'RawTrack':
        n = len(self.x)
        if not (len(self.y) == len(self.heading) == len(self.speed) == len(self.valid) == n):
            raise ValueError(f'track {self.id}: arrays differ in length')
        return self


class RawTrackSet(BaseModel):
    """A long recording (e.g. 20 s) of a scene, to be cut into scenario windows."""
    model_config = _STRICT

    scene_id: str = ''
    map: MapModel
    tracks: List[RawTrack]
    av_index: int
    timestep_s: float = DT

    @model_validator(mode='after')
    def _check_clock(self) -> 'RawTrackSet':
        if not 0 <= self.av_index < len(self.tracks):
            raise ValueError(f'av_index {self.av_index} out of range')
        lengths = {len(t.x) for t in self.tracks}
        if len(lengths) > 1:
            raise ValueError('all tracks must share one clock')
        return self

    @property
    def num_steps(self) -> int:
        return len(self.tracks[0].x) if self.tracks else 0


class _PolynomialCoeffs(BaseModel):
    model_config = ConfigDict(extra='forbid', allow_inf_nan=False, frozen=True)

    coeffs: List[float]

    def value(self, t, derivative: int = 0):
        """Evaluate the polynomial (or a derivative of it) at time(s) ``t``."""
        c = np.asarray(self.coeffs, dtype=float)
        if derivative:
            c = P.polyder(c, derivative)
        return P.polyval(t, c)


class LongitudinalCoeffs(_PolynomialCoeffs):
    """
    Quartic longitudinal profile s(t) = a0 + a1 t + a2 t^2 + a3 t^3 + a4 t^4.

    Attributes:
        coeffs (List[float]): [a0, a1, a2, a3, a4] in SI units (s in m, t in s)
    """

    @field_validator('coeffs')
    @classmethod
    def _five(cls, value: List[float]) -> List[float]:
        if len(value) != 5:
            raise ValueError('a quartic has 5 coefficients')
        return value


class LateralCoeffs(_PolynomialCoeffs):
    """
    Quintic lateral profile d(t) = b0 + b1 t + ... + b5 t^5.

    Attributes:
        coeffs (List[float]): [b0, ..., b5]
    """

    @field_validator('coeffs')
    @classmethod
    def _six(cls, value: List[float]) -> List[float]:
        if len(value) != 6:
            raise ValueError('a quintic has 6 coefficients')
        return value


class PredictorConfig(BaseModel):
    """
    Configuration of the conditional prediction module.

    Attributes:
        backend (str): 'ctrv', 'idm_reactive', 'learned' or 'oracle'
        fusion (str): Where the learned model injects the AV plan: 'early', 'late' or 'none'
        num_modes (int): Number of GMM modes K
        max_agents (int): Maximum number of surrounding agents N
        embed_dim (int): Embedding width of the learned model
        rng_seed (int): Seed for parameter initialisation
        sigma_floor (float): Lower clamp on predicted standard deviations (m)
        sigma_ceiling (float): Upper clamp on predicted standard deviations (m)
    """
    model_config = ConfigDict(extra='forbid')

    backend: Literal['ctrv', 'idm_reactive', 'learned', 'oracle'] = 'ctrv'
    fusion: Literal['early', 'late', 'none'] = 'early'
    num_modes: int = Field(3, ge=1, description="K, number of joint future modes")
    max_agents: int = Field(10, ge=1, description="N, number of surrounding agents")
    embed_dim: int = Field(32, ge=8)
    rng_seed: int = 0
    sigma_floor: float = Field(1e-2, gt=0.0)
    sigma_ceiling: float = Field(1e2, gt=0.0)


class FeatureConfig(BaseModel):
    """
    Normalizers and geometric thresholds for trajectory features.

    Attributes:
        a_lon_max (float): Longitudinal acceleration normalizer (m/s^2)
        j_max (float): Jerk normalizer (m/s^3)
        a_lat_max (float): Lateral acceleration normalizer (m/s^2)
        lane_half_width (float): Corridor half width for leader selection (m)
        v_floor (float): Speed floor in the time-headway denominator (m/s)
        circles_per_vehicle (int): Circles covering each bounding box
        gap_floor (float): Floor on the bumper gap to the leader (m)
        max_headway (float): Headway of a mode without a leader when another mode has one (s)
        max_lateral_distance (float): Lateral gap of a mode without side vehicles (m)
        normalize_by_mode_count (bool): Apply the 1/K factor of the interaction features
    """
    model_config = ConfigDict(extra='forbid')

    a_lon_max: float = Field(5.0, gt=0.0)
    j_max: float = Field(10.0, gt=0.0)
    a_lat_max: float = Field(5.0, gt=0.0)
    lane_half_width: float = Field(1.75, gt=0.0)
    v_floor: float = Field(0.1, gt=0.0)
    circles_per_vehicle: int = Field(3, gt=0)
    gap_floor: float = Field(0.1, gt=0.0)
    max_headway: float = Field(5.0, gt=0.0)
    max_lateral_distance: float = Field(5.0, gt=0.0)
    normalize_by_mode_count: bool = True


class IrlTrainConfig(BaseModel):
    """Hyperparameters of maximum-entropy IRL training."""
    model_config = ConfigDict(extra='forbid')

    learning_rate: float = Field(1e-2, gt=0.0)
    lr_decay: float = Field(0.9, gt=0.0)
    decay_every: int = Field(50, ge=1)
    weight_decay: float = Field(1e-2, ge=0.0)
    batch_size: int = Field(64, ge=1)
    steps: int = Field(500, ge=1)
    rng_seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


class CmpTrainConfig(BaseModel):
    """
    Hyperparameters of conditional-prediction training.

    ``steps`` overrides the epoch-derived step count, which is how toy sets scale down.
    """
    model_config = ConfigDict(extra='forbid')

    learning_rate: float = Field(2e-4, gt=0.0)
    lr_decay: float = Field(0.5, gt=0.0)
    decay_every_epochs: int = Field(5, ge=1)
    batch_size: int = Field(32, ge=1)
    epochs: int = Field(30, ge=1)
    steps: Optional[int] = Field(None, ge=1)
    grad_clip: float = Field(5.0, gt=0.0)
    rng_seed: int = 0
    log_every: int = Field(50, ge=1)


class IdmParams(BaseModel):
    """
    Intelligent driver model parameters.

    Attributes:
        min_gap (float): Desired standstill gap s0 (m)
        time_headway (float): Desired time headway T (s)
        max_accel (float): Maximum acceleration a (m/s^2)
        comfortable_decel (float): Comfortable deceleration b (m/s^2)
        exponent (float): Free-road exponent delta
        max_decel (float): Physical braking limit applied to the IDM output (m/s^2)
        lookahead (float): Leader search range (m)
    """
    model_config = ConfigDict(extra='forbid')

    min_gap: float = 2.0
    time_headway: float = 1.5
    max_accel: float = 1.5
    comfortable_decel: float = 2.0
    exponent: float = 4.0
    max_decel: float = 9.0
    lookahead: float = 100.0


class GenerationConfig(BaseModel):
    """Behavior generation settings."""
    model_config = ConfigDict(extra='forbid')

    num_speeds: int = Field(10, ge=2)
    horizon: float = Field(HORIZON, gt=0.0)
    dt: float = Field(DT, gt=0.0)
    path_extension: float = Field(100.0, ge=0.0, description="Straight extension appended to lane ends (m)")


class EvalThresholds(BaseModel):
    """Thresholds of the planning metrics, written into every report header."""
    model_config = ConfigDict(extra='forbid')

    match_radius: float = Field(3.0, gt=0.0)
    speed_deadband: float = Field(0.5, ge=0.0)
    lane_threshold: float = Field(1.75, gt=0.0)
    top_k: int = Field(3, ge=1)


class DataConfig(BaseModel):
    """Window splitting and filtering settings."""
    model_config = ConfigDict(extra='forbid')

    history_steps: int = HISTORY_STEPS
    future_steps: int = FUTURE_STEPS
    stride: int = Field(50, ge=1)
    max_agents: int = Field(10, ge=1)
    min_av_speed: float = 3.0


class EvalReport(BaseModel):
    """
    Aggregated evaluation results over a dataset.

    Attributes:
        min_ade (float): Mean over scenarios of the joint minADE (m)
        min_fde (float): Mean over scenarios of the joint minFDE (m)
        plan_min_fde (float): Mean over scenarios of the top-k planning minFDE (m)
        top3_accuracy (float): Fraction of scenarios with a top-k endpoint match
        speed_intent_accuracy (float): Fraction with the correct speed intention
        lane_intent_accuracy (float): Fraction with the correct lane intention
        scenario_count (int): Number of evaluated scenarios
    """
    min_ade: float = Field(..., ge=0.0)
    min_fde: float = Field(..., ge=0.0)
    plan_min_fde: float = Field(..., ge=0.0)
    top3_accuracy: float = Field(..., ge=0.0, le=1.0)
    speed_intent_accuracy: float = Field(..., ge=0.0, le=1.0)
    lane_intent_accuracy: float = Field(..., ge=0.0, le=1.0)
    scenario_count: int = Field(..., ge=0)
