"""
Candidate behavior generation in the Frenet frame.

This module turns the AV's current state into a set of trajectory proposals. Each
proposal pairs a quartic longitudinal profile (reaching a target speed at the horizon)
with a quintic lateral profile (reaching a target lateral offset: the current lane or
a legally reachable neighbor lane), samples both at 10 Hz and converts the result back
to Cartesian poses along the AV's reference path.

Targets are the product of evenly spaced speeds in [0, speed limit] and the available
lateral offsets, which yields 10 to 30 proposals per scene with the default settings.

Example:
    >>> network = RoadNetwork(scenario.map, extension=100.0)
    >>> proposals = generate_proposals(scenario, network=network)
    >>> print(len(proposals), proposals[0].maneuver)
    10 keep
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from predictive_planner.errors import (
    CurvatureSingularity,
    NoValidProposal,
    ProjectionOutOfRange,
    SingularSystem
)
from predictive_planner.geometry import (
    ReferencePath,
    RoadNetwork,
    cartesian_to_frenet,
    frenet_to_cartesian_array
)
from predictive_planner.models import (
    GenerationConfig,
    LateralCoeffs,
    LongitudinalCoeffs,
    Maneuver,
    Scenario
)


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TrajectoryProposal:
    """
    One candidate AV behavior over the planning horizon.

    Attributes:
        states (np.ndarray): (T_f, 4) poses x, y, heading, speed at t = dt .. T
        lon (LongitudinalCoeffs): Quartic longitudinal profile
        lat (LateralCoeffs): Quintic lateral profile
        target_speed (float): Terminal longitudinal speed (m/s)
        target_offset (float): Terminal lateral offset on the reference path (m)
        maneuver (str): 'keep', 'change_left' or 'change_right'
        frenet_states (np.ndarray): (T_f, 6) columns s, s_dot, s_ddot, d, d_dot, d_ddot
        path_curvature (np.ndarray): (T_f,) reference-path curvature at each step's s
        path_heading (np.ndarray): (T_f,) reference-path tangent angle at each step's s
    """
    states: np.ndarray
    lon: LongitudinalCoeffs
    lat: LateralCoeffs
    target_speed: float
    target_offset: float
    maneuver: Maneuver
    frenet_states: np.ndarray
    path_curvature: np.ndarray
    path_heading: np.ndarray

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1, :2]

    def __len__(self) -> int:
        return len(self.states)


def solve_quartic(
    init: Sequence[float],
    target: Sequence[float],
    horizon: float
) -> LongitudinalCoeffs:
    """
    Solve the quartic s(t) that matches an initial state and a terminal speed/acceleration.

    The first three coefficients follow directly from the initial condition; the last two
    solve the 2x2 system of terminal speed and acceleration.

    Args:
        init: (s, s_dot, s_ddot) at t = 0
        target: (s_dot, s_ddot) at t = horizon
        horizon: Duration T (s)

    Returns:
        LongitudinalCoeffs: [a0, a1, a2, a3, a4]

    Raises:
        ValueError: If horizon <= 0 or inputs are not finite
        SingularSystem: If the terminal system cannot be solved
    """
    s0, v0, a0 = (float(v) for v in init)
    v_t, a_t = (float(v) for v in target)
    if horizon <= 0.0:
        raise ValueError(f'horizon must be positive, got {horizon}')
    if not np.all(np.isfinite([s0, v0, a0, v_t, a_t, horizon])):
        raise ValueError('quartic boundary conditions must be finite')

    T = horizon
    A = np.array([
        [3 * T ** 2, 4 * T ** 3],
        [6 * T, 12 * T ** 2]
    ])
    b = np.array([v_t - v0 - a0 * T, a_t - a0])
    try:
        a3, a4 = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as e:
        raise SingularSystem(f'quartic terminal system is singular for T={T}') from e
    return LongitudinalCoeffs(coeffs=[s0, v0, a0 / 2.0, float(a3), float(a4)])


def solve_quintic(
    init: Sequence[float],
    target: Sequence[float],
    horizon: float
) -> LateralCoeffs:
    """
    Solve the quintic d(t) that matches initial and terminal offset, velocity and acceleration.

    Args:
        init: (d, d_dot, d_ddot) at t = 0
        target: (d, d_dot, d_ddot) at t = horizon
        horizon: Duration T (s)

    Returns:
        LateralCoeffs: [b0, ..., b5]

    Raises:
        ValueError: If horizon <= 0 or inputs are not finite
        SingularSystem: If the terminal system cannot be solved
    """
    d0, v0, a0 = (float(v) for v in init)
    d_t, v_t, a_t = (float(v) for v in target)
    if horizon <= 0.0:
        raise ValueError(f'horizon must be positive, got {horizon}')
    if not np.all(np.isfinite([d0, v0, a0, d_t, v_t, a_t, horizon])):
        raise ValueError('quintic boundary conditions must be finite')

    T = horizon
    A = np.array([
        [T ** 3, T ** 4, T ** 5],
        [3 * T ** 2, 4 * T ** 3, 5 * T ** 4],
        [6 * T, 12 * T ** 2, 20 * T ** 3]
    ])
    b = np.array([
        d_t - (d0 + v0 * T + 0.5 * a0 * T ** 2),
        v_t - (v0 + a0 * T),
        a_t - a0
    ])
    try:
        b3, b4, b5 = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as e:
        raise SingularSystem(f'quintic terminal system is singular for T={T}') from e
    return LateralCoeffs(coeffs=[d0, v0, a0 / 2.0, float(b3), float(b4), float(b5)])


def enumerate_targets(
    path: ReferencePath,
    scenario: Scenario,
    network: Optional[RoadNetwork] = None,
    num_speeds: int = 10
) -> List[Tuple[float, float, Maneuver]]:
    """
    List the (target_speed, target_lateral_offset, maneuver) combinations for a scene.

    Speeds are evenly spaced over [0, speed limit] inclusive. Lateral offsets are 0 for
    keeping the lane plus the signed center-to-center distance to every neighbor lane
    the AV's lane declares.

    Args:
        path: Reference path of the AV's lane
        scenario: Scene whose map holds the lane adjacency
        network: Prebuilt lane paths of the scene map; built on demand if omitted
        num_speeds: Number of speed samples

    Returns:
        List of targets, keep-lane first, speeds ascending within each maneuver
    """
    speeds = np.linspace(0.0, path.speed_limit, num_speeds)
    offsets: List[Tuple[float, Maneuver]] = [(0.0, 'keep')]

    if path.lane_id is not None:
        network = network or RoadNetwork(scenario.map)
        av = scenario.state_at(scenario.av_index, scenario.current_index)
        s0 = cartesian_to_frenet(path, (av.x, av.y, av.heading, av.speed)).s
        for maneuver, offset in network.neighbor_offsets(path.lane_id, s0).items():
            offsets.append((offset, maneuver))

    return [(float(v), offset, maneuver) for offset, maneuver in offsets for v in speeds]


def _initial_frenet_state(scenario: Scenario, path: ReferencePath):
    track = scenario.av
    t = scenario.current_index
    accel = (track.speed[t] - track.speed[t - 1]) / scenario.timestep_s if t > 0 else 0.0
    return cartesian_to_frenet(path, (track.x[t], track.y[t], track.heading[t], track.speed[t], accel))


def _sample_proposal(
    path: ReferencePath,
    init,
    target_speed: float,
    target_offset: float,
    maneuver: Maneuver,
    cfg: GenerationConfig
) -> TrajectoryProposal:
    lon = solve_quartic((init.s, init.s_dot, init.s_ddot), (target_speed, 0.0), cfg.horizon)
    lat = solve_quintic((init.d, init.d_dot, init.d_ddot), (target_offset, 0.0, 0.0), cfg.horizon)

    steps = int(round(cfg.horizon / cfg.dt))
    t = cfg.dt * np.arange(1, steps + 1)
    s = lon.value(t)
    s_dot = lon.value(t, 1)
    s_ddot = lon.value(t, 2)

    # The vehicle never reverses: it rests while the polynomial speed is negative and
    # advances by the polynomial's forward increments once it moves again
    stopped = s_dot < 0.0
    if np.any(stopped):
        s_dot = np.where(stopped, 0.0, s_dot)
        s_ddot = np.where(stopped, 0.0, s_ddot)
        s = init.s + np.cumsum(np.maximum(np.diff(s, prepend=init.s), 0.0))

    d = lat.value(t)
    d_dot = lat.value(t, 1)
    d_ddot = lat.value(t, 2)

    x, y, heading, speed, _ = frenet_to_cartesian_array(path, s, s_dot, d, d_dot, s_ddot, d_ddot)
    _, _, path_heading, path_curvature = path.interpolate(s)

    return TrajectoryProposal(
        states=np.stack([x, y, heading, speed], axis=-1),
        lon=lon,
        lat=lat,
        target_speed=target_speed,
        target_offset=target_offset,
        maneuver=maneuver,
        frenet_states=np.stack([s, s_dot, s_ddot, d, d_dot, d_ddot], axis=-1),
        path_curvature=np.asarray(path_curvature),
        path_heading=np.asarray(path_heading)
    )


def av_reference_path(scenario: Scenario, network: RoadNetwork) -> ReferencePath:
    """
    Reference path of the lane the AV currently drives in.

    Raises:
        ProjectionOutOfRange: If no lane of the map matches the AV pose
    """
    av = scenario.state_at(scenario.av_index, scenario.current_index)
    lane_id = network.match_lane(av.x, av.y, av.heading)
    if lane_id is None:
        raise ProjectionOutOfRange(
            f'scenario {scenario.scenario_id}: AV at ({av.x:.1f}, {av.y:.1f}) matches no lane'
        )
    return network.path(lane_id)


def generate_proposals(
    scenario: Scenario,
    path: Optional[ReferencePath] = None,
    network: Optional[RoadNetwork] = None,
    cfg: Optional[GenerationConfig] = None
) -> List[TrajectoryProposal]:
    """
    Generate one trajectory proposal per target for the AV of ``scenario``.

    Args:
        scenario: Scene with the AV's current state at ``scenario.current_index``
        path: AV reference path; defaults to the path of the lane matched to the AV
        network: Lane paths of the scene map; built with ``cfg.path_extension`` if omitted
        cfg: Generation settings

    Returns:
        List[TrajectoryProposal]: Proposals in target order

    Raises:
        NoValidProposal: If every candidate leaves the valid region of the path
    """
    cfg = cfg or GenerationConfig()
    network = network or RoadNetwork(scenario.map, extension=cfg.path_extension)
    path = path or av_reference_path(scenario, network)
    init = _initial_frenet_state(scenario, path)

    targets = enumerate_targets(path, scenario, network=network, num_speeds=cfg.num_speeds)
    proposals = []
    for target_speed, target_offset, maneuver in targets:
        try:
            proposals.append(_sample_proposal(path, init, target_speed, target_offset, maneuver, cfg))
        except (CurvatureSingularity, ProjectionOutOfRange) as e:
            logger.debug(f'Dropping proposal ({maneuver}, {target_speed:.2f} m/s): {e}')

    if not proposals:
        raise NoValidProposal(
            f'scenario {scenario.scenario_id}: all {len(targets)} candidate trajectories were rejected'
        )
    logger.debug(f'Generated {len(proposals)} proposals from {len(targets)} targets')
    return proposals
