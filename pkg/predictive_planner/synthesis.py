"""
Seeded synthetic scenario generator.

Each template builds a small map and places the AV and a few surrounding vehicles on it
with randomized gaps, speeds and lane assignments. Every vehicle, the AV included, is then
driven for the whole 7-second window by the intelligent driver model along its lane, with
scripted lane changes following a quintic lateral profile. The AV's recorded future is
therefore a kinematically consistent demonstration.

Templates:
- car_follow: the AV follows one leader on a single straight lane
- cut_in: a vehicle from the left lane cuts in front of the AV while another follows the AV
- lane_change: the AV leaves its lane to overtake a slow leader
- intersection_yield: the AV waits at a crossing for a vehicle on the crossing lane
- curved_road: the AV follows a leader through a left-hand arc

Scenario ``i`` of a call draws from ``numpy.random.default_rng([seed, i])``, so the same
seed reproduces the same scenarios and scenarios can be generated in any order.

Example:
    >>> scenarios = synthesize_scenarios('cut_in', count=100, seed=7)
    >>> save_scenarios(scenarios, 'cut_in.jsonl')
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from predictive_planner.generation import solve_quintic
from predictive_planner.geometry import ReferencePath, RoadNetwork, frenet_to_cartesian_array, project_points
from predictive_planner.models import (
    DT,
    WINDOW_LENGTH,
    AgentTrack,
    Crosswalk,
    FeatureConfig,
    IdmParams,
    Lane,
    MapModel,
    Scenario
)
from predictive_planner.prediction.idm import idm_acceleration


logger = logging.getLogger(__name__)

LANE_WIDTH = 3.5
LANE_LENGTH = 300.0
POINT_SPACING = 5.0
PATH_EXTENSION = 100.0
DECIMALS = 6


@dataclass
class _LateralManeuver:
    """Lateral offset moving from ``start_offset`` to ``end_offset`` over [start, start + duration]."""
    start_offset: float = 0.0
    end_offset: float = 0.0
    start: float = 0.0
    duration: float = 1.0

    def __post_init__(self):
        self._profile = solve_quintic((self.start_offset, 0.0, 0.0), (self.end_offset, 0.0, 0.0), self.duration)

    def at(self, t: float) -> Tuple[float, float]:
        if t <= self.start:
            return self.start_offset, 0.0
        if t >= self.start + self.duration:
            return self.end_offset, 0.0
        tau = t - self.start
        return float(self._profile.value(tau)), float(self._profile.value(tau, 1))


@dataclass
class _Vehicle:
    id: str
    lane_id: str
    s: float
    speed: float
    length: float
    width: float
    desired_speed: Optional[float] = None
    lateral: _LateralManeuver = field(default_factory=_LateralManeuver)
    # (stop arc length on the own lane, index of the vehicle waited for, its arc length once clear)
    stops: List[Tuple[float, int, float]] = field(default_factory=list)


def _straight(start: Tuple[float, float], heading: float, length: float = LANE_LENGTH) -> List[List[float]]:
    steps = np.arange(0.0, length + 1e-9, POINT_SPACING)
    return [
        [round(start[0] + s * np.cos(heading), DECIMALS), round(start[1] + s * np.sin(heading), DECIMALS)]
        for s in steps
    ]


def _left_arc(straight: float, radius: float, length: float = LANE_LENGTH) -> List[List[float]]:
    """Straight approach along +x, a quarter turn to the left, then straight north."""
    points = [[float(x), 0.0] for x in np.arange(-straight, 0.0, POINT_SPACING)]
    angles = np.arange(0.0, np.pi / 2, POINT_SPACING / radius)
    points += [[round(radius * np.sin(a), DECIMALS), round(radius * (1.0 - np.cos(a)), DECIMALS)] for a in angles]
    exit_length = max(length - straight - radius * np.pi / 2, POINT_SPACING)
    points += _straight((radius, radius), np.pi / 2, exit_length)
    return points


def _two_lane_map(speed_limit: float) -> MapModel:
    return MapModel(lanes=[
        Lane(id='right', centerline=_straight((0.0, 0.0), 0.0), speed_limit=speed_limit, left_neighbor='left'),
        Lane(id='left', centerline=_straight((0.0, LANE_WIDTH), 0.0), speed_limit=speed_limit, right_neighbor='right')
    ])


def _vehicle_size(rng: np.random.Generator) -> Tuple[float, float]:
    return round(float(rng.uniform(4.2, 5.0)), 3), round(float(rng.uniform(1.8, 2.0)), 3)


def _simulate(
    map_model: MapModel,
    vehicles: List[_Vehicle],
    params: IdmParams,
    lane_half_width: float
) -> List[np.ndarray]:
    """
    Drive every vehicle with the IDM for a full window.

    At each step every vehicle looks for the nearest vehicle ahead on its own lane path
    (projected, within ``lane_half_width`` of its lateral offset) and for active stop points;
    accelerations are computed from the step's state and all vehicles advance together.

    Returns:
        One (WINDOW_LENGTH, 4) array of x, y, heading, speed per vehicle
    """
    network = RoadNetwork(map_model, extension=PATH_EXTENSION)
    paths: List[ReferencePath] = [network.path(v.lane_id) for v in vehicles]
    s = np.array([v.s for v in vehicles])
    speed = np.array([v.speed for v in vehicles])
    lengths = np.array([v.length for v in vehicles])
    desired = np.array([v.desired_speed or path.speed_limit for v, path in zip(vehicles, paths)])
    tracks = np.zeros((len(vehicles), WINDOW_LENGTH, 4))

    for step in range(WINDOW_LENGTH):
        t = step * DT
        lateral = np.array([v.lateral.at(t) for v in vehicles])
        for i, path in enumerate(paths):
            x, y, heading, v_xy, _ = frenet_to_cartesian_array(path, s[i], speed[i], lateral[i, 0], lateral[i, 1])
            tracks[i, step] = (x, y, heading, v_xy)

        gap = np.full(len(vehicles), np.inf)
        approach = np.zeros(len(vehicles))
        for i, (vehicle, path) in enumerate(zip(vehicles, paths)):
            others = [j for j in range(len(vehicles)) if j != i]
            if others:
                s_o, d_o, _ = project_points(path, tracks[others, step, :2])
                ahead = s_o - s[i]
                leading = (ahead > 0.0) & (ahead <= params.lookahead) & (np.abs(d_o - lateral[i, 0]) < lane_half_width)
                if np.any(leading):
                    k = np.argmin(np.where(leading, ahead, np.inf))
                    gap[i] = ahead[k] - 0.5 * (lengths[i] + lengths[others[k]])
                    approach[i] = speed[i] - tracks[others[k], step, 3]
            for stop_s, other, clear_s in vehicle.stops:
                stop_gap = stop_s - s[i] - 0.5 * lengths[i]
                if s[other] < clear_s and stop_gap > -0.5 * lengths[i] and stop_gap < gap[i]:
                    gap[i] = stop_gap
                    approach[i] = speed[i]

        accel = idm_acceleration(speed, desired, gap, approach, params)
        speed_next = np.maximum(speed + accel * DT, 0.0)
        s = s + 0.5 * (speed + speed_next) * DT
        speed = speed_next

    return [track for track in tracks]


def _assemble(
    scenario_id: str,
    map_model: MapModel,
    vehicles: List[_Vehicle],
    params: IdmParams,
    lane_half_width: float
) -> Scenario:
    tracks = _simulate(map_model, vehicles, params, lane_half_width)
    agents = [
        AgentTrack(
            id=vehicle.id,
            kind='vehicle',
            length=vehicle.length,
            width=vehicle.width,
            x=np.round(track[:, 0], DECIMALS).tolist(),
            y=np.round(track[:, 1], DECIMALS).tolist(),
            heading=np.round(track[:, 2], DECIMALS).tolist(),
            speed=np.abs(np.round(track[:, 3], DECIMALS)).tolist()
        )
        for vehicle, track in zip(vehicles, tracks)
    ]
    return Scenario(scenario_id=scenario_id, map=map_model, agents=agents, av_index=0, timestep_s=DT)


def _car_follow(rng: np.random.Generator) -> Tuple[MapModel, List[_Vehicle]]:
    limit = round(float(rng.uniform(10.0, 15.0)), 3)
    map_model = MapModel(lanes=[Lane(id='lane_0', centerline=_straight((0.0, 0.0), 0.0), speed_limit=limit)])
    av_s = float(rng.uniform(20.0, 50.0))
    return map_model, [
        _Vehicle('av', 'lane_0', av_s, float(rng.uniform(5.0, limit)), *_vehicle_size(rng)),
        _Vehicle('leader', 'lane_0', av_s + float(rng.uniform(15.0, 40.0)), float(rng.uniform(2.0, limit)),
                 *_vehicle_size(rng))
    ]


def _cut_in(rng: np.random.Generator) -> Tuple[MapModel, List[_Vehicle]]:
    limit = round(float(rng.uniform(10.0, 15.0)), 3)
    av_s = float(rng.uniform(30.0, 50.0))
    av_speed = float(rng.uniform(8.0, limit))
    cut = _LateralManeuver(0.0, -LANE_WIDTH, start=float(rng.uniform(1.0, 3.0)), duration=float(rng.uniform(2.5, 4.0)))
    return _two_lane_map(limit), [
        _Vehicle('av', 'right', av_s, av_speed, *_vehicle_size(rng)),
        _Vehicle('cutter', 'left', av_s + float(rng.uniform(6.0, 15.0)), float(rng.uniform(0.7, 1.0)) * av_speed,
                 *_vehicle_size(rng), lateral=cut),
        _Vehicle('follower', 'right', av_s - float(rng.uniform(12.0, 25.0)), float(rng.uniform(0.9, 1.1)) * av_speed,
                 *_vehicle_size(rng))
    ]


def _lane_change(rng: np.random.Generator) -> Tuple[MapModel, List[_Vehicle]]:
    limit = round(float(rng.uniform(10.0, 15.0)), 3)
    av_s = float(rng.uniform(30.0, 50.0))
    slow = float(rng.uniform(2.0, 5.0))
    change = _LateralManeuver(0.0, LANE_WIDTH, start=2.0 + float(rng.uniform(0.0, 1.0)),
                              duration=float(rng.uniform(3.0, 4.5)))
    return _two_lane_map(limit), [
        _Vehicle('av', 'right', av_s, float(rng.uniform(7.0, limit)), *_vehicle_size(rng), lateral=change),
        _Vehicle('slow_leader', 'right', av_s + float(rng.uniform(25.0, 40.0)), slow, *_vehicle_size(rng),
                 desired_speed=slow),
        _Vehicle('left_leader', 'left', av_s + float(rng.uniform(45.0, 70.0)), float(rng.uniform(0.8, 1.0)) * limit,
                 *_vehicle_size(rng))
    ]


def _intersection_yield(rng: np.random.Generator) -> Tuple[MapModel, List[_Vehicle]]:
    limit = round(float(rng.uniform(8.0, 12.0)), 3)
    half = LANE_LENGTH / 2
    map_model = MapModel(
        lanes=[
            Lane(id='east', centerline=_straight((-half, 0.0), 0.0), speed_limit=limit),
            Lane(id='north', centerline=_straight((0.0, -half), np.pi / 2), speed_limit=limit)
        ],
        crosswalks=[Crosswalk(polygon=[[-9.0, -6.0], [-6.0, -6.0], [-6.0, 6.0], [-9.0, 6.0]])]
    )
    av_size = _vehicle_size(rng)
    crossing_size = _vehicle_size(rng)
    crossing_s = half - float(rng.uniform(20.0, 35.0))
    # The crossing vehicle has cleared once its rear passes the far edge of the AV's lane
    cleared_s = half + LANE_WIDTH / 2 + crossing_size[0] / 2 + 1.0
    crossing = _Vehicle('crossing', 'north', crossing_s, float(rng.uniform(6.0, limit)), *crossing_size)
    av = _Vehicle('av', 'east', half - float(rng.uniform(35.0, 55.0)), float(rng.uniform(6.0, limit)), *av_size)
    stop_s = half - LANE_WIDTH / 2 - 3.0
    av.stops.append((stop_s, 1, cleared_s))
    return map_model, [av, crossing]


def _curved_road(rng: np.random.Generator) -> Tuple[MapModel, List[_Vehicle]]:
    limit = round(float(rng.uniform(8.0, 12.0)), 3)
    radius = float(rng.uniform(60.0, 120.0))
    map_model = MapModel(lanes=[Lane(id='arc', centerline=_left_arc(50.0, radius), speed_limit=limit)])
    av_s = float(rng.uniform(10.0, 40.0))
    return map_model, [
        _Vehicle('av', 'arc', av_s, float(rng.uniform(5.0, limit)), *_vehicle_size(rng)),
        _Vehicle('leader', 'arc', av_s + float(rng.uniform(20.0, 40.0)), float(rng.uniform(3.0, limit)),
                 *_vehicle_size(rng))
    ]


TEMPLATES = OrderedDict([
    ('car_follow', _car_follow),
    ('cut_in', _cut_in),
    ('lane_change', _lane_change),
    ('intersection_yield', _intersection_yield),
    ('curved_road', _curved_road)
])


def synthesize_scenarios(
    template: str,
    count: int,
    seed: int = 0,
    idm_params: Optional[IdmParams] = None,
    lane_half_width: float = FeatureConfig().lane_half_width
) -> List[Scenario]:
    """
    Generate ``count`` scenarios from a template.

    Args:
        template: One of :data:`TEMPLATES`
        count: Number of scenarios, at least 1
        seed: Base seed; scenario ``i`` uses ``default_rng([seed, i])``
        idm_params: Car-following parameters of every simulated vehicle
        lane_half_width: Lateral window within which a vehicle ahead counts as the leader (m)

    Returns:
        List[Scenario]: Scenario ids are ``<template>_<seed>_<i>``; the AV is agent 0

    Raises:
        ValueError: If the template is unknown or ``count`` < 1
    """
    if template not in TEMPLATES:
        raise ValueError(f'unknown template {template!r}; choose from {", ".join(TEMPLATES)}')
    if count < 1:
        raise ValueError(f'count must be at least 1, got {count}')
    params = idm_params or IdmParams()

    scenarios = []
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        map_model, vehicles = TEMPLATES[template](rng)
        scenarios.append(_assemble(f'{template}_{seed}_{i}', map_model, vehicles, params, lane_half_width))
    logger.info(f'Synthesized {count} {template} scenarios with seed {seed}')
    return scenarios
