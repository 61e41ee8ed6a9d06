"""
Reference paths and Frenet-frame conversion.

This module provides arc-length parameterised reference paths built from lane
centerlines, and conversions between Cartesian poses and Frenet states
(s = arc length along the path, d = signed lateral offset, positive to the left of
the path tangent).

Key components:
- ReferencePath: resampled polyline with per-waypoint heading and curvature
- build_reference_path: resampling at <= 1 m spacing with finite-difference geometry
- cartesian_to_frenet / frenet_to_cartesian: exact inverse pair on a path
- project_points: vectorised nearest-segment projection for many points at once
- RoadNetwork: reference paths of every lane of a map, lane matching and
  neighbor-lane offsets

Conversions are exact inverses up to interpolation: the Cartesian point of a Frenet
state lies on the normal line through the interpolated path point, and the inverse
projection solves for the arc length whose normal line passes through the point.

Example:
    >>> path = build_reference_path([(0, 0), (100, 0)], speed_limit=15.0)
    >>> state = cartesian_to_frenet(path, (10.0, 2.0, 0.0, 5.0, 0.0))
    >>> round(state.s, 6), round(state.d, 6)
    (10.0, 2.0)
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from predictive_planner.errors import CurvatureSingularity, DegeneratePath, ProjectionOutOfRange
from predictive_planner.models import MapModel


logger = logging.getLogger(__name__)

MAX_SPACING = 1.0
LATERAL_CORRIDOR = 20.0
_DUPLICATE_TOL = 1e-9
_END_TOL = 1e-6


class FrenetState(NamedTuple):
    """Frenet state: longitudinal and lateral position, speed and acceleration."""
    s: float
    s_dot: float
    s_ddot: float
    d: float
    d_dot: float
    d_ddot: float


class CartesianState(NamedTuple):
    """Cartesian pose with scalar speed and tangential acceleration."""
    x: float
    y: float
    heading: float
    speed: float
    accel: float = 0.0


@dataclass(frozen=True, eq=False)
class ReferencePath:
    """
    An arc-length parameterised reference path.

    Attributes:
        waypoints (np.ndarray): (M, 2) resampled points, consecutive spacing <= 1 m
        cumulative_arclength (np.ndarray): (M,) strictly increasing, starting at 0
        heading (np.ndarray): (M,) unwrapped tangent angle (rad)
        curvature (np.ndarray): (M,) signed curvature (1/m)
        speed_limit (float): Legal speed along the path (m/s)
        lane_id (Optional[str]): Lane the path was built from, if any
    """
    waypoints: np.ndarray
    cumulative_arclength: np.ndarray
    heading: np.ndarray
    curvature: np.ndarray
    speed_limit: float
    lane_id: Optional[str] = None
    _segments: np.ndarray = field(init=False, repr=False)
    _segment_lengths: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for arr in (self.waypoints, self.cumulative_arclength, self.heading, self.curvature):
            arr.flags.writeable = False
        segments = np.diff(self.waypoints, axis=0)
        object.__setattr__(self, '_segments', segments)
        object.__setattr__(self, '_segment_lengths', np.hypot(segments[:, 0], segments[:, 1]))

    @property
    def length(self) -> float:
        return float(self.cumulative_arclength[-1])

    def interpolate(self, s) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """
        Interpolate position, heading and curvature at arc length(s) ``s``.

        Args:
            s: Scalar or array of arc lengths, expected within [0, length]

        Returns:
            Tuple of arrays (x, y, heading, curvature) shaped like ``s``
        """
        s = np.asarray(s, dtype=float)
        cum = self.cumulative_arclength
        idx = np.clip(np.searchsorted(cum, s, side='right') - 1, 0, len(cum) - 2)
        u = (s - cum[idx]) / (cum[idx + 1] - cum[idx])
        x = self.waypoints[idx, 0] + u * self._segments[idx, 0]
        y = self.waypoints[idx, 1] + u * self._segments[idx, 1]
        heading = self.heading[idx] + u * (self.heading[idx + 1] - self.heading[idx])
        kappa = self.curvature[idx] + u * (self.curvature[idx + 1] - self.curvature[idx])
        return x, y, heading, kappa


def build_reference_path(
    polyline: Sequence[Sequence[float]],
    speed_limit: float,
    extension: float = 0.0,
    lane_id: Optional[str] = None,
    max_spacing: float = MAX_SPACING
) -> ReferencePath:
    """
    Build a reference path from an ordered polyline.

    The polyline is resampled at uniform arc length with spacing at most ``max_spacing``.
    Heading comes from finite differences of the resampled coordinates and curvature from
    finite differences of the unwrapped heading; interior points use central differences,
    endpoints second-order one-sided differences.

    Args:
        polyline: Ordered (x, y) points in meters
        speed_limit: Legal speed along the path (m/s)
        extension: Straight continuation appended past the last point (m)
        lane_id: Identifier of the lane the path follows
        max_spacing: Maximum resampling spacing (m)

    Returns:
        ReferencePath: The resampled path

    Raises:
        ValueError: If the polyline has fewer than 2 points or non-finite coordinates
        DegeneratePath: If duplicates collapse the polyline or it is shorter than 1 m
    """
    pts = np.asarray(polyline, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError('polyline must contain at least 2 (x, y) points')
    if not np.all(np.isfinite(pts)):
        raise ValueError('polyline contains non-finite coordinates')

    seg_len = np.hypot(*np.diff(pts, axis=0).T)
    pts = pts[np.concatenate([[True], seg_len > _DUPLICATE_TOL])]
    if len(pts) < 2:
        raise DegeneratePath('polyline collapses to a single point')

    if extension > 0.0:
        direction = pts[-1] - pts[-2]
        direction /= np.hypot(*direction)
        pts = np.vstack([pts, pts[-1] + extension * direction])

    s_orig = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    total = s_orig[-1]
    if total < 1.0:
        raise DegeneratePath(f'polyline length {total:.3f} m is below 1 m')

    n = int(np.ceil(total / max_spacing)) + 1
    s_new = np.linspace(0.0, total, n)
    x = np.interp(s_new, s_orig, pts[:, 0])
    y = np.interp(s_new, s_orig, pts[:, 1])
    s = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(x), np.diff(y)))])

    edge_order = 2 if n >= 3 else 1
    dx = np.gradient(x, s, edge_order=edge_order)
    dy = np.gradient(y, s, edge_order=edge_order)
    heading = np.unwrap(np.arctan2(dy, dx))
    curvature = np.gradient(heading, s, edge_order=edge_order)

    return ReferencePath(
        waypoints=np.stack([x, y], axis=-1),
        cumulative_arclength=s,
        heading=heading,
        curvature=curvature,
        speed_limit=float(speed_limit),
        lane_id=lane_id
    )


def project_points(path: ReferencePath, xy: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Project many points onto a path by nearest-segment search.

    A linear search over all segments followed by interpolation along the winning
    segment. Cheaper than :func:`cartesian_to_frenet` and adequate for gap and
    leader computations; it does not refine onto the interpolated normal lines.

    Args:
        path: Reference path
        xy: (..., 2) array of points

    Returns:
        Tuple (s, d, distance) of arrays shaped like ``xy[..., 0]``
    """
    xy = np.asarray(xy, dtype=float)
    flat = xy.reshape(-1, 2)
    p0 = path.waypoints[:-1]
    seg = path._segments
    seg_len2 = path._segment_lengths ** 2

    rel = flat[:, None, :] - p0[None, :, :]
    t = np.clip(np.einsum('pmk,mk->pm', rel, seg) / seg_len2, 0.0, 1.0)
    offset = rel - t[..., None] * seg[None]
    dist2 = np.einsum('pmk,pmk->pm', offset, offset)
    best = np.argmin(dist2, axis=1)
    rows = np.arange(len(flat))

    t_best = t[rows, best]
    s = path.cumulative_arclength[best] + t_best * path._segment_lengths[best]
    cross = seg[best, 0] * offset[rows, best, 1] - seg[best, 1] * offset[rows, best, 0]
    dist = np.sqrt(dist2[rows, best])
    d = np.where(cross >= 0.0, dist, -dist)
    shape = xy.shape[:-1]
    return s.reshape(shape), d.reshape(shape), dist.reshape(shape)


def _refine_arclength(path: ReferencePath, x: float, y: float, s0: float) -> float:
    """Solve for s whose interpolated normal line passes through (x, y)."""
    def along(s: float) -> float:
        px, py, th, _ = path.interpolate(s)
        return float((x - px) * np.cos(th) + (y - py) * np.sin(th))

    lo = max(0.0, s0 - 2.0 * MAX_SPACING)
    hi = min(path.length, s0 + 2.0 * MAX_SPACING)
    f_lo, f_hi = along(lo), along(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0.0:
        if abs(along(s0)) > _END_TOL:
            raise ProjectionOutOfRange(f'point ({x:.3f}, {y:.3f}) projects beyond the end of the path')
        return s0
    return brentq(along, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps)


def cartesian_to_frenet(
    path: ReferencePath,
    pose: Union[CartesianState, Sequence[float]],
    corridor: float = LATERAL_CORRIDOR
) -> FrenetState:
    """
    Convert a Cartesian pose into a Frenet state on ``path``.

    Args:
        path: Reference path
        pose: (x, y, heading, speed, accel); accel may be omitted
        corridor: Maximum admissible distance to the path (m)

    Returns:
        FrenetState: Arc length, lateral offset and their time derivatives

    Raises:
        ProjectionOutOfRange: If the point is farther than ``corridor`` from the path or
            lies beyond its ends
        CurvatureSingularity: If |d * kappa| >= 1 at the projection point
    """
    x, y, heading, speed = (float(v) for v in pose[:4])
    accel = float(pose[4]) if len(pose) > 4 else 0.0

    s0, _, dist = project_points(path, np.array([x, y]))
    if float(dist) > corridor:
        raise ProjectionOutOfRange(
            f'point ({x:.3f}, {y:.3f}) is {float(dist):.2f} m from the path (corridor {corridor} m)'
        )
    s = _refine_arclength(path, x, y, float(s0))
    px, py, th, kappa = (float(v) for v in path.interpolate(s))
    d = (x - px) * -np.sin(th) + (y - py) * np.cos(th)

    one_minus_kd = 1.0 - kappa * d
    if one_minus_kd <= 0.0:
        raise CurvatureSingularity(f'|d * kappa| = {abs(kappa * d):.3f} at s = {s:.2f}')

    delta = heading - th
    return FrenetState(
        s=s,
        s_dot=speed * np.cos(delta) / one_minus_kd,
        s_ddot=accel * np.cos(delta) / one_minus_kd,
        d=d,
        d_dot=speed * np.sin(delta),
        d_ddot=accel * np.sin(delta)
    )


def frenet_to_cartesian_array(
    path: ReferencePath,
    s: np.ndarray,
    s_dot: np.ndarray,
    d: np.ndarray,
    d_dot: np.ndarray,
    s_ddot: Optional[np.ndarray] = None,
    d_ddot: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Vectorised Frenet to Cartesian conversion.

    Returns:
        Tuple of arrays (x, y, heading, speed, accel)

    Raises:
        ProjectionOutOfRange: If any s lies outside [0, path length]
        CurvatureSingularity: If any |d * kappa| >= 1
    """
    s = np.asarray(s, dtype=float)
    d = np.asarray(d, dtype=float)
    if np.any(s < -_END_TOL) or np.any(s > path.length + _END_TOL):
        raise ProjectionOutOfRange(
            f's in [{s.min():.2f}, {s.max():.2f}] leaves the path [0, {path.length:.2f}]'
        )
    px, py, th, kappa = path.interpolate(s)
    one_minus_kd = 1.0 - kappa * d
    if np.any(one_minus_kd <= 0.0):
        raise CurvatureSingularity(f'|d * kappa| reaches {np.max(np.abs(kappa * d)):.3f}')

    x = px - d * np.sin(th)
    y = py + d * np.cos(th)
    v_lon = one_minus_kd * np.asarray(s_dot, dtype=float)
    v_lat = np.asarray(d_dot, dtype=float)
    speed = np.hypot(v_lon, v_lat)
    heading = th + np.arctan2(v_lat, v_lon)

    a_lon = one_minus_kd * (np.zeros_like(s) if s_ddot is None else np.asarray(s_ddot, dtype=float))
    a_lat = np.zeros_like(s) if d_ddot is None else np.asarray(d_ddot, dtype=float)
    with np.errstate(invalid='ignore', divide='ignore'):
        accel = np.where(speed > 0.0, (v_lon * a_lon + v_lat * a_lat) / speed, a_lon)
    return x, y, heading, speed, accel


def frenet_to_cartesian(path: ReferencePath, state: FrenetState) -> CartesianState:
    """
    Convert a Frenet state on ``path`` into a Cartesian pose.

    Heading combines the path tangent with the angle of the lateral motion; speed is the
    norm of the longitudinal and lateral velocity components.

    Args:
        path: Reference path
        state: Frenet state

    Returns:
        CartesianState: (x, y, heading, speed, accel)
    """
    x, y, heading, speed, accel = frenet_to_cartesian_array(
        path, state.s, state.s_dot, state.d, state.d_dot, state.s_ddot, state.d_ddot
    )
    return CartesianState(float(x), float(y), float(heading), float(speed), float(accel))


class RoadNetwork:
    """
    Reference paths for every lane of a map, with lane matching and adjacency offsets.

    Lane paths are extended straight past their last point by ``extension`` meters so
    rollouts near the end of a mapped lane stay on a path.

    Example:
        network = RoadNetwork(scenario.map, extension=100.0)
        lane_id = network.match_lane(x, y, heading)
        path = network.path(lane_id)
    """

    def __init__(self, map_model: MapModel, extension: float = 0.0):
        self.map_model = map_model
        self.paths: Dict[str, ReferencePath] = {
            lane.id: build_reference_path(lane.centerline, lane.speed_limit, extension=extension, lane_id=lane.id)
            for lane in map_model.lanes
        }

    def path(self, lane_id: str) -> ReferencePath:
        return self.paths[lane_id]

    def match_lane(
        self,
        x: float,
        y: float,
        heading: Optional[float] = None,
        max_offset: float = 2.5,
        max_heading_error: float = np.pi / 2
    ) -> Optional[str]:
        """
        Find the lane whose centerline is nearest to a pose.

        Args:
            x, y: Position (m)
            heading: Optional yaw; lanes pointing more than ``max_heading_error`` away are skipped
            max_offset: Maximum lateral distance to the centerline (m)

        Returns:
            Optional[str]: Lane id, or None when no lane qualifies
        """
        best_id, best_dist = None, np.inf
        for lane_id, path in self.paths.items():
            s, _, dist = project_points(path, np.array([x, y]))
            dist = float(dist)
            if dist > max_offset or dist >= best_dist:
                continue
            if heading is not None:
                _, _, th, _ = path.interpolate(float(s))
                error = np.angle(np.exp(1j * (heading - float(th))))
                if abs(error) > max_heading_error:
                    continue
            best_id, best_dist = lane_id, dist
        return best_id

    def neighbor_offsets(self, lane_id: str, s: float) -> Dict[str, float]:
        """
        Signed center-to-center distances from a lane to its legal neighbors.

        Args:
            lane_id: Current lane
            s: Arc length on the current lane where the distance is measured

        Returns:
            Dict mapping 'change_left' / 'change_right' to the signed offset D (m),
            positive to the left
        """
        lane = self.map_model.lane(lane_id)
        path = self.paths[lane_id]
        px, py, _, _ = path.interpolate(s)
        offsets = {}
        for maneuver, neighbor, sign in (
            ('change_left', lane.left_neighbor, 1.0),
            ('change_right', lane.right_neighbor, -1.0)
        ):
            if neighbor is None:
                continue
            _, _, dist = project_points(self.paths[neighbor], np.array([float(px), float(py)]))
            offsets[maneuver] = sign * float(dist)
        return offsets
