"""
Trajectory features of the linear cost function.

Seven scalar features describe a candidate trajectory. Four depend on the trajectory alone:
- travel: mean relative deviation from the speed limit
- acc: peak longitudinal acceleration over its normalizer
- jerk: peak longitudinal jerk over its normalizer
- lat_acc: peak lateral acceleration (path curvature term plus lateral maneuver) over its normalizer

Three depend on the predicted futures of the surrounding agents, using the Gaussian means
as point predictions and weighting modes by their probabilities:
- headway: RBF of the probability-weighted minimum time headway to the leader
- lateral_dist: RBF of the probability-weighted minimum lateral gap to side vehicles
- safety: probability-weighted count of steps at which the AV's circle cover
  intersects any agent's circle cover

Relative positions are measured in the frame of the AV reference-path tangent at each step.
With ``normalize_by_mode_count`` the mode sums carry an extra 1/K factor.

Example:
    >>> features = compute_features(proposal, futures, history, v_limit=13.5)
    >>> print(features.travel, features.safety)
"""

import logging
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
from shapely.geometry import Polygon

from predictive_planner.generation import TrajectoryProposal
from predictive_planner.models import DT, FeatureConfig
from predictive_planner.prediction.base import AgentHistory, PredictedFutures


logger = logging.getLogger(__name__)

FEATURE_NAMES = ('travel', 'acc', 'jerk', 'lat_acc', 'headway', 'lateral_dist', 'safety')
_STATIONARY = 1e-3


class FeatureVector(NamedTuple):
    """The seven cost features of one proposal, in cost-weight order."""
    travel: float
    acc: float
    jerk: float
    lat_acc: float
    headway: float
    lateral_dist: float
    safety: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


def compute_trajectory_features(
    proposal: TrajectoryProposal,
    v_limit: float,
    cfg: Optional[FeatureConfig] = None,
    dt: float = DT
) -> Tuple[float, float, float, float]:
    """
    Ego-only features of a proposal.

    Longitudinal acceleration is the central difference of the speed profile and jerk the
    central difference of acceleration. Lateral acceleration combines v^2 times the path
    curvature at each step with the lateral polynomial acceleration.

    Args:
        proposal: Trajectory proposal
        v_limit: Speed limit (m/s), positive
        cfg: Normalizers
        dt: Sampling period (s)

    Returns:
        Tuple (travel, acc, jerk, lat_acc)
    """
    if v_limit <= 0.0:
        raise ValueError(f'v_limit must be positive, got {v_limit}')
    cfg = cfg or FeatureConfig()
    speed = proposal.states[:, 3]

    travel = float(np.mean(np.abs(speed - v_limit) / v_limit))
    a_lon = np.gradient(speed, dt)
    jerk = np.gradient(a_lon, dt)
    a_lat = speed ** 2 * proposal.path_curvature + proposal.frenet_states[:, 5]
    return (
        travel,
        float(np.max(np.abs(a_lon))) / cfg.a_lon_max,
        float(np.max(np.abs(jerk))) / cfg.j_max,
        float(np.max(np.abs(a_lat))) / cfg.a_lat_max
    )


def circle_cover(x, y, heading, length, width, count: int = 3) -> Tuple[np.ndarray, np.ndarray]:
    """
    Circles covering an oriented box.

    Centers are evenly spaced on the longitudinal axis, one per L / count slice (offsets
    -L/3, 0, +L/3 for three circles); the radius is the half diagonal of a slice.

    Args:
        x, y, heading: Box center and yaw (scalars or broadcastable arrays)
        length, width: Box dimensions (broadcastable)
        count: Number of circles

    Returns:
        Tuple (centers of shape (..., count, 2), radius of shape (...))
    """
    x, y, heading, length, width = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (x, y, heading, length, width))
    )
    fractions = (np.arange(count) + 0.5) / count - 0.5
    offsets = length[..., None] * fractions
    centers = np.stack([
        x[..., None] + offsets * np.cos(heading)[..., None],
        y[..., None] + offsets * np.sin(heading)[..., None]
    ], axis=-1)
    radius = np.sqrt((length / (2 * count)) ** 2 + (width / 2) ** 2)
    return centers, radius


def _covers_intersect(centers_a, radius_a, centers_b, radius_b) -> np.ndarray:
    diff = centers_a[..., :, None, :] - centers_b[..., None, :, :]
    dist = np.sqrt(np.sum(diff ** 2, axis=-1))
    return np.any(dist < (radius_a + radius_b)[..., None, None], axis=(-1, -2))


def collision_indicator(
    pose_a: Sequence[float],
    box_a: Sequence[float],
    pose_b: Sequence[float],
    box_b: Sequence[float],
    cfg: Optional[FeatureConfig] = None
) -> int:
    """
    Circle-approximation collision check between two oriented boxes.

    Args:
        pose_a, pose_b: (x, y, heading)
        box_a, box_b: (length, width), positive
        cfg: Supplies ``circles_per_vehicle``

    Returns:
        int: 1 if any pair of circles overlaps, else 0
    """
    cfg = cfg or FeatureConfig()
    if min(box_a) <= 0.0 or min(box_b) <= 0.0:
        raise ValueError('box dimensions must be positive')
    centers_a, radius_a = circle_cover(*pose_a[:3], *box_a, count=cfg.circles_per_vehicle)
    centers_b, radius_b = circle_cover(*pose_b[:3], *box_b, count=cfg.circles_per_vehicle)
    return int(_covers_intersect(centers_a, radius_a, centers_b, radius_b))


def box_polygon(pose: Sequence[float], box: Sequence[float]) -> Polygon:
    """Shapely polygon of an oriented box."""
    x, y, heading = pose[:3]
    length, width = box
    corners = np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]]) * np.array([length, width]) / 2
    rotation = np.array([[np.cos(heading), -np.sin(heading)], [np.sin(heading), np.cos(heading)]])
    return Polygon(corners @ rotation.T + np.array([x, y]))


def rectangles_overlap(
    pose_a: Sequence[float],
    box_a: Sequence[float],
    pose_b: Sequence[float],
    box_b: Sequence[float]
) -> bool:
    """Exact oriented-rectangle overlap test (shared boundary counts as overlap)."""
    return box_polygon(pose_a, box_a).intersects(box_polygon(pose_b, box_b))


def _agent_headings(mu: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    """Headings along the predicted means; stationary points keep the agent's current heading."""
    step = np.gradient(mu, axis=2)
    norm = np.hypot(step[..., 0], step[..., 1])
    heading = np.arctan2(step[..., 1], step[..., 0])
    return np.where(norm > _STATIONARY, heading, fallback[None, :, None])


def _mode_weights(futures: PredictedFutures, cfg: FeatureConfig) -> np.ndarray:
    weights = futures.mode_probs.astype(float)
    if cfg.normalize_by_mode_count:
        weights = weights / futures.num_modes
    return weights


def compute_interaction_features(
    proposal: TrajectoryProposal,
    futures: PredictedFutures,
    agents: AgentHistory,
    cfg: Optional[FeatureConfig] = None
) -> Tuple[float, float, float]:
    """
    Interaction features of a proposal against predicted futures.

    Args:
        proposal: Trajectory proposal of the AV
        futures: Predicted futures shaped (K, N, T_f)
        agents: Agent metadata (box sizes, current headings, AV box)
        cfg: Thresholds and normalizers

    Returns:
        Tuple (headway, lateral_dist, safety); all 0 without surrounding agents
    """
    cfg = cfg or FeatureConfig()
    if futures.num_agents == 0:
        return 0.0, 0.0, 0.0

    mu = futures.mu
    av = proposal.states
    steps = min(len(av), futures.horizon)
    mu = mu[:, :, :steps]
    av = av[:steps]
    weights = _mode_weights(futures, cfg)

    tangent = proposal.path_heading[:steps]
    rel = mu - av[None, None, :, :2]
    cos_t, sin_t = np.cos(tangent), np.sin(tangent)
    ds = rel[..., 0] * cos_t + rel[..., 1] * sin_t
    dd = -rel[..., 0] * sin_t + rel[..., 1] * cos_t

    lengths = agents.lengths[None, :, None]
    widths = agents.widths[None, :, None]

    # Time headway to the leader
    is_leader = (ds > 0.0) & (np.abs(dd) < cfg.lane_half_width)
    gap = np.maximum(ds - 0.5 * (agents.av_length + lengths), cfg.gap_floor)
    headway_t = np.where(is_leader, gap / np.maximum(av[None, None, :, 3], cfg.v_floor), np.inf)
    headway_k = np.min(headway_t, axis=(1, 2))
    if np.any(np.isfinite(headway_k)):
        headway_k = np.minimum(headway_k, cfg.max_headway)
        headway = float(np.exp(-np.dot(weights, headway_k) ** 2))
    else:
        headway = 0.0

    # Edge-to-edge lateral gap to vehicles alongside
    alongside = np.abs(ds) < 0.5 * (agents.av_length + lengths)
    lateral_gap = np.maximum(np.abs(dd) - 0.5 * (agents.av_width + widths), 0.0)
    lateral_k = np.min(np.where(alongside, lateral_gap, np.inf), axis=(1, 2))
    if np.any(np.isfinite(lateral_k)):
        lateral_k = np.minimum(lateral_k, cfg.max_lateral_distance)
        lateral_dist = float(np.exp(-np.dot(weights, lateral_k) ** 2))
    else:
        lateral_dist = 0.0

    # Spatial occupancy violations
    headings = _agent_headings(mu, agents.current[:, 2])
    agent_centers, agent_radius = circle_cover(
        mu[..., 0], mu[..., 1], headings, lengths, widths, cfg.circles_per_vehicle
    )
    av_centers, av_radius = circle_cover(
        av[:, 0], av[:, 1], av[:, 2], agents.av_length, agents.av_width, cfg.circles_per_vehicle
    )
    hits = _covers_intersect(
        np.broadcast_to(av_centers, agent_centers.shape), av_radius, agent_centers, agent_radius
    )
    safety = float(np.dot(weights, np.any(hits, axis=1).sum(axis=1)))

    return headway, lateral_dist, safety


def compute_features(
    proposal: TrajectoryProposal,
    futures: PredictedFutures,
    agents: AgentHistory,
    v_limit: float,
    cfg: Optional[FeatureConfig] = None
) -> FeatureVector:
    """All seven features of a proposal."""
    cfg = cfg or FeatureConfig()
    ego = compute_trajectory_features(proposal, v_limit, cfg)
    interaction = compute_interaction_features(proposal, futures, agents, cfg)
    features = FeatureVector(*ego, *interaction)
    if not np.all(np.isfinite(features.as_array())):
        logger.warning(f'Non-finite features for {proposal.maneuver} proposal at {proposal.target_speed:.2f} m/s')
    return features
