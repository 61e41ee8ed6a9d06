"""
Prediction and planning metrics.

Prediction quality is measured with the joint minADE / minFDE: for every mode the errors of
the Gaussian means are averaged over all agents of the joint future, and the best mode is
reported. Planning quality compares the ranked proposals of a planner with the recorded AV
future:

- plan_min_fde: smallest endpoint distance among the top-k proposals
- top3_hit: 1 if any top-k endpoint lies within the match radius of the recorded endpoint
- speed_hit: 1 if the top-1 proposal and the recording share a speed intention
  (accelerate, keep or decelerate, from terminal minus initial speed with a deadband)
- lane_hit: 1 if they share a lane intention (left, keep or right, from the terminal lateral
  offset on the AV reference path)

Example:
    >>> planner = BehaviorPlanner(PredictorConfig(backend='idm_reactive'), weights=weights)
    >>> report, rows = evaluate_planner(scenarios, planner)
    >>> print(report.plan_min_fde, report.top3_accuracy)
"""

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from predictive_planner.geometry import ReferencePath, project_points
from predictive_planner.models import EvalReport, EvalThresholds, Scenario
from predictive_planner.prediction.base import PredictedFutures


logger = logging.getLogger(__name__)


class PlanningOutcome(NamedTuple):
    plan_min_fde: float
    top3_hit: int
    speed_hit: int
    lane_hit: int


@dataclass
class ScenarioMetrics:
    """Per-scenario row of an evaluation report."""
    scenario_id: str
    plan_min_fde: float
    top3_hit: int
    speed_hit: int
    lane_hit: int
    min_ade: float
    min_fde: float


def prediction_metrics(pred: PredictedFutures, truth: np.ndarray) -> Tuple[float, float]:
    """
    Joint minADE and minFDE of a multi-modal prediction.

    Args:
        pred: Predicted futures with means shaped (K, N, T, 2)
        truth: (N, T, >=2) recorded positions of the same agents

    Returns:
        Tuple (min_ade, min_fde); (0, 0) when there are no agents

    Raises:
        ValueError: If the agent count or horizon of ``truth`` differs from ``pred``
    """
    truth = np.asarray(truth, dtype=float)[..., :2]
    if truth.shape != pred.mu.shape[1:]:
        raise ValueError(f'truth shape {truth.shape} does not match predictions {pred.mu.shape[1:]}')
    if pred.num_agents == 0:
        return 0.0, 0.0
    errors = np.linalg.norm(pred.mu - truth[None], axis=-1)
    ade = errors.mean(axis=(1, 2))
    fde = errors[:, :, -1].mean(axis=1)
    return float(ade.min()), float(fde.min())


def speed_intent(delta_speed: float, deadband: float) -> str:
    if delta_speed > deadband:
        return 'accelerate'
    if delta_speed < -deadband:
        return 'decelerate'
    return 'keep'


def lane_intent(offset: float, threshold: float) -> str:
    if offset > threshold:
        return 'left'
    if offset < -threshold:
        return 'right'
    return 'keep'


def _states(proposal) -> np.ndarray:
    if isinstance(proposal, tuple):
        proposal = proposal[0]
    return np.asarray(getattr(proposal, 'states', proposal), dtype=float)


def planning_metrics(
    ranked_proposals: Sequence,
    ground_truth: np.ndarray,
    path: ReferencePath,
    initial_speed: float,
    thresholds: Optional[EvalThresholds] = None
) -> PlanningOutcome:
    """
    Compare ranked proposals with the recorded AV future.

    Args:
        ranked_proposals: Proposals best first, as proposals, (proposal, probability) pairs
            or (T_f, 4) state arrays
        ground_truth: (T_f, 4) recorded AV future x, y, heading, speed
        path: AV reference path used for the lane intention
        initial_speed: AV speed at the current step (m/s)
        thresholds: Match radius, deadbands and k

    Returns:
        PlanningOutcome

    Raises:
        ValueError: If there are no proposals
    """
    thresholds = thresholds or EvalThresholds()
    if len(ranked_proposals) == 0:
        raise ValueError('planning_metrics needs at least one ranked proposal')
    truth = np.asarray(ground_truth, dtype=float)

    top = [_states(p) for p in ranked_proposals[:thresholds.top_k]]
    distances = np.array([np.linalg.norm(states[-1, :2] - truth[-1, :2]) for states in top])
    best = top[0]

    _, offsets, _ = project_points(path, np.stack([best[-1, :2], truth[-1, :2]]))
    speed_hit = (
        speed_intent(best[-1, 3] - initial_speed, thresholds.speed_deadband)
        == speed_intent(truth[-1, 3] - initial_speed, thresholds.speed_deadband)
    )
    lane_hit = (
        lane_intent(offsets[0], thresholds.lane_threshold) == lane_intent(offsets[1], thresholds.lane_threshold)
    )
    return PlanningOutcome(
        plan_min_fde=float(distances.min()),
        top3_hit=int(np.any(distances <= thresholds.match_radius)),
        speed_hit=int(speed_hit),
        lane_hit=int(lane_hit)
    )


def summarize(rows: Sequence[ScenarioMetrics]) -> EvalReport:
    """Average per-scenario rows into a report."""
    if not rows:
        raise ValueError('cannot summarize an empty evaluation')

    def mean(attr: str) -> float:
        return float(np.mean([getattr(r, attr) for r in rows]))

    return EvalReport(
        min_ade=mean('min_ade'),
        min_fde=mean('min_fde'),
        plan_min_fde=mean('plan_min_fde'),
        top3_accuracy=mean('top3_hit'),
        speed_intent_accuracy=mean('speed_hit'),
        lane_intent_accuracy=mean('lane_hit'),
        scenario_count=len(rows)
    )


def evaluate_scenario(scenario: Scenario, planner, thresholds: Optional[EvalThresholds] = None) -> ScenarioMetrics:
    """
    Run the planner on one scenario and score it.

    Prediction metrics use the planner's predictor conditioned on the recorded AV future.
    """
    result = planner.plan(scenario)
    av = scenario.state_at(scenario.av_index, scenario.current_index)
    outcome = planning_metrics(result.ranked, scenario.av_future(), result.path, av.speed, thresholds)

    history = result.history
    futures = planner.predict_with_plan(history, scenario.av_future())
    min_ade, min_fde = prediction_metrics(futures, history.future) if history.future is not None else (0.0, 0.0)
    return ScenarioMetrics(scenario.scenario_id, *outcome, min_ade=min_ade, min_fde=min_fde)


def evaluate_planner(
    scenarios: Sequence[Scenario],
    planner,
    thresholds: Optional[EvalThresholds] = None
) -> Tuple[EvalReport, List[ScenarioMetrics]]:
    """
    Evaluate a planner over a dataset.

    Args:
        scenarios: Non-empty dataset
        planner: Object with ``plan(scenario)`` returning a result with ``ranked``, ``path``
            and ``history``, and ``predict_with_plan(history, plan)``
            (see :class:`predictive_planner.planner.BehaviorPlanner`)
        thresholds: Metric thresholds

    Returns:
        Tuple of the aggregated report and the per-scenario rows in dataset order

    Raises:
        ValueError: If the dataset is empty
    """
    if not scenarios:
        raise ValueError('evaluate_planner needs at least one scenario')
    rows = []
    for i, scenario in enumerate(scenarios):
        rows.append(evaluate_scenario(scenario, planner, thresholds))
        if (i + 1) % 50 == 0:
            logger.info(f'Evaluated {i + 1}/{len(scenarios)} scenarios')
    report = summarize(rows)
    logger.info(
        f'Evaluated {report.scenario_count} scenarios: plan minFDE {report.plan_min_fde:.3f} m, '
        f'top-k accuracy {report.top3_accuracy:.3f}'
    )
    return report, rows
