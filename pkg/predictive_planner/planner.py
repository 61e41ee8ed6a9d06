"""
Prediction-driven behavior planner.

The planner ties the pipeline together for one scene:

1. generate trajectory proposals for the AV in the Frenet frame of its lane
2. predict the joint futures of the surrounding agents conditioned on every proposal,
   either as one batch or one proposal at a time
3. compute the seven cost features of every proposal against its own prediction
4. rank the proposals by their max-entropy probability under the cost weights

It also builds IRL training samples, whose features do not depend on the cost weights and
are therefore computed once per scenario.

Example:
    >>> planner = BehaviorPlanner(PredictorConfig(backend='idm_reactive'), weights=weights)
    >>> result = planner.plan(scenario)
    >>> best_proposal, probability = result.ranked[0]
"""

import logging
import time
from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence

import numpy as np

from predictive_planner.features import FeatureVector, compute_features
from predictive_planner.generation import TrajectoryProposal, av_reference_path, generate_proposals
from predictive_planner.geometry import ReferencePath, RoadNetwork
from predictive_planner.irl import IrlSample, label_demo, select_behavior
from predictive_planner.models import FeatureConfig, GenerationConfig, IdmParams, PredictorConfig, Scenario
from predictive_planner.prediction.base import AgentHistory, PlanLike, PredictedFutures
from predictive_planner.prediction.learned import CmpModelParams
from predictive_planner.prediction.utils import build_predictor
from predictive_planner.utils.checkpointer import Checkpointer


logger = logging.getLogger(__name__)

# travel, acc, jerk, lat_acc, headway, lateral_dist, safety
HAND_TUNED_WEIGHTS = np.array([4.0, 1.0, 0.5, 1.0, 2.0, 1.0, 1.0])

InferenceMode = Literal['batch', 'single']


@dataclass(eq=False)
class PlanResult:
    """
    Everything the planner computed for one scene.

    Attributes:
        scenario_id (str): Planned scene
        proposals (List[TrajectoryProposal]): Proposals in generation order
        futures (List[PredictedFutures]): Prediction conditioned on each proposal
        features (np.ndarray): (M, 7) feature matrix aligned with ``proposals``
        ranked (List): (proposal, probability) pairs, most probable first
        path (ReferencePath): AV reference path
        history (AgentHistory): Joint history of the surrounding agents
        elapsed (float): Wall time of the call (s)
    """
    scenario_id: str
    proposals: List[TrajectoryProposal]
    futures: List[PredictedFutures]
    features: np.ndarray
    ranked: list
    path: ReferencePath
    history: AgentHistory
    elapsed: float

    @property
    def best(self) -> TrajectoryProposal:
        return self.ranked[0][0]


class BehaviorPlanner:
    """
    Generate, predict, score and rank AV behaviors.

    Attributes:
        predictor_cfg (PredictorConfig): Prediction backend settings
        weights (np.ndarray): Cost weights in feature order
        feature_cfg (FeatureConfig): Feature normalizers and thresholds
        generation_cfg (GenerationConfig): Proposal generation settings
        inference (str): 'batch' predicts all proposals in one call, 'single' one by one
    """

    def __init__(
        self,
        predictor_cfg: Optional[PredictorConfig] = None,
        params: Optional[CmpModelParams] = None,
        weights: Optional[np.ndarray] = None,
        feature_cfg: Optional[FeatureConfig] = None,
        generation_cfg: Optional[GenerationConfig] = None,
        idm_params: Optional[IdmParams] = None,
        inference: InferenceMode = 'batch'
    ):
        if inference not in ('batch', 'single'):
            raise ValueError(f"inference must be 'batch' or 'single', got {inference!r}")
        self.predictor_cfg = predictor_cfg or PredictorConfig()
        self.weights = HAND_TUNED_WEIGHTS.copy() if weights is None else np.asarray(weights, dtype=float)
        self.feature_cfg = feature_cfg or FeatureConfig()
        self.generation_cfg = generation_cfg or GenerationConfig()
        self.inference = inference
        self.predictor = build_predictor(self.predictor_cfg, params, idm_params)

    def _prepare(self, scenario: Scenario):
        network = RoadNetwork(scenario.map, extension=self.generation_cfg.path_extension)
        path = av_reference_path(scenario, network)
        proposals = generate_proposals(scenario, path, network, self.generation_cfg)
        history = AgentHistory.from_scenario(scenario, self.predictor_cfg.max_agents, network)
        return path, proposals, history

    def predict_all(self, history: AgentHistory, plans: Sequence[PlanLike]) -> List[PredictedFutures]:
        if self.inference == 'batch':
            return self.predictor.predict_batch(history, plans)
        return [self.predictor.predict(history, plan) for plan in plans]

    def predict_with_plan(self, history: AgentHistory, plan: PlanLike) -> PredictedFutures:
        """Prediction conditioned on an arbitrary plan, e.g. the recorded AV future."""
        return self.predictor.predict(history, plan)

    def feature_matrix(
        self,
        proposals: Sequence[TrajectoryProposal],
        futures: Sequence[PredictedFutures],
        history: AgentHistory,
        path: ReferencePath
    ) -> np.ndarray:
        rows: List[FeatureVector] = [
            compute_features(p, f, history, path.speed_limit, self.feature_cfg) for p, f in zip(proposals, futures)
        ]
        return np.array([row.as_array() for row in rows])

    def plan(self, scenario: Scenario) -> PlanResult:
        """
        Plan the AV behavior of one scene.

        Raises:
            NoValidProposal: If generation rejects every candidate
            ProjectionOutOfRange: If the AV matches no lane
        """
        start = time.perf_counter()
        path, proposals, history = self._prepare(scenario)
        futures = self.predict_all(history, proposals)
        features = self.feature_matrix(proposals, futures, history, path)
        ranked = select_behavior(proposals, features, self.weights)
        elapsed = time.perf_counter() - start
        logger.debug(
            f'Planned {scenario.scenario_id}: {len(proposals)} proposals, '
            f'{history.num_agents} agents, {self.inference} inference in {elapsed * 1e3:.1f} ms'
        )
        return PlanResult(scenario.scenario_id, proposals, futures, features, ranked, path, history, elapsed)

    def scenario_features(self, scenario: Scenario) -> IrlSample:
        """
        Feature matrix of every proposal of a scene, labeled with the demonstrated proposal.

        Returns:
            IrlSample whose label is the proposal ending nearest the recorded AV endpoint
        """
        path, proposals, history = self._prepare(scenario)
        futures = self.predict_all(history, proposals)
        features = self.feature_matrix(proposals, futures, history, path)
        return IrlSample(features=features, label=label_demo(proposals, scenario.av_future()),
                         scenario_id=scenario.scenario_id)


def build_irl_samples(
    scenarios: Sequence[Scenario],
    planner: BehaviorPlanner,
    checkpointer: Optional[Checkpointer] = None
) -> List[IrlSample]:
    """
    Precompute labeled feature matrices for IRL training.

    Scenes with fewer than two proposals cannot inform the weights and are skipped.

    Args:
        scenarios: Training scenes
        planner: Planner supplying generation, prediction and feature settings
        checkpointer: Optional cache; the samples are stored under the stage ``irl_features``

    Returns:
        List[IrlSample]
    """
    def compute() -> List[IrlSample]:
        samples = []
        for i, scenario in enumerate(scenarios):
            sample = planner.scenario_features(scenario)
            if sample.features.shape[0] < 2:
                logger.debug(f'Skipping {scenario.scenario_id}: fewer than 2 proposals')
                continue
            samples.append(sample)
            if (i + 1) % 100 == 0:
                logger.info(f'Computed features for {i + 1}/{len(scenarios)} scenarios')
        return samples

    if checkpointer is None:
        return compute()
    return checkpointer.checkpoint(compute, [], 'irl_features')
