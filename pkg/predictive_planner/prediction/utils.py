"""
Backend dispatch for conditional prediction.

This module maps the configured backend name onto a predictor class and exposes the
module-level predict / predict_batch entry points used by the planner and the CLI.

Example:
    >>> from predictive_planner.prediction.utils import predict_batch
    >>> cfg = PredictorConfig(backend='idm_reactive')
    >>> futures = predict_batch(history, scenario.map, proposals, cfg)
    >>> print(len(futures) == len(proposals))
    True

Backends:
- ctrv: constant turn rate and velocity, plan-independent
- idm_reactive: lane-following IDM that reacts to the AV plan
- learned: the trained conditional model (needs parameters)
- oracle: recorded ground-truth futures (needs a history with futures)
"""

import logging
from collections import OrderedDict
from typing import List, Optional, Sequence

from predictive_planner.geometry import RoadNetwork
from predictive_planner.models import IdmParams, MapModel, PredictorConfig
from predictive_planner.prediction.base import AgentHistory, BasePredictor, PlanLike, PredictedFutures
from predictive_planner.prediction.ctrv import CtrvPredictor
from predictive_planner.prediction.idm import IdmReactivePredictor
from predictive_planner.prediction.learned import CmpModelParams, LearnedPredictor
from predictive_planner.prediction.oracle import OraclePredictor


logger = logging.getLogger(__name__)

PREDICTOR_REGISTRY = OrderedDict([
    ('ctrv', lambda cfg, params, idm: CtrvPredictor(cfg)),
    ('idm_reactive', lambda cfg, params, idm: IdmReactivePredictor(cfg, idm)),
    ('learned', lambda cfg, params, idm: LearnedPredictor(cfg, params)),
    ('oracle', lambda cfg, params, idm: OraclePredictor(cfg))
])


def build_predictor(
    cfg: PredictorConfig,
    params: Optional[CmpModelParams] = None,
    idm_params: Optional[IdmParams] = None
) -> BasePredictor:
    """
    Instantiate the backend named by ``cfg.backend``.

    Args:
        cfg: Predictor configuration
        params: Learned parameters, required by the learned backend
        idm_params: IDM parameters for the reactive backend

    Returns:
        BasePredictor

    Raises:
        MissingParams: If the learned backend is requested without parameters
    """
    factory = PREDICTOR_REGISTRY[cfg.backend]
    predictor = factory(cfg, params, idm_params)
    logger.debug(f'Using {predictor.name} prediction backend (K={cfg.num_modes}, N={cfg.max_agents})')
    return predictor


def _attach_network(history: AgentHistory, map_model: Optional[MapModel]) -> AgentHistory:
    if history.network is None and map_model is not None:
        history.network = RoadNetwork(map_model)
    return history


def predict(
    history: AgentHistory,
    map_model: Optional[MapModel],
    plan: PlanLike,
    cfg: PredictorConfig,
    params: Optional[CmpModelParams] = None
) -> PredictedFutures:
    """
    Predict the joint futures of ``history`` conditioned on one AV plan.

    Args:
        history: Joint agent history X
        map_model: Scene map; only consulted when ``history`` carries no lane paths
        plan: TrajectoryProposal or (T_f, 4) plan states
        cfg: Predictor configuration selecting the backend
        params: Learned parameters for the learned backend

    Returns:
        PredictedFutures
    """
    return build_predictor(cfg, params).predict(_attach_network(history, map_model), plan)


def predict_batch(
    history: AgentHistory,
    map_model: Optional[MapModel],
    plans: Sequence[PlanLike],
    cfg: PredictorConfig,
    params: Optional[CmpModelParams] = None
) -> List[PredictedFutures]:
    """
    Predict for every plan in one call; elementwise equal to :func:`predict` per plan.
    """
    return build_predictor(cfg, params).predict_batch(_attach_network(history, map_model), plans)
