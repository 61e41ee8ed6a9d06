import pytest
import numpy as np

from predictive_planner.errors import MissingParams, PredictionError
from predictive_planner.generation import generate_proposals
from predictive_planner.models import PredictorConfig
from predictive_planner.prediction.base import AgentHistory, PredictedFutures, plan_states
from predictive_planner.prediction.ctrv import CtrvPredictor
from predictive_planner.prediction.idm import IdmReactivePredictor
from predictive_planner.prediction.learned import LearnedPredictor, init_params
from predictive_planner.prediction.oracle import OraclePredictor
from predictive_planner.prediction.utils import PREDICTOR_REGISTRY, build_predictor, predict, predict_batch


@pytest.fixture
def scene(make_scenario):
    return make_scenario(others=[(50.0, 8.0, 0.0), (90.0, 6.0, 3.5), (0.0, 12.0, 0.0)], two_lanes=True)


def test_registry_lists_all_backends():
    assert list(PREDICTOR_REGISTRY) == ['ctrv', 'idm_reactive', 'learned', 'oracle']


@pytest.mark.parametrize('backend, expected', [
    ('ctrv', CtrvPredictor),
    ('idm_reactive', IdmReactivePredictor),
    ('oracle', OraclePredictor)
])
def test_build_predictor(backend, expected):
    assert isinstance(build_predictor(PredictorConfig(backend=backend)), expected)


def test_build_learned_predictor():
    cfg = PredictorConfig(backend='learned', embed_dim=8)
    assert isinstance(build_predictor(cfg, init_params(cfg)), LearnedPredictor)
    with pytest.raises(MissingParams):
        build_predictor(cfg)


def test_history_orders_agents_by_distance(scene):
    history = AgentHistory.from_scenario(scene, max_agents=2)
    # AV at x=40; agents now at 66, 102 and 24
    assert history.agent_indices == [3, 1]
    assert history.states.shape == (2, 21, 4)
    assert history.future.shape == (2, 50, 2)
    assert history.lane_ids == ['right', 'right']
    assert history.lane_context.shape == (2, 10, 2)


def test_oracle_replays_future(scene):
    history = AgentHistory.from_scenario(scene)
    futures = OraclePredictor().predict(history, scene.av_future())
    np.testing.assert_array_equal(futures.mu[0], history.future)
    np.testing.assert_array_equal(futures.mu[1], history.future)


def test_oracle_needs_future(scene):
    history = AgentHistory.from_scenario(scene, include_future=False)
    with pytest.raises(MissingParams):
        OraclePredictor().predict(history, scene.av_future())


@pytest.mark.parametrize('backend', ['ctrv', 'idm_reactive', 'oracle'])
def test_predict_batch_matches_predict(scene, backend):
    cfg = PredictorConfig(backend=backend)
    history = AgentHistory.from_scenario(scene)
    plans = generate_proposals(scene)[:12]
    batched = predict_batch(history, scene.map, plans, cfg)
    assert len(batched) == 12
    for plan, result in zip(plans, batched):
        np.testing.assert_allclose(result.mu, predict(history, scene.map, plan, cfg).mu, atol=1e-6)


def test_predict_attaches_network(scene):
    history = AgentHistory.from_scenario(scene)
    history.network = None
    futures = predict(history, scene.map, scene.av_future(), PredictorConfig(backend='idm_reactive'))
    assert history.network is not None
    assert futures.num_agents == 3


def test_plan_states_validation(scene):
    proposal = generate_proposals(scene)[0]
    assert plan_states(proposal).shape == (50, 4)
    with pytest.raises(PredictionError):
        plan_states(np.zeros((50, 3)))


def test_predicted_futures_validation():
    mu = np.zeros((2, 1, 5, 2))
    with pytest.raises(PredictionError):
        PredictedFutures(mu=mu, sigma=np.zeros_like(mu), mode_probs=np.array([0.5, 0.5]))
    with pytest.raises(PredictionError):
        PredictedFutures(mu=mu, sigma=np.ones_like(mu), mode_probs=np.array([0.7, 0.7]))
    with pytest.raises(PredictionError):
        PredictedFutures(mu=mu, sigma=np.ones((2, 1, 4, 2)), mode_probs=np.array([0.5, 0.5]))
