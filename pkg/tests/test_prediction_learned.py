import pytest
import numpy as np

from predictive_planner.errors import MissingParams, ShapeMismatch
from predictive_planner.generation import generate_proposals
from predictive_planner.models import PredictorConfig
from predictive_planner.prediction.base import AgentHistory
from predictive_planner.prediction.learned import (
    CmpModelParams,
    LearnedPredictor,
    cmp_forward,
    init_params,
    load_params,
    param_count,
    save_params
)
from predictive_planner.prediction.training import CmpSample, loss_and_gradient


@pytest.fixture
def scene(make_scenario):
    return make_scenario(others=[(45.0, 8.0, 0.0), (70.0, 9.0, 3.5), (5.0, 11.0, 0.0)], two_lanes=True)


@pytest.fixture
def history(scene):
    return AgentHistory.from_scenario(scene)


def small_config(fusion: str = 'early') -> PredictorConfig:
    return PredictorConfig(backend='learned', fusion=fusion, num_modes=2, embed_dim=8)


def test_zero_params_give_neutral_output(scene, history):
    cfg = small_config()
    params = CmpModelParams.from_config(cfg, np.zeros(param_count(cfg)))
    futures = cmp_forward(history, scene.av_future(), params, cfg)

    displacement = futures.mu - history.current[None, :, None, :2]
    np.testing.assert_allclose(displacement, 0.0, atol=1e-12)
    np.testing.assert_allclose(futures.sigma, 1.0)
    np.testing.assert_allclose(futures.mode_probs, 0.5)


@pytest.mark.parametrize('fusion', ['early', 'late', 'none'])
def test_batch_matches_single(scene, history, fusion):
    cfg = small_config(fusion)
    predictor = LearnedPredictor(cfg, init_params(cfg, seed=3))
    plans = generate_proposals(scene)[:12]

    batched = predictor.predict_batch(history, plans)
    assert len(batched) == 12
    for plan, result in zip(plans, batched):
        single = predictor.predict(history, plan)
        np.testing.assert_allclose(result.mu, single.mu, atol=1e-6)
        np.testing.assert_allclose(result.sigma, single.sigma, atol=1e-6)
        np.testing.assert_allclose(result.mode_probs, single.mode_probs, atol=1e-6)


def test_empty_plan_list(history):
    cfg = small_config()
    assert LearnedPredictor(cfg, init_params(cfg)).predict_batch(history, []) == []


def test_plan_conditioning_by_fusion(scene, history):
    plans = generate_proposals(scene)
    slow, fast = plans[0], plans[9]
    for fusion in ('early', 'late'):
        cfg = small_config(fusion)
        predictor = LearnedPredictor(cfg, init_params(cfg, seed=1))
        assert not np.allclose(predictor.predict(history, slow).mu, predictor.predict(history, fast).mu)

    cfg = small_config('none')
    predictor = LearnedPredictor(cfg, init_params(cfg, seed=1))
    np.testing.assert_array_equal(predictor.predict(history, slow).mu, predictor.predict(history, fast).mu)


def test_outputs_are_valid_distributions(scene, history):
    cfg = small_config('late')
    futures = LearnedPredictor(cfg, init_params(cfg)).predict(history, scene.av_future())
    assert futures.mu.shape == (2, history.num_agents, 50, 2)
    assert np.all(futures.sigma >= cfg.sigma_floor)
    assert np.all(futures.sigma <= cfg.sigma_ceiling)
    assert futures.mode_probs.sum() == pytest.approx(1.0)


def test_init_is_deterministic():
    cfg = small_config()
    np.testing.assert_array_equal(init_params(cfg, seed=5).values, init_params(cfg, seed=5).values)
    assert not np.array_equal(init_params(cfg, seed=5).values, init_params(cfg, seed=6).values)


def test_param_count_depends_on_fusion():
    assert param_count(small_config('none')) < param_count(small_config('early')) < param_count(small_config('late'))


def test_save_load_roundtrip(tmp_path):
    cfg = small_config('late')
    params = init_params(cfg, seed=2)
    path = tmp_path / 'model.bin'
    save_params(params, str(path))
    loaded = load_params(str(path))

    assert loaded.fusion == 'late'
    assert (loaded.num_modes, loaded.max_agents, loaded.embed_dim) == (2, 10, 8)
    np.testing.assert_array_equal(loaded.values, params.values)
    loaded.check(cfg)


def test_load_rejects_bad_files(tmp_path):
    cfg = small_config()
    path = tmp_path / 'model.bin'
    save_params(init_params(cfg), str(path))
    data = path.read_bytes()

    truncated = tmp_path / 'truncated.bin'
    truncated.write_bytes(data[:-8])
    with pytest.raises(ShapeMismatch):
        load_params(str(truncated))

    garbage = tmp_path / 'garbage.bin'
    garbage.write_bytes(b'not a parameter file')
    with pytest.raises(ShapeMismatch):
        load_params(str(garbage))


def test_mismatched_params_are_rejected():
    params = init_params(small_config('early'))
    with pytest.raises(ShapeMismatch):
        LearnedPredictor(small_config('late'), params)
    with pytest.raises(ShapeMismatch):
        LearnedPredictor(PredictorConfig(backend='learned', fusion='early', num_modes=3, embed_dim=8), params)
    with pytest.raises(ShapeMismatch):
        CmpModelParams.from_config(small_config(), np.zeros(5))


def test_missing_params():
    with pytest.raises(MissingParams):
        LearnedPredictor(small_config())


def test_too_many_agents(make_scenario):
    cfg = PredictorConfig(backend='learned', num_modes=2, embed_dim=8, max_agents=1)
    scenario = make_scenario(others=[(40.0, 8.0, 0.0), (60.0, 8.0, 0.0)])
    history = AgentHistory.from_scenario(scenario, max_agents=2)
    with pytest.raises(ShapeMismatch):
        LearnedPredictor(cfg, init_params(cfg)).predict(history, scenario.av_future())


@pytest.mark.slow
@pytest.mark.parametrize('fusion', ['early', 'late', 'none'])
def test_gradient_matches_finite_differences(scene, history, fusion):
    cfg = small_config(fusion)
    params = init_params(cfg, seed=7)
    sample = CmpSample.from_history(history, scene.av_future())
    _, grad = loss_and_gradient(params, sample)

    rng = np.random.default_rng(0)
    eps = 1e-5
    for i in rng.choice(params.values.size, size=1000, replace=False):
        plus = params.values.copy()
        minus = params.values.copy()
        plus[i] += eps
        minus[i] -= eps
        numeric = (loss_and_gradient(params.with_values(plus), sample)[0]
                   - loss_and_gradient(params.with_values(minus), sample)[0]) / (2 * eps)
        assert abs(grad[i] - numeric) <= 1e-4 * max(abs(grad[i]), abs(numeric)) + 1e-6, (i, grad[i], numeric)
