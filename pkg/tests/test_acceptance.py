"""End-to-end runs over synthetic corpora."""

import pytest
import numpy as np

from predictive_planner.evaluation import evaluate_planner
from predictive_planner.irl import irl_loss, train_irl
from predictive_planner.models import IrlTrainConfig, PredictorConfig
from predictive_planner.planner import HAND_TUNED_WEIGHTS, BehaviorPlanner, build_irl_samples
from predictive_planner.synthesis import TEMPLATES, synthesize_scenarios


def mixed_corpus(per_template: int, seed: int):
    return [s for template in TEMPLATES for s in synthesize_scenarios(template, per_template, seed=seed)]


def learned_weights(scenarios, backend: str) -> np.ndarray:
    samples = build_irl_samples(scenarios, BehaviorPlanner(PredictorConfig(backend=backend)))
    weights, _ = train_irl(samples, IrlTrainConfig())
    return weights


@pytest.fixture(scope='module')
def train_corpus():
    return mixed_corpus(40, seed=21)


@pytest.fixture(scope='module')
def eval_corpus():
    return mixed_corpus(40, seed=22)


@pytest.mark.slow
def test_irl_on_planner_features_lowers_the_loss():
    scenarios = synthesize_scenarios('cut_in', 20, seed=0) + synthesize_scenarios('car_follow', 20, seed=0)
    samples = build_irl_samples(scenarios, BehaviorPlanner(PredictorConfig(backend='idm_reactive')))
    assert len(samples) == 40

    weights, history = train_irl(samples, IrlTrainConfig())
    assert irl_loss(weights, samples) < irl_loss(np.zeros(7), samples)
    assert history[-1][1] < history[0][1]


@pytest.mark.slow
@pytest.mark.parametrize('template', list(TEMPLATES))
def test_oracle_prediction_is_exact(template):
    scenarios = synthesize_scenarios(template, 5, seed=1)
    report, rows = evaluate_planner(scenarios, BehaviorPlanner(PredictorConfig(backend='oracle')))
    assert report.scenario_count == 5
    assert report.min_ade == pytest.approx(0.0, abs=1e-9)
    assert report.min_fde == pytest.approx(0.0, abs=1e-9)
    assert all(0 <= row.top3_hit <= 1 for row in rows)


@pytest.mark.slow
def test_learned_weights_beat_hand_tuned_weights(train_corpus, eval_corpus):
    """IRL weights fitted on one corpus plan closer to the recorded AV than the hand-tuned ones on another"""
    cfg = PredictorConfig(backend='idm_reactive')
    weights = learned_weights(train_corpus, 'idm_reactive')

    learned, _ = evaluate_planner(eval_corpus, BehaviorPlanner(cfg, weights=weights))
    hand_tuned, _ = evaluate_planner(eval_corpus, BehaviorPlanner(cfg, weights=HAND_TUNED_WEIGHTS))
    assert learned.scenario_count == 200
    assert learned.plan_min_fde <= hand_tuned.plan_min_fde


@pytest.mark.slow
def test_better_prediction_gives_better_plans(train_corpus, eval_corpus):
    """Paired over 200 scenes: oracle <= plan-reactive IDM <= CTRV in planning endpoint error"""
    weights = learned_weights(train_corpus, 'oracle')
    errors = {}
    for backend in ('oracle', 'idm_reactive', 'ctrv'):
        _, rows = evaluate_planner(eval_corpus, BehaviorPlanner(PredictorConfig(backend=backend), weights=weights))
        assert [row.scenario_id for row in rows] == [s.scenario_id for s in eval_corpus]
        errors[backend] = np.array([row.plan_min_fde for row in rows])

    assert len(errors['oracle']) >= 200
    assert np.mean(errors['idm_reactive'] - errors['oracle']) >= 0.0
    assert np.mean(errors['ctrv'] - errors['idm_reactive']) >= 0.0
