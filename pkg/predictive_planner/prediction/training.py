"""
Training of the learned conditional predictor.

The loss is the Gaussian negative log-likelihood of the ground-truth joint future under the
mode whose means are jointly closest to it, plus the cross-entropy of that mode's
probability. During training the AV's recorded future stands in for the plan.

Optimisation uses Adam with global gradient-norm clipping and a per-epoch step decay of the
learning rate. Mini-batches are drawn from a fresh permutation of the samples every epoch.

Example:
    >>> samples = build_cmp_samples(scenarios, predictor_cfg)
    >>> params, history = cmp_train(samples, predictor_cfg, CmpTrainConfig(steps=200))
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from predictive_planner.errors import NonFiniteLoss
from predictive_planner.geometry import RoadNetwork
from predictive_planner.models import CmpTrainConfig, PredictorConfig, Scenario
from predictive_planner.prediction.base import AgentHistory, PredictedFutures
from predictive_planner.prediction.learned import (
    CmpModelParams,
    ForwardResult,
    backward,
    encode_history,
    encode_plans,
    forward,
    init_params
)
from predictive_planner.utils.optim import Adam, clip_grad_norm, step_decay


logger = logging.getLogger(__name__)


@dataclass(eq=False)
class CmpSample:
    """
    One training example: encoded scene, AV future used as the plan, and the agents' truth.

    Attributes:
        agent_inputs (np.ndarray): (N, AGENT_INPUT_DIM)
        plan_inputs (np.ndarray): (1, PLAN_INPUT_DIM)
        current_xy (np.ndarray): (N, 2)
        truth (np.ndarray): (N, T_f, 2) ground-truth future positions
        scenario_id (str): Source scene
    """
    agent_inputs: np.ndarray
    plan_inputs: np.ndarray
    current_xy: np.ndarray
    truth: np.ndarray
    scenario_id: str = ''

    @classmethod
    def from_history(cls, history: AgentHistory, plan: np.ndarray) -> 'CmpSample':
        return cls(
            agent_inputs=encode_history(history),
            plan_inputs=encode_plans(plan[None], history.av_state[:2]),
            current_xy=history.current[:, :2].copy(),
            truth=history.future,
            scenario_id=history.scenario_id
        )


def build_cmp_samples(scenarios: Sequence[Scenario], cfg: PredictorConfig) -> List[CmpSample]:
    """
    Turn scenarios into training samples, skipping scenes without surrounding agents.
    """
    samples = []
    for scenario in scenarios:
        history = AgentHistory.from_scenario(scenario, cfg.max_agents, RoadNetwork(scenario.map))
        if history.num_agents == 0:
            logger.debug(f'Skipping scenario {scenario.scenario_id}: no surrounding agents')
            continue
        samples.append(CmpSample.from_history(history, scenario.av_future()))
    logger.info(f'Built {len(samples)} training samples from {len(scenarios)} scenarios')
    return samples


def best_mode(mu: np.ndarray, truth: np.ndarray) -> int:
    """Mode whose joint trajectory is closest to the truth (summed Euclidean error, lowest index on ties)."""
    errors = np.linalg.norm(mu - truth[None], axis=-1).sum(axis=(1, 2))
    return int(np.argmin(errors))


def _gaussian_nll(mu, log_sigma, truth) -> Tuple[float, np.ndarray]:
    """Mean per-point NLL (without the log 2 pi constant) and the standardized residuals."""
    residual = (truth - mu) / np.exp(log_sigma)
    per_point = log_sigma.sum(axis=-1) + 0.5 * np.sum(residual ** 2, axis=-1)
    return float(per_point.mean()), residual


def cmp_loss(pred: PredictedFutures, truth: np.ndarray) -> Tuple[float, int]:
    """
    Mixture loss of a joint prediction against the ground truth.

    Args:
        pred: Predicted futures with K modes over N agents
        truth: (N, T_f, 2) ground-truth positions

    Returns:
        Tuple (loss, best_mode_index); loss is the mean Gaussian NLL over agents and steps
        at the best mode minus the log probability of that mode
    """
    truth = np.asarray(truth, dtype=float)
    if truth.shape != pred.mu.shape[1:]:
        raise ValueError(f'truth shape {truth.shape} does not match predictions {pred.mu.shape[1:]}')
    k_hat = best_mode(pred.mu, truth)
    nll, _ = _gaussian_nll(pred.mu[k_hat], np.log(pred.sigma[k_hat]), truth)
    return nll - float(np.log(pred.mode_probs[k_hat])), k_hat


def loss_and_gradient(
    params: CmpModelParams,
    sample: CmpSample,
    sigma_bounds: Tuple[float, float] = (1e-2, 1e2)
) -> Tuple[float, np.ndarray]:
    """
    Loss of one sample and its gradient with respect to the flat parameters.
    """
    result: ForwardResult = forward(
        sample.agent_inputs, sample.plan_inputs, sample.current_xy, params, sigma_bounds
    )
    mu, log_sigma, log_probs = result.mu[0], result.log_sigma[0], result.log_probs[0]
    k_hat = best_mode(mu, sample.truth)
    nll, residual = _gaussian_nll(mu[k_hat], log_sigma[k_hat], sample.truth)
    loss = nll - float(log_probs[k_hat])

    count = residual.shape[0] * residual.shape[1]
    d_mu = np.zeros_like(result.mu)
    d_log_sigma = np.zeros_like(result.log_sigma)
    d_mu[0, k_hat] = -residual / np.exp(log_sigma[k_hat]) / count
    d_log_sigma[0, k_hat] = (1.0 - residual ** 2) / count
    d_logits = np.exp(log_probs)[None].copy()
    d_logits[0, k_hat] -= 1.0

    return loss, backward(result, d_mu, d_log_sigma, d_logits, params)


def batch_loss_and_gradient(
    params: CmpModelParams,
    samples: Sequence[CmpSample],
    sigma_bounds: Tuple[float, float] = (1e-2, 1e2)
) -> Tuple[float, np.ndarray]:
    """Mean loss and gradient over a mini-batch."""
    total_loss = 0.0
    total_grad = np.zeros_like(params.values)
    for sample in samples:
        loss, grad = loss_and_gradient(params, sample, sigma_bounds)
        total_loss += loss
        total_grad += grad
    return total_loss / len(samples), total_grad / len(samples)


def cmp_train(
    dataset: Sequence[CmpSample],
    cfg: PredictorConfig,
    train_cfg: Optional[CmpTrainConfig] = None,
    params: Optional[CmpModelParams] = None
) -> Tuple[CmpModelParams, List[Tuple[int, float, float]]]:
    """
    Train the learned predictor.

    Args:
        dataset: Training samples (see :func:`build_cmp_samples`) or scenarios to build them from
        cfg: Predictor configuration fixing the architecture
        train_cfg: Optimisation settings
        params: Starting parameters; initialised from ``train_cfg.rng_seed`` when omitted

    Returns:
        Tuple of the trained parameters and the loss history as (step, loss, lr) rows

    Raises:
        ValueError: If the dataset is empty
        NonFiniteLoss: If a mini-batch loss or gradient is NaN or infinite
    """
    if not dataset:
        raise ValueError('cmp_train needs a non-empty dataset')
    if isinstance(dataset[0], Scenario):
        dataset = build_cmp_samples(dataset, cfg)
        if not dataset:
            raise ValueError('no scenario of the dataset has surrounding agents')
    train_cfg = train_cfg or CmpTrainConfig()
    params = params or init_params(cfg, seed=train_cfg.rng_seed)
    params.check(cfg)
    sigma_bounds = (cfg.sigma_floor, cfg.sigma_ceiling)

    batch_size = min(train_cfg.batch_size, len(dataset))
    steps_per_epoch = int(np.ceil(len(dataset) / batch_size))
    total_steps = train_cfg.steps or train_cfg.epochs * steps_per_epoch
    rng = np.random.default_rng(train_cfg.rng_seed)
    optimizer = Adam(params.values.size)
    values = params.values.copy()

    logger.info(
        f'Training {cfg.fusion}-fusion predictor ({values.size} parameters) on {len(dataset)} samples '
        f'for {total_steps} steps'
    )
    history = []
    order = np.arange(len(dataset))
    for step in range(total_steps):
        epoch, position = divmod(step, steps_per_epoch)
        if position == 0:
            order = rng.permutation(len(dataset))
        batch = [dataset[i] for i in order[position * batch_size:(position + 1) * batch_size]]

        lr = step_decay(train_cfg.learning_rate, train_cfg.lr_decay, train_cfg.decay_every_epochs, epoch)
        loss, grad = batch_loss_and_gradient(params.with_values(values), batch, sigma_bounds)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise NonFiniteLoss(f'non-finite training loss {loss} at step {step}', step=step, loss=loss)

        grad, norm = clip_grad_norm(grad, train_cfg.grad_clip)
        values = optimizer.step(values, grad, lr)
        history.append((step, loss, lr))
        if step % train_cfg.log_every == 0 or step == total_steps - 1:
            logger.info(f'Step {step}/{total_steps}: loss {loss:.4f}, grad norm {norm:.3f}, lr {lr:.2e}')

    return params.with_values(values), history
