"""
Maximum-entropy inverse reinforcement learning over trajectory proposals.

The cost of a proposal is the dot product of the cost weights with its seven features, and
the proposals of a scene follow the distribution P_i proportional to exp(-c_i). Training
maximises the likelihood of the demonstrated proposal (the one whose endpoint is nearest
the recorded AV future) under that distribution, with L2 weight decay.

Key components:
- cost, proposal_distribution: linear cost and the max-entropy distribution
- irl_loss, irl_gradient: batch negative log-likelihood and its closed-form gradient
  (demonstrated features minus expected features, plus weight decay)
- label_demo, label_by_weights: demonstration labels from recorded futures or planted weights
- train_irl: Adam with a stepwise learning-rate decay
- select_behavior: rank proposals by probability
- load_weights, save_weights, write_loss_history: weights and loss-curve files

Example:
    >>> samples = [IrlSample(features=F, label=label_demo(proposals, truth)) for ...]
    >>> weights, history = train_irl(samples, IrlTrainConfig())
    >>> ranked = select_behavior(proposals, feature_matrix, weights)
"""

import csv
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import log_softmax, softmax

from predictive_planner.errors import DegenerateScenario, NonFiniteLoss
from predictive_planner.features import FEATURE_NAMES
from predictive_planner.models import IrlTrainConfig
from predictive_planner.utils.optim import Adam, step_decay


logger = logging.getLogger(__name__)


@dataclass(eq=False)
class IrlSample:
    """
    Features of every proposal of one scene and the index of the demonstrated proposal.

    Attributes:
        features (np.ndarray): (M, 7) feature matrix
        label (int): Demonstrated proposal index m_hat
        scenario_id (str): Source scene
    """
    features: np.ndarray
    label: int
    scenario_id: str = ''


def cost(weights: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Linear cost w^T f; ``features`` may be one vector or an (M, 7) matrix."""
    weights = np.asarray(weights, dtype=float)
    features = np.asarray(features, dtype=float)
    if features.shape[-1] != weights.shape[0]:
        raise ValueError(f'{features.shape[-1]} features do not align with {weights.shape[0]} weights')
    return features @ weights


def proposal_distribution(costs: Sequence[float]) -> np.ndarray:
    """
    Max-entropy distribution P_i = exp(-c_i) / sum_j exp(-c_j).

    Args:
        costs: One or more finite costs

    Returns:
        np.ndarray: Probabilities aligned with ``costs``
    """
    costs = np.asarray(costs, dtype=float)
    if costs.size == 0:
        raise ValueError('proposal_distribution needs at least one cost')
    return softmax(-costs)


def _check(samples: Sequence[IrlSample]) -> None:
    if not samples:
        raise ValueError('IRL needs at least one sample')
    for sample in samples:
        if sample.features.shape[0] < 2:
            raise DegenerateScenario(f'scenario {sample.scenario_id!r} has fewer than 2 proposals')
        if not 0 <= sample.label < sample.features.shape[0]:
            raise DegenerateScenario(f'scenario {sample.scenario_id!r} has label {sample.label} out of range')


def negative_log_likelihood(weights: np.ndarray, samples: Sequence[IrlSample]) -> float:
    """Mean -log P(demonstration | w) over ``samples``, without weight decay."""
    _check(samples)
    return float(np.mean([
        -log_softmax(-cost(weights, s.features))[s.label] for s in samples
    ]))


def irl_loss(weights: np.ndarray, samples: Sequence[IrlSample], weight_decay: float = 1e-2) -> float:
    """
    Regularised IRL loss.

    Args:
        weights: Cost weights (7,)
        samples: Batch of labeled scenes, each with at least two proposals
        weight_decay: L2 coefficient

    Returns:
        float: mean negative log-likelihood plus weight_decay / 2 * ||w||^2

    Raises:
        DegenerateScenario: If a scene has fewer than two proposals or an invalid label
    """
    weights = np.asarray(weights, dtype=float)
    return negative_log_likelihood(weights, samples) + 0.5 * weight_decay * float(weights @ weights)


def irl_gradient(weights: np.ndarray, samples: Sequence[IrlSample], weight_decay: float = 1e-2) -> np.ndarray:
    """
    Closed-form gradient of :func:`irl_loss`.

    Per scene the gradient is the demonstrated feature vector minus the expected feature
    vector under the current distribution, so descent lowers the demonstration's cost relative
    to the rest. The batch mean is returned plus weight_decay * w.
    """
    _check(samples)
    weights = np.asarray(weights, dtype=float)
    grad = np.zeros_like(weights)
    for sample in samples:
        probs = proposal_distribution(cost(weights, sample.features))
        grad += sample.features[sample.label] - probs @ sample.features
    return grad / len(samples) + weight_decay * weights


def label_demo(proposals: Sequence, ground_truth_future: np.ndarray) -> int:
    """
    Index of the proposal whose final position is nearest the ground-truth final position.

    Args:
        proposals: Non-empty proposals (or (T_f, >=2) state arrays)
        ground_truth_future: (T_f, >=2) recorded future of the AV

    Returns:
        int: Lowest index among the nearest endpoints
    """
    if len(proposals) == 0:
        raise ValueError('label_demo needs at least one proposal')
    target = np.asarray(ground_truth_future, dtype=float)[-1, :2]
    endpoints = np.array([np.asarray(getattr(p, 'states', p))[-1, :2] for p in proposals])
    return int(np.argmin(np.linalg.norm(endpoints - target, axis=1)))


def label_by_weights(features: np.ndarray, weights: np.ndarray) -> int:
    """Index of the lowest-cost proposal under planted weights (lowest index on ties)."""
    return int(np.argmin(cost(weights, features)))


def demo_accuracy(weights: np.ndarray, samples: Sequence[IrlSample]) -> float:
    """Fraction of samples whose most probable proposal is the demonstrated one."""
    if not samples:
        return 0.0
    hits = [int(np.argmin(cost(weights, s.features))) == s.label for s in samples]
    return float(np.mean(hits))


def train_irl(
    samples: Sequence[IrlSample],
    cfg: Optional[IrlTrainConfig] = None,
    initial_weights: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, List[Tuple[int, float, float]]]:
    """
    Fit cost weights by maximum-entropy IRL.

    Weights start at zero. Each step draws a mini-batch without replacement, takes an Adam
    step on the regularised loss, and records the unregularised negative log-likelihood.

    Args:
        samples: Labeled scenes
        cfg: Training hyperparameters
        initial_weights: Optional starting point instead of zeros

    Returns:
        Tuple of the final weights (7,) and the history of (step, nll, lr) rows

    Raises:
        ValueError: If ``samples`` is empty
        NonFiniteLoss: If the loss becomes NaN or infinite
    """
    cfg = cfg or IrlTrainConfig()
    _check(samples)
    rng = np.random.default_rng(cfg.rng_seed)
    weights = np.zeros(len(FEATURE_NAMES)) if initial_weights is None else np.array(initial_weights, dtype=float)
    optimizer = Adam(weights.size, cfg.beta1, cfg.beta2, cfg.epsilon)
    batch_size = min(cfg.batch_size, len(samples))

    logger.info(f'Training IRL weights on {len(samples)} scenes for {cfg.steps} steps')
    history = []
    for step in range(cfg.steps):
        batch = [samples[i] for i in rng.choice(len(samples), size=batch_size, replace=False)]
        lr = step_decay(cfg.learning_rate, cfg.lr_decay, cfg.decay_every, step)
        nll = negative_log_likelihood(weights, batch)
        if not np.isfinite(nll):
            raise NonFiniteLoss(f'non-finite IRL loss at step {step}', step=step, loss=nll)
        weights = optimizer.step(weights, irl_gradient(weights, batch, cfg.weight_decay), lr)
        history.append((step, nll, lr))
        if step % 50 == 0 or step == cfg.steps - 1:
            logger.info(f'IRL step {step}/{cfg.steps}: nll {nll:.4f}, lr {lr:.2e}')

    logger.debug('Learned weights: ' + ', '.join(f'{n}={w:.4f}' for n, w in zip(FEATURE_NAMES, weights)))
    return weights, history


def select_behavior(
    proposals: Sequence,
    features: np.ndarray,
    weights: np.ndarray
) -> List[Tuple[object, float]]:
    """
    Rank proposals by max-entropy probability, highest first.

    Args:
        proposals: Candidate proposals
        features: (M, 7) features aligned with ``proposals``
        weights: Cost weights

    Returns:
        List of (proposal, probability); ties keep the original order
    """
    features = np.asarray(features, dtype=float)
    if len(proposals) != features.shape[0]:
        raise ValueError(f'{len(proposals)} proposals but {features.shape[0]} feature rows')
    probs = proposal_distribution(cost(weights, features))
    order = np.argsort(-probs, kind='stable')
    return [(proposals[i], float(probs[i])) for i in order]


def save_weights(weights: np.ndarray, path: str) -> None:
    """Write weights as one ``name value`` line per feature."""
    with open(path, 'w') as f:
        for name, value in zip(FEATURE_NAMES, weights):
            f.write(f'{name} {float(value)!r}\n')
    logger.info(f'Saved cost weights to {path}')


def load_weights(path: str) -> np.ndarray:
    """
    Read weights written by :func:`save_weights`.

    Raises:
        ValueError: If the file does not hold exactly the seven named features
    """
    values = {}
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            name, value = line.split()
            values[name] = float(value)
    if set(values) != set(FEATURE_NAMES):
        raise ValueError(f'{path}: expected weights for {", ".join(FEATURE_NAMES)}')
    return np.array([values[name] for name in FEATURE_NAMES])


def write_loss_history(history: Sequence[Tuple[int, float, float]], path: str) -> None:
    """Write a loss curve as CSV with columns step, loss, lr."""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['step', 'loss', 'lr'])
        for step, loss, lr in history:
            writer.writerow([step, repr(float(loss)), repr(float(lr))])
    logger.info(f'Wrote {len(history)} loss rows to {path}')
