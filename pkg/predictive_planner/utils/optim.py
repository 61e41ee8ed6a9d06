"""
Gradient-descent helpers shared by both training stages.

Key components:
- Adam: bias-corrected adaptive moment estimation over a flat parameter vector
- step_decay: piecewise-constant learning-rate schedule
- clip_grad_norm: global L2-norm gradient clipping

Example:
    >>> optimizer = Adam(size=7, beta1=0.9, beta2=0.999, epsilon=1e-8)
    >>> weights = optimizer.step(weights, grad, lr=1e-2)
"""

from typing import Tuple

import numpy as np


class Adam:
    """
    Adam optimizer over a flat float64 parameter vector.

    The first and second moment estimates are kept between calls; the learning rate is
    passed per step so callers own the schedule.

    Attributes:
        m (np.ndarray): First moment estimate
        v (np.ndarray): Second moment estimate
        t (int): Number of steps taken
    """

    def __init__(self, size: int, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        """
        Apply one update.

        Args:
            params: Current parameters
            grad: Gradient of the loss at ``params``
            lr: Learning rate for this step

        Returns:
            np.ndarray: Updated parameters (a new array)
        """
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return params - lr * m_hat / (np.sqrt(v_hat) + self.epsilon)


def step_decay(base_lr: float, decay: float, every: int, step: int) -> float:
    """Learning rate ``base_lr * decay ** (step // every)``."""
    return base_lr * decay ** (step // every)


def clip_grad_norm(grad: np.ndarray, max_norm: float) -> Tuple[np.ndarray, float]:
    """
    Scale ``grad`` down so its L2 norm is at most ``max_norm``.

    Returns:
        Tuple of the clipped gradient and the norm before clipping
    """
    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        grad = grad * (max_norm / norm)
    return grad, norm
