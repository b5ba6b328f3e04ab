"""
Gradient-sign attacks for ADE-Net
FGSM, I-FGSM and PGD inside an L-infinity ball; outputs are not clipped to a data range
"""
import logging
from typing import Optional, Sequence, Union

import numpy as np

from src.autodiff import Tensor, grad, softmax_cross_entropy
from src.nn.models import ModelHandle

logger = logging.getLogger(__name__)

Seed = Union[int, Sequence[int]]


def input_gradient(victim: ModelHandle, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """d CE(victim(x), y) / dx without touching the victim's parameter gradients"""
    inputs = Tensor(x, requires_grad=True)
    loss = softmax_cross_entropy(victim(inputs), y)
    (g,) = grad(loss, [inputs])
    return g


def fgsm(victim: ModelHandle, x: np.ndarray, y: np.ndarray, epsilon: float) -> np.ndarray:
    return x + epsilon * np.sign(input_gradient(victim, x, y))


def _sign_steps(
    victim: ModelHandle,
    x: np.ndarray,
    y: np.ndarray,
    start: np.ndarray,
    epsilon: float,
    steps: int,
    step_size: float,
) -> np.ndarray:
    x_adv = start
    for _ in range(steps):
        x_adv = x_adv + step_size * np.sign(input_gradient(victim, x_adv, y))
        x_adv = np.clip(x_adv, x - epsilon, x + epsilon)
    return x_adv


def ifgsm(
    victim: ModelHandle,
    x: np.ndarray,
    y: np.ndarray,
    epsilon: float,
    steps: int = 10,
    step_size: Optional[float] = None,
) -> np.ndarray:
    step_size = epsilon / steps if step_size is None else step_size
    return _sign_steps(victim, x, y, x.copy(), epsilon, steps, step_size)


def pgd(
    victim: ModelHandle,
    x: np.ndarray,
    y: np.ndarray,
    epsilon: float,
    steps: int = 10,
    step_size: Optional[float] = None,
    random_start: bool = True,
    seed: Seed = 0,
) -> np.ndarray:
    """I-FGSM from a uniform random point of the epsilon-ball, projected after every step"""
    step_size = epsilon / 4 if step_size is None else step_size
    if random_start:
        start = x + np.random.default_rng(seed).uniform(-epsilon, epsilon, size=x.shape)
    else:
        start = x.copy()
    return _sign_steps(victim, x, y, start, epsilon, steps, step_size)
