"""
Carlini-Wagner margin attack for ADE-Net
delta = epsilon * tanh(w) keeps every iterate inside the shared L-infinity box
"""
import logging
from typing import Tuple

import numpy as np

from src.autodiff import Tensor, clamp, grad, tanh
from src.nn.models import ModelHandle
from src.nn.optim import AdamState, adam_step

logger = logging.getLogger(__name__)

_MASK = 1e4


def _optimize(
    victim: ModelHandle,
    x: np.ndarray,
    y: np.ndarray,
    constants: np.ndarray,
    kappa: float,
    iters: int,
    lr: float,
    epsilon: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """One Adam run at fixed per-sample constants; returns (delta, flipped)"""
    n = x.shape[0]
    w = Tensor(np.zeros_like(x), requires_grad=True)
    state = AdamState.for_parameters([w], lr)
    clean = Tensor(x)
    mask = np.zeros((n, victim.output_dim))
    mask[np.arange(n), y] = _MASK
    other_mask = Tensor(-mask)
    weight = Tensor(constants)

    best_obj = np.full(n, np.inf)
    best_delta = np.zeros_like(x)
    flipped = np.zeros(n, dtype=bool)
    delta = None
    for it in range(iters + 1):
        delta = tanh(w) * epsilon
        logits = victim(clean + delta)
        margin = logits.pick(y) - (logits + other_mask).max(axis=1)
        objective = (delta * delta).sum(axis=1) + clamp(margin, -kappa, np.inf) * weight

        hit = np.argmax(logits.data, axis=1) != y
        better = hit & (objective.data < best_obj)
        best_obj[better] = objective.data[better]
        best_delta[better] = delta.data[better]
        flipped |= hit
        if it == iters:
            break
        (g,) = grad(objective.sum(), [w])
        adam_step(state, [w], [g])

    return np.where(flipped[:, None], best_delta, delta.data), flipped


def cw(
    victim: ModelHandle,
    x: np.ndarray,
    y: np.ndarray,
    c_cw: float = 1.0,
    kappa: float = 0.0,
    cw_iters: int = 100,
    lr: float = 0.01,
    epsilon: float = 0.1,
    binary_steps: int = 0,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Minimize ||delta||^2 + c * max(Z_y - max_{i != y} Z_i, -kappa) with Adam.

    Iteration 0 (delta = 0) is a candidate, so already-misclassified samples come
    back unperturbed when kappa is 0. With `binary_steps` > 0 the constant is
    searched per sample: it halves toward the lower bound after a flip and grows
    tenfold until an upper bound exists. Returns (x_adv, flipped).
    """
    n = x.shape[0]
    constants = np.full(n, float(c_cw))
    lower = np.zeros(n)
    upper = np.full(n, np.inf)
    best_delta = np.zeros_like(x)
    best_norm = np.full(n, np.inf)
    flipped = np.zeros(n, dtype=bool)

    for search in range(max(1, binary_steps)):
        delta, hit = _optimize(victim, x, y, constants, kappa, cw_iters, lr, epsilon)
        norms = np.sum(delta * delta, axis=1)
        improve = hit & (norms < best_norm)
        fallback = ~flipped & ~hit
        best_delta[improve | fallback] = delta[improve | fallback]
        best_norm[improve] = norms[improve]
        flipped |= hit

        upper = np.where(hit, np.minimum(upper, constants), upper)
        lower = np.where(hit, lower, np.maximum(lower, constants))
        grow = np.isinf(upper)
        constants = np.where(grow, constants * 10.0, (lower + upper) / 2.0)
        logger.debug(f"CW search {search}: {int(hit.sum())}/{n} flipped")

    missed = n - int(flipped.sum())
    if missed:
        logger.warning(f"CW left {missed}/{n} samples correctly classified")
    return x + best_delta, flipped
