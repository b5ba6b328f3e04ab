"""
Adam optimizer for ADE-Net
Bias-corrected moments, parameters updated in place
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from src.autodiff import Tensor
from src.errors import ContractError

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: List[np.ndarray] = field(default_factory=list)
    second_moment: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_parameters(cls, params: Sequence[Tensor], lr: float, **kwargs: float) -> "AdamState":
        if lr <= 0:
            raise ContractError(f"learning rate must be positive, got {lr}")
        return cls(
            lr=lr,
            first_moment=[np.zeros_like(p.data) for p in params],
            second_moment=[np.zeros_like(p.data) for p in params],
            **kwargs,
        )


def adam_step(state: AdamState, params: Sequence[Tensor], grads: Sequence[Optional[np.ndarray]]) -> None:
    """One Adam update of `params` from `grads`; every parameter's `.grad` is cleared afterwards"""
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ContractError(
            f"adam_step got {len(params)} parameters, {len(grads)} gradients, "
            f"{len(state.first_moment)} moment buffers"
        )
    for i, (param, g) in enumerate(zip(params, grads)):
        if g is None:
            raise ContractError(f"parameter {i} has no gradient")
        if g.shape != param.shape or state.first_moment[i].shape != param.shape:
            raise ContractError(f"parameter {i}: gradient shape {g.shape} != parameter shape {param.shape}")

    state.step_count += 1
    t = state.step_count
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t
    for param, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        param.data = param.data - state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        param.grad = None


class Adam:
    """Reads `.grad` from its parameters and steps them"""

    def __init__(self, params: Sequence[Tensor], lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.state = AdamState.for_parameters(self.params, lr, beta1=beta1, beta2=beta2, eps=eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        adam_step(self.state, self.params, [p.grad for p in self.params])
