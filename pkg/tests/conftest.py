"""
Shared fixtures for the ADE-Net test suite
"""
from typing import Callable, Dict, List

import numpy as np
import pytest

from src.autodiff import Tensor, backward
from src.data.dataset import PixelDataset
from src.nn.models import ModelHandle, build_mlp


def numeric_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central differences of a scalar function of an array"""
    x = np.array(x, dtype=np.float64)
    out = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        original = x[idx]
        x[idx] = original + h
        plus = f(x)
        x[idx] = original - h
        minus = f(x)
        x[idx] = original
        out[idx] = (plus - minus) / (2 * h)
    return out


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


@pytest.fixture
def gradcheck():
    """
    Compare backward() with central differences for f: Tensor -> scalar Tensor.
    Returns the relative error.
    """

    def check(f: Callable[[Tensor], Tensor], x: np.ndarray, h: float = 1e-4) -> float:
        leaf = Tensor(x, requires_grad=True)
        backward(f(leaf))
        numeric = numeric_gradient(lambda v: f(Tensor(v)).item(), x, h)
        return relative_error(leaf.grad, numeric)

    return check


@pytest.fixture
def parameter_gradcheck():
    """
    Same comparison for a loss over model parameters: backward() once, then
    central differences per parameter. Returns the worst relative error.
    """

    def check(loss_fn: Callable[[], Tensor], params: List[Tensor], h: float = 1e-5) -> float:
        for param in params:
            param.grad = None
        backward(loss_fn())
        worst = 0.0
        for param in params:
            analytic = param.grad if param.grad is not None else np.zeros_like(param.data)

            def at(values, param=param):
                saved = param.data
                param.data = values
                try:
                    return loss_fn().item()
                finally:
                    param.data = saved

            numeric = numeric_gradient(at, param.data.copy(), h)
            worst = max(worst, relative_error(analytic, numeric))
        return worst

    return check


class LinearModel(ModelHandle):
    """logits = x @ W with a fixed weight matrix"""

    def __init__(self, weight: np.ndarray):
        weight = np.asarray(weight, dtype=np.float64)
        super().__init__({"arch": "linear", "input_dim": weight.shape[0], "output_dim": weight.shape[1], "seed": 0})
        self.weight = Tensor(weight, requires_grad=True)
        self._named.append(("weight", self.weight))

    def forward(self, x: Tensor) -> Tensor:
        return x @ self.weight


class ColumnEcho(ModelHandle):
    """One-hot logits of the integer stored in one feature column"""

    def __init__(self, input_dim: int, output_dim: int, column: int):
        super().__init__({"arch": "echo", "input_dim": input_dim, "output_dim": output_dim, "seed": 0})
        self.column = column
        self.bias = Tensor(np.zeros(output_dim), requires_grad=True)
        self._named.append(("bias", self.bias))

    def forward(self, x: Tensor) -> Tensor:
        labels = x.data[:, self.column].astype(np.int64)
        return Tensor(np.eye(self.output_dim)[labels]) + self.bias


@pytest.fixture
def linear_model():
    return LinearModel


@pytest.fixture
def column_echo():
    return ColumnEcho


@pytest.fixture
def tiny_dataset() -> PixelDataset:
    rng = np.random.default_rng(7)
    features = rng.normal(size=(60, 6))
    labels = np.repeat(np.arange(3), 20)
    features[:, 0] += 2.0 * labels
    return PixelDataset(features, labels, 3, "train")


@pytest.fixture
def random_victim() -> ModelHandle:
    return build_mlp(6, [8], 3, seed=11)


@pytest.fixture
def tiny_config_values() -> Dict[str, object]:
    """Settings small enough for a full pipeline run in a unit test"""
    return {
        "epochs": 2,
        "offline_epochs": 2,
        "victim_epochs": 2,
        "batch_size": 16,
        "lr_discriminator": 0.01,
        "lr_expert": 0.01,
        "seeds": [0],
        "mlp_hidden": [8],
        "synth_classes": 3,
        "synth_bands": 8,
        "synth_n_per_class": 20,
        "cw_iters": 3,
        "pgd_steps": 2,
        "ifgsm_steps": 2,
        "ov_cap": 16,
    }
