# Autodiff package

from src.autodiff.tensor import ComputationRecord, Function, Tensor, backward, grad
from src.autodiff.functional import (
    avg_pool1d,
    clamp,
    concat,
    conv1d,
    elementwise,
    exp,
    log,
    matmul,
    relu,
    sign,
    softmax_cross_entropy,
    tanh,
    upsample_nearest1d,
)

__all__ = [
    'ComputationRecord',
    'Function',
    'Tensor',
    'backward',
    'grad',
    'avg_pool1d',
    'clamp',
    'concat',
    'conv1d',
    'elementwise',
    'exp',
    'log',
    'matmul',
    'relu',
    'sign',
    'softmax_cross_entropy',
    'tanh',
    'upsample_nearest1d',
]
