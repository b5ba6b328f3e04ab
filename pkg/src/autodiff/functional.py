"""
Differentiable primitives for ADE-Net networks, losses and attacks
Elementwise maps, convolution, pooling and the classification loss
"""
import logging
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.autodiff.tensor import Function, Operand, Tensor
from src.errors import ContractError, DimensionError, LabelError, NumericalError

logger = logging.getLogger(__name__)


class Relu(Function):
    tag = "relu"

    def forward(self, a: np.ndarray) -> np.ndarray:
        self.saved["mask"] = a > 0
        return np.where(self.saved["mask"], a, 0.0)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad * self.saved["mask"],)


class Tanh(Function):
    tag = "tanh"

    def forward(self, a: np.ndarray) -> np.ndarray:
        out = np.tanh(a)
        self.saved["out"] = out
        return out

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        out = self.saved["out"]
        return (grad * (1.0 - out * out),)


class Exp(Function):
    tag = "exp"

    def forward(self, a: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore"):
            out = np.exp(a)
        self.saved["out"] = out
        return out

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad * self.saved["out"],)


class Log(Function):
    tag = "log"

    def forward(self, a: np.ndarray) -> np.ndarray:
        if np.any(a <= 0):
            raise NumericalError("log of non-positive input", f"min value {a.min()!r}")
        self.saved["a"] = a
        return np.log(a)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad / self.saved["a"],)


class Clamp(Function):
    """Clip into [lo, hi]; zero gradient outside the interval"""

    tag = "clamp"

    def forward(self, a: np.ndarray, lo: float, hi: float) -> np.ndarray:
        if lo > hi:
            raise ContractError(f"clamp bounds reversed: lo={lo} > hi={hi}")
        self.saved["mask"] = (a >= lo) & (a <= hi)
        return np.clip(a, lo, hi)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad * self.saved["mask"],)


class Sign(Function):
    tag = "sign"

    def forward(self, a: np.ndarray) -> np.ndarray:
        return np.sign(a)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (np.zeros_like(grad),)


def relu(x: Tensor) -> Tensor:
    return Relu.apply(x)


def tanh(x: Tensor) -> Tensor:
    return Tanh.apply(x)


def exp(x: Tensor) -> Tensor:
    return Exp.apply(x)


def log(x: Tensor) -> Tensor:
    return Log.apply(x)


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    return Clamp.apply(x, lo=lo, hi=hi)


def sign(x: Tensor) -> Tensor:
    return Sign.apply(x)


_ELEMENTWISE: Dict[str, Callable[..., Tensor]] = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "relu": relu,
    "tanh": tanh,
    "exp": exp,
    "log": log,
    "clamp": clamp,
    "sign": sign,
}


def elementwise(op: str, *operands: Operand, **params: Any) -> Tensor:
    """Apply a named elementwise operation, e.g. elementwise("clamp", x, lo=-1, hi=1)"""
    if op not in _ELEMENTWISE:
        raise ContractError(f"unknown elementwise op '{op}'", f"expected one of {sorted(_ELEMENTWISE)}")
    tensors = [Tensor.wrap(o) for o in operands]
    return _ELEMENTWISE[op](*tensors, **params)


def matmul(a: Operand, b: Operand) -> Tensor:
    return Tensor.wrap(a) @ Tensor.wrap(b)


class SoftmaxCrossEntropy(Function):
    """Mean negative log-likelihood of integer labels under softmax(logits)"""

    tag = "softmax_cross_entropy"

    def forward(self, logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
        if logits.ndim != 2 or logits.shape[0] < 1:
            raise DimensionError(f"cross entropy expects n x C logits with n >= 1, got {logits.shape}")
        n, classes = logits.shape
        if labels.shape != (n,):
            raise DimensionError(f"{labels.shape[0] if labels.ndim else 0} labels for {n} logit rows")
        if labels.size and (labels.min() < 0 or labels.max() >= classes):
            raise LabelError(f"label outside 0..{classes - 1}", f"got range {labels.min()}..{labels.max()}")
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1))
        rows = np.arange(n)
        self.saved["probs"] = np.exp(shifted - log_norm[:, None])
        self.saved["rows"], self.saved["labels"] = rows, labels
        return np.mean(log_norm - shifted[rows, labels])

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        probs = self.saved["probs"].copy()
        probs[self.saved["rows"], self.saved["labels"]] -= 1.0
        return (grad * probs / probs.shape[0],)


def softmax_cross_entropy(logits: Tensor, labels: Sequence[int]) -> Tensor:
    labels = np.asarray(labels)
    if labels.size and not np.issubdtype(labels.dtype, np.integer):
        raise LabelError("labels must be integers", f"got dtype {labels.dtype}")
    return SoftmaxCrossEntropy.apply(logits, labels=labels.astype(np.int64))


class Conv1d(Function):
    """Batched 1-D cross-correlation; inputs are (x, kernel) or (x, kernel, bias)"""

    tag = "conv1d"

    def forward(
        self,
        x: np.ndarray,
        kernel: np.ndarray,
        bias: Optional[np.ndarray] = None,
        stride: int = 1,
        padding: int = 0,
    ) -> np.ndarray:
        if x.ndim != 3 or kernel.ndim != 3:
            raise DimensionError(f"conv1d expects 3-D input and kernel, got {x.shape} and {kernel.shape}")
        _, channels, length = x.shape
        _, in_channels, k = kernel.shape
        if in_channels != channels:
            raise DimensionError(f"conv1d kernel expects {in_channels} channels, input has {channels}")
        if stride < 1 or padding < 0:
            raise ContractError(f"conv1d needs stride >= 1 and padding >= 0, got {stride}, {padding}")
        if length + 2 * padding < k:
            raise DimensionError(f"conv1d kernel of width {k} exceeds padded length {length + 2 * padding}")
        padded = np.pad(x, ((0, 0), (0, 0), (padding, padding))) if padding else x
        windows = sliding_window_view(padded, k, axis=2)[:, :, ::stride, :]
        self.saved.update(windows=windows, kernel=kernel, padded_shape=padded.shape)
        self.saved.update(stride=stride, padding=padding, length=length, has_bias=bias is not None)
        out = np.einsum("bclk,ock->bol", windows, kernel)
        if bias is not None:
            out = out + bias[None, :, None]
        return out

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        s = self.saved
        kernel, stride, padding = s["kernel"], s["stride"], s["padding"]
        out_len = grad.shape[2]
        k = kernel.shape[2]
        grad_windows = np.einsum("bol,ock->bclk", grad, kernel)
        grad_padded = np.zeros(s["padded_shape"])
        for j in range(k):
            grad_padded[:, :, j: j + stride * (out_len - 1) + 1: stride] += grad_windows[:, :, :, j]
        grad_x = grad_padded[:, :, padding: padding + s["length"]]
        grad_kernel = np.einsum("bclk,bol->ock", s["windows"], grad)
        if s["has_bias"]:
            return grad_x, grad_kernel, grad.sum(axis=(0, 2))
        return grad_x, grad_kernel


def conv1d(
    x: Tensor,
    kernel: Tensor,
    stride: int = 1,
    padding: int = 0,
    bias: Optional[Tensor] = None,
) -> Tensor:
    if bias is None:
        return Conv1d.apply(x, kernel, stride=stride, padding=padding)
    return Conv1d.apply(x, kernel, bias, stride=stride, padding=padding)


class AvgPool1d(Function):
    """Stride-2 average pooling over the last axis; an odd trailing element is dropped"""

    tag = "avg_pool1d"

    def forward(self, x: np.ndarray) -> np.ndarray:
        half = x.shape[-1] // 2
        if half < 1:
            raise DimensionError(f"avg_pool1d needs length >= 2, got {x.shape[-1]}")
        self.saved["shape"], self.saved["half"] = x.shape, half
        return (x[..., 0: 2 * half: 2] + x[..., 1: 2 * half: 2]) / 2.0

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        half = self.saved["half"]
        out = np.zeros(self.saved["shape"])
        out[..., 0: 2 * half: 2] = grad / 2.0
        out[..., 1: 2 * half: 2] = grad / 2.0
        return (out,)


class UpsampleNearest1d(Function):
    """Nearest-neighbour x2 upsampling, cut or edge-extended to a target length"""

    tag = "upsample_nearest1d"

    def forward(self, x: np.ndarray, target_length: int) -> np.ndarray:
        length = x.shape[-1]
        source = np.minimum(np.arange(target_length) // 2, length - 1)
        selector = np.zeros((length, target_length))
        selector[source, np.arange(target_length)] = 1.0
        self.saved["selector"] = selector
        return x @ selector

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad @ self.saved["selector"].T,)


class Concat(Function):
    tag = "concat"

    def forward(self, *arrays: np.ndarray, axis: int = 1) -> np.ndarray:
        self.saved["sizes"], self.saved["axis"] = [a.shape[axis] for a in arrays], axis
        try:
            return np.concatenate(arrays, axis=axis)
        except ValueError as e:
            raise DimensionError("concat: operand shapes disagree", str(e))

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, ...]:
        cuts = np.cumsum(self.saved["sizes"])[:-1]
        return tuple(np.split(grad, cuts, axis=self.saved["axis"]))


def avg_pool1d(x: Tensor) -> Tensor:
    return AvgPool1d.apply(x)


def upsample_nearest1d(x: Tensor, target_length: int) -> Tensor:
    return UpsampleNearest1d.apply(x, target_length=target_length)


def concat(tensors: List[Tensor], axis: int = 1) -> Tensor:
    return Concat.apply(*tensors, axis=axis)
