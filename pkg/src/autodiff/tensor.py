"""
Dense tensors with reverse-mode automatic differentiation for ADE-Net
Every network, loss and attack gradient in the project is built on this module
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import ContractError, DimensionError, NumericalError

logger = logging.getLogger(__name__)

Operand = Union["Tensor", np.ndarray, float, int, Sequence[float]]


def _check_broadcast(a: Tuple[int, ...], b: Tuple[int, ...], tag: str) -> None:
    """Only equal shapes, scalar-tensor pairs and leading batch dimensions broadcast"""
    if a == b:
        return
    if int(np.prod(a)) == 1 and len(a) <= 1 or int(np.prod(b)) == 1 and len(b) <= 1:
        return
    short, long = (a, b) if len(a) < len(b) else (b, a)
    if len(short) < len(long) and tuple(long[len(long) - len(short):]) == tuple(short):
        return
    raise DimensionError(f"{tag}: shapes {a} and {b} do not broadcast")


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a gradient back down to the shape of the operand that was broadcast"""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Function:
    """
    Base class for differentiable primitives.

    Subclasses implement `forward` on raw arrays and `backward`, which maps the
    gradient of the output to one gradient (or None) per input tensor.
    """

    tag = "function"

    def __init__(self, *tensors: "Tensor"):
        self.tensors = tensors
        self.saved: Dict[str, Any] = {}

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f"{self.tag} has no forward pass")

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError(f"{self.tag} has no backward pass")

    @classmethod
    def apply(cls, *tensors: "Tensor", **kwargs: Any) -> "Tensor":
        func = cls(*tensors)
        out = np.asarray(func.forward(*(t.data for t in tensors), **kwargs), dtype=np.float64)
        if not np.all(np.isfinite(out)):
            raise NumericalError(f"{cls.tag} produced non-finite values", f"output shape {out.shape}")
        requires_grad = any(t.requires_grad for t in tensors)
        return Tensor(out, requires_grad=requires_grad, creator=func if requires_grad else None)


class Tensor:
    """A float64 array that records the operations applied to it"""

    __array_priority__ = 100

    def __init__(
        self,
        data: Operand,
        requires_grad: bool = False,
        creator: Optional[Function] = None,
    ):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.creator = creator

    @staticmethod
    def wrap(value: Operand) -> "Tensor":
        return value if isinstance(value, Tensor) else Tensor(value)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def item(self) -> float:
        if self.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Arithmetic
    def __add__(self, other: Operand) -> "Tensor":
        return Add.apply(self, Tensor.wrap(other))

    def __radd__(self, other: Operand) -> "Tensor":
        return Add.apply(Tensor.wrap(other), self)

    def __sub__(self, other: Operand) -> "Tensor":
        return Sub.apply(self, Tensor.wrap(other))

    def __rsub__(self, other: Operand) -> "Tensor":
        return Sub.apply(Tensor.wrap(other), self)

    def __mul__(self, other: Operand) -> "Tensor":
        return Mul.apply(self, Tensor.wrap(other))

    def __rmul__(self, other: Operand) -> "Tensor":
        return Mul.apply(Tensor.wrap(other), self)

    def __truediv__(self, other: Operand) -> "Tensor":
        return Div.apply(self, Tensor.wrap(other))

    def __rtruediv__(self, other: Operand) -> "Tensor":
        return Div.apply(Tensor.wrap(other), self)

    def __neg__(self) -> "Tensor":
        return Neg.apply(self)

    def __matmul__(self, other: Operand) -> "Tensor":
        return MatMul.apply(self, Tensor.wrap(other))

    def __rmatmul__(self, other: Operand) -> "Tensor":
        return MatMul.apply(Tensor.wrap(other), self)

    # Reductions and shape
    def sum(self, axis: Optional[int] = None) -> "Tensor":
        return Sum.apply(self, axis=axis)

    def mean(self, axis: Optional[int] = None) -> "Tensor":
        return Mean.apply(self, axis=axis)

    def max(self, axis: int) -> "Tensor":
        return Max.apply(self, axis=axis)

    def sqrt(self) -> "Tensor":
        return Sqrt.apply(self)

    def transpose(self) -> "Tensor":
        return Transpose.apply(self)

    def reshape(self, *shape: int) -> "Tensor":
        return Reshape.apply(self, shape=shape)

    def take_rows(self, index: np.ndarray) -> "Tensor":
        return TakeRows.apply(self, index=np.asarray(index, dtype=np.int64))

    def pick(self, labels: np.ndarray) -> "Tensor":
        return Pick.apply(self, labels=np.asarray(labels, dtype=np.int64))


class Add(Function):
    tag = "add"

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _check_broadcast(a.shape, b.shape, self.tag)
        self.saved["shapes"] = (a.shape, b.shape)
        return a + b

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return grad, grad


class Sub(Function):
    tag = "sub"

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _check_broadcast(a.shape, b.shape, self.tag)
        return a - b

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return grad, -grad


class Mul(Function):
    tag = "mul"

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _check_broadcast(a.shape, b.shape, self.tag)
        self.saved["a"], self.saved["b"] = a, b
        return a * b

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return grad * self.saved["b"], grad * self.saved["a"]


class Div(Function):
    tag = "div"

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _check_broadcast(a.shape, b.shape, self.tag)
        if np.any(b == 0):
            raise NumericalError("division by zero")
        self.saved["a"], self.saved["b"] = a, b
        return a / b

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        a, b = self.saved["a"], self.saved["b"]
        return grad / b, -grad * a / (b * b)


class Neg(Function):
    tag = "neg"

    def forward(self, a: np.ndarray) -> np.ndarray:
        return -a

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (-grad,)


class MatMul(Function):
    tag = "matmul"

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
        self.saved["a"], self.saved["b"] = a, b
        return a @ b

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        a, b = self.saved["a"], self.saved["b"]
        return grad @ b.T, a.T @ grad


class Transpose(Function):
    tag = "transpose"

    def forward(self, a: np.ndarray) -> np.ndarray:
        if a.ndim != 2:
            raise DimensionError(f"transpose expects a matrix, got shape {a.shape}")
        return a.T

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad.T,)


class Reshape(Function):
    tag = "reshape"

    def forward(self, a: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
        self.saved["shape"] = a.shape
        try:
            return a.reshape(shape)
        except ValueError as e:
            raise DimensionError(f"reshape: {a.shape} -> {shape}", str(e))

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad.reshape(self.saved["shape"]),)


class Sum(Function):
    tag = "sum"

    def forward(self, a: np.ndarray, axis: Optional[int] = None) -> np.ndarray:
        self.saved["shape"], self.saved["axis"] = a.shape, axis
        return a.sum(axis=axis)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        shape, axis = self.saved["shape"], self.saved["axis"]
        if axis is not None:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, shape).copy(),)


class Mean(Function):
    tag = "mean"

    def forward(self, a: np.ndarray, axis: Optional[int] = None) -> np.ndarray:
        self.saved["shape"], self.saved["axis"] = a.shape, axis
        self.saved["count"] = a.size if axis is None else a.shape[axis]
        return a.mean(axis=axis)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        shape, axis = self.saved["shape"], self.saved["axis"]
        if axis is not None:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, shape) / self.saved["count"],)


class Max(Function):
    """Maximum along one axis; the gradient goes to the first maximal entry"""

    tag = "max"

    def forward(self, a: np.ndarray, axis: int) -> np.ndarray:
        index = np.argmax(a, axis=axis)
        self.saved["shape"], self.saved["axis"], self.saved["index"] = a.shape, axis, index
        return np.take_along_axis(a, np.expand_dims(index, axis), axis=axis).squeeze(axis)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        axis = self.saved["axis"]
        out = np.zeros(self.saved["shape"])
        np.put_along_axis(
            out, np.expand_dims(self.saved["index"], axis), np.expand_dims(grad, axis), axis=axis
        )
        return (out,)


class Sqrt(Function):
    tag = "sqrt"

    def forward(self, a: np.ndarray) -> np.ndarray:
        if np.any(a < 0):
            raise NumericalError("sqrt of negative input")
        out = np.sqrt(a)
        self.saved["out"] = out
        return out

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        out = self.saved["out"]
        if np.any(out == 0):
            raise NumericalError("sqrt gradient undefined at zero")
        return (grad / (2.0 * out),)


class TakeRows(Function):
    tag = "take_rows"

    def forward(self, a: np.ndarray, index: np.ndarray) -> np.ndarray:
        if index.size and (index.min() < 0 or index.max() >= a.shape[0]):
            raise DimensionError(f"take_rows: index out of range for {a.shape[0]} rows")
        self.saved["shape"], self.saved["index"] = a.shape, index
        return a[index]

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        out = np.zeros(self.saved["shape"])
        np.add.at(out, self.saved["index"], grad)
        return (out,)


class Pick(Function):
    """Select one entry per row, e.g. the logit of each sample's label"""

    tag = "pick"

    def forward(self, a: np.ndarray, labels: np.ndarray) -> np.ndarray:
        if a.ndim != 2 or labels.shape != (a.shape[0],):
            raise DimensionError(f"pick: {labels.shape} labels for matrix {a.shape}")
        rows = np.arange(a.shape[0])
        self.saved["shape"], self.saved["rows"], self.saved["labels"] = a.shape, rows, labels
        return a[rows, labels]

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        out = np.zeros(self.saved["shape"])
        out[self.saved["rows"], self.saved["labels"]] = grad
        return (out,)


@dataclass
class RecordEntry:
    """One executed primitive in a computation record"""

    tag: str
    function: Function
    inputs: Tuple[Tensor, ...]
    output: Tensor


class ComputationRecord:
    """
    Topologically ordered list of the primitives that produced a root tensor.

    Every input of entry i is either a leaf or the output of an entry before i.
    """

    def __init__(self, entries: List[RecordEntry], leaves: List[Tensor]):
        self.entries = entries
        self.leaves = leaves

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def from_root(cls, root: Tensor) -> "ComputationRecord":
        entries: List[RecordEntry] = []
        leaves: List[Tensor] = []
        visited = set()
        stack = [(root, False)]
        while stack:
            node, children_done = stack.pop()
            if id(node) in visited:
                continue
            if node.creator is None:
                visited.add(id(node))
                if node.requires_grad:
                    leaves.append(node)
                continue
            if children_done:
                visited.add(id(node))
                entries.append(RecordEntry(node.creator.tag, node.creator, node.creator.tensors, node))
                continue
            stack.append((node, True))
            for parent in reversed(node.creator.tensors):
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return cls(entries, leaves)

    def propagate(self, root: Tensor) -> Dict[int, np.ndarray]:
        """Run the reverse pass; returns gradients keyed by tensor id"""
        grads: Dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
        for entry in reversed(self.entries):
            grad = grads.get(id(entry.output))
            if grad is None:
                continue
            input_grads = entry.function.backward(grad)
            for tensor, g in zip(entry.inputs, input_grads):
                if g is None or not tensor.requires_grad:
                    continue
                g = unbroadcast(np.asarray(g, dtype=np.float64), tensor.shape)
                if not np.all(np.isfinite(g)):
                    raise NumericalError(f"non-finite gradient flowing out of {entry.tag}")
                key = id(tensor)
                grads[key] = g if key not in grads else grads[key] + g
        return grads


def _require_scalar(root: Tensor) -> None:
    if root.size != 1:
        raise ContractError(f"backward needs a scalar root, got shape {root.shape}")


def backward(root: Tensor) -> None:
    """
    Populate `.grad` on every leaf reachable from `root` that requires a gradient.

    Gradients accumulate across calls until the optimizer step zeroes them.
    """
    _require_scalar(root)
    record = ComputationRecord.from_root(root)
    grads = record.propagate(root)
    for leaf in record.leaves:
        g = grads.get(id(leaf))
        if g is None:
            continue
        leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g


def grad(root: Tensor, wrt: Sequence[Tensor]) -> List[np.ndarray]:
    """Gradients of a scalar root with respect to `wrt`, leaving every `.grad` untouched"""
    _require_scalar(root)
    grads = ComputationRecord.from_root(root).propagate(root)
    return [grads.get(id(t), np.zeros_like(t.data)).copy() for t in wrt]
