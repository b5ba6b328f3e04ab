"""
Classifier architectures for ADE-Net
A 1-D spectral U-Net and an MLP behind one ModelHandle interface
"""
import copy
import hashlib
import json
import logging
from typing import Any, Dict, List, Tuple

import numpy as np

from src.autodiff import Tensor, avg_pool1d, concat, conv1d, relu, upsample_nearest1d
from src.errors import ConfigurationError, ContractError, DimensionError

logger = logging.getLogger(__name__)


class ModelHandle:
    """
    A parameterized differentiable classifier.

    Subclasses register their parameters in declaration order through
    `_add_parameter` and implement `forward`. The descriptor is a plain dict
    that `build_model` turns back into an identical architecture.
    """

    def __init__(self, descriptor: Dict[str, Any]):
        self.descriptor = dict(descriptor)
        self.input_dim = int(descriptor["input_dim"])
        self.output_dim = int(descriptor["output_dim"])
        self._named: List[Tuple[str, Tensor]] = []
        self.history: List[float] = []

    @property
    def arch(self) -> str:
        return self.descriptor["arch"]

    def _add_parameter(
        self,
        name: str,
        shape: Tuple[int, ...],
        fan_in: int,
        rng: np.random.Generator,
    ) -> Tensor:
        bound = 1.0 / np.sqrt(fan_in)
        param = Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)
        self._named.append((name, param))
        return param

    def named_parameters(self) -> List[Tuple[str, Tensor]]:
        return list(self._named)

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self._named]

    @property
    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def __call__(self, x: Any, **kwargs: Any) -> Tensor:
        x = Tensor.wrap(x)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] != self.input_dim:
            raise DimensionError(
                f"{self.arch} expects input of shape (n, {self.input_dim}) with n >= 1, got {x.shape}"
            )
        return self.forward(x, **kwargs)

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self(Tensor(x)).data

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Argmax labels; ties resolve to the smallest index"""
        return np.argmax(self.logits(x), axis=1)

    def state(self) -> List[np.ndarray]:
        return [p.data.copy() for p in self.parameters()]

    def load_state(self, arrays: List[np.ndarray]) -> None:
        params = self.parameters()
        if len(arrays) != len(params):
            raise ContractError(f"state has {len(arrays)} arrays, model has {len(params)} parameters")
        for (name, param), array in zip(self._named, arrays):
            if array.shape != param.shape:
                raise ContractError(f"parameter {name}: shape {array.shape} != {param.shape}")
            param.data = np.array(array, dtype=np.float64)

    def checksum(self) -> str:
        digest = hashlib.sha256(json.dumps(self.descriptor, sort_keys=True).encode("utf-8"))
        for p in self.parameters():
            digest.update(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
        return digest.hexdigest()

    def clone(self) -> "ModelHandle":
        twin = build_model(self.descriptor)
        twin.load_state(self.state())
        twin.history = copy.copy(self.history)
        return twin

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.descriptor}, parameters={self.parameter_count})"


class MlpClassifier(ModelHandle):
    """Linear + relu stack with a final linear head"""

    def __init__(self, descriptor: Dict[str, Any]):
        super().__init__(descriptor)
        hidden = list(descriptor["hidden"])
        if not hidden or any(h < 1 for h in hidden):
            raise ConfigurationError(f"mlp hidden sizes must be non-empty and positive, got {hidden}")
        rng = np.random.default_rng(descriptor["seed"])
        widths = [self.input_dim] + hidden + [self.output_dim]
        self.layers: List[Tuple[Tensor, Tensor]] = []
        for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            weight = self._add_parameter(f"linear{i}.weight", (fan_in, fan_out), fan_in, rng)
            bias = self._add_parameter(f"linear{i}.bias", (fan_out,), fan_in, rng)
            self.layers.append((weight, bias))

    def forward(self, x: Tensor) -> Tensor:
        h = x
        for weight, bias in self.layers[:-1]:
            h = relu(h @ weight + bias)
        weight, bias = self.layers[-1]
        return h @ weight + bias


class UNet1dClassifier(ModelHandle):
    """
    Encoder-decoder over the spectral axis of a single pixel.

    Each encoder stage is conv + relu followed by stride-2 average pooling. The
    decoder upsamples back to the matching encoder length, concatenates that
    stage's features on the channel axis and applies conv + relu. A linear head
    maps the flattened full-resolution features to logits.
    """

    kernel_size = 3

    def __init__(self, descriptor: Dict[str, Any]):
        super().__init__(descriptor)
        depth = int(descriptor["depth"])
        base = int(descriptor["base_channels"])
        if depth < 1 or base < 1:
            raise ConfigurationError(f"unet1d needs depth >= 1 and base_channels >= 1, got {depth}, {base}")
        if self.input_dim < 2 ** depth:
            raise ConfigurationError(
                f"unet1d depth {depth} needs input_dim >= {2 ** depth}, got {self.input_dim}"
            )
        rng = np.random.default_rng(descriptor["seed"])
        k = self.kernel_size
        self.depth = depth

        self.encoder: List[Tuple[Tensor, Tensor]] = []
        in_ch = 1
        for i in range(depth):
            out_ch = base * 2 ** i
            self.encoder.append(self._conv(f"encoder{i}", out_ch, in_ch, k, rng))
            in_ch = out_ch

        self.bottleneck = self._conv("bottleneck", base * 2 ** depth, in_ch, k, rng)
        in_ch = base * 2 ** depth

        self.decoder: List[Tuple[Tensor, Tensor]] = []
        for i in reversed(range(depth)):
            skip_ch = base * 2 ** i
            self.decoder.append(self._conv(f"decoder{i}", skip_ch, in_ch + skip_ch, k, rng))
            in_ch = skip_ch

        head_in = base * self.input_dim
        self.head_weight = self._add_parameter("head.weight", (head_in, self.output_dim), head_in, rng)
        self.head_bias = self._add_parameter("head.bias", (self.output_dim,), head_in, rng)

    def _conv(self, name: str, out_ch: int, in_ch: int, k: int, rng: np.random.Generator) -> Tuple[Tensor, Tensor]:
        fan_in = in_ch * k
        kernel = self._add_parameter(f"{name}.kernel", (out_ch, in_ch, k), fan_in, rng)
        bias = self._add_parameter(f"{name}.bias", (out_ch,), fan_in, rng)
        return kernel, bias

    def forward(self, x: Tensor, ablate_skips: bool = False) -> Tensor:
        n = x.shape[0]
        pad = self.kernel_size // 2
        h = x.reshape(n, 1, self.input_dim)

        skips: List[Tensor] = []
        for kernel, bias in self.encoder:
            h = relu(conv1d(h, kernel, padding=pad, bias=bias))
            skips.append(h)
            h = avg_pool1d(h)

        kernel, bias = self.bottleneck
        h = relu(conv1d(h, kernel, padding=pad, bias=bias))

        for (kernel, bias), skip in zip(self.decoder, reversed(skips)):
            h = upsample_nearest1d(h, skip.shape[2])
            if ablate_skips:
                skip = Tensor(np.zeros(skip.shape))
            h = relu(conv1d(concat([h, skip], axis=1), kernel, padding=pad, bias=bias))

        h = h.reshape(n, h.shape[1] * h.shape[2])
        return h @ self.head_weight + self.head_bias


_ARCHITECTURES = {
    "mlp": MlpClassifier,
    "unet1d": UNet1dClassifier,
}


def build_model(descriptor: Dict[str, Any]) -> ModelHandle:
    arch = descriptor.get("arch")
    if arch not in _ARCHITECTURES:
        raise ConfigurationError(f"unknown architecture '{arch}'", f"expected one of {sorted(_ARCHITECTURES)}")
    for key in ("input_dim", "output_dim", "seed"):
        if key not in descriptor:
            raise ConfigurationError(f"architecture descriptor is missing '{key}'")
    if descriptor["input_dim"] < 1 or descriptor["output_dim"] < 1:
        raise ConfigurationError(f"model dimensions must be positive: {descriptor}")
    model = _ARCHITECTURES[arch](descriptor)
    logger.debug(f"Built {model!r}")
    return model


def build_mlp(input_dim: int, hidden: List[int], output_dim: int, seed: int) -> ModelHandle:
    return build_model({
        "arch": "mlp",
        "input_dim": int(input_dim),
        "hidden": [int(h) for h in hidden],
        "output_dim": int(output_dim),
        "seed": int(seed),
    })


def build_unet1d(input_dim: int, output_dim: int, depth: int, base_channels: int, seed: int) -> ModelHandle:
    return build_model({
        "arch": "unet1d",
        "input_dim": int(input_dim),
        "output_dim": int(output_dim),
        "depth": int(depth),
        "base_channels": int(base_channels),
        "seed": int(seed),
    })
