"""
Logit similarity for ADE-Net
Linear CKA between the frozen vanilla logits and per-attack training logits
"""
import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from src.autodiff import Tensor
from src.errors import ConfigurationError, DimensionError, ValidationError

logger = logging.getLogger(__name__)


class CkaMode:
    CANONICAL = "canonical"
    AS_PRINTED = "as_printed"

    ALL = (CANONICAL, AS_PRINTED)


VANILLA_TAG = "vanilla"


@dataclass
class LogitMatrix:
    """m x n logits: one row per discriminator output, one column per sample"""

    values: np.ndarray
    tag: Union[str, int] = VANILLA_TAG

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or min(self.values.shape) < 1:
            raise ValidationError(f"logit matrix {self.tag} must be m x n with m, n >= 1, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError(f"logit matrix {self.tag} has non-finite entries")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def samples(self) -> int:
        return self.values.shape[1]


@dataclass
class CkaResult:
    value: Tensor
    degenerate: bool = False

    def item(self) -> float:
        return self.value.item()


def _centering(n: int) -> np.ndarray:
    return np.eye(n) - np.full((n, n), 1.0 / n)


def cka(
    o_v: Union[LogitMatrix, np.ndarray, Tensor],
    o_k: Union[LogitMatrix, np.ndarray, Tensor],
    mode: str = CkaMode.CANONICAL,
    center: bool = False,
) -> CkaResult:
    """
    ||O_v^T O_k||_F^2 / (||O_v^T O_v||_F^a ||O_k^T O_k||_F^a), a = 1 (canonical) or 2 (as_printed).

    Computed through the m x m Gram matrices G = O O^T, since ||A^T B||_F^2 = <G_A, G_B>.
    O_v is treated as a constant; a Tensor O_k keeps its gradient.
    """
    if mode not in CkaMode.ALL:
        raise ConfigurationError(f"unknown cka mode '{mode}'", f"expected one of {CkaMode.ALL}")
    v = o_v.values if isinstance(o_v, LogitMatrix) else Tensor.wrap(o_v).data
    k = Tensor(o_k.values) if isinstance(o_k, LogitMatrix) else Tensor.wrap(o_k)
    if v.ndim != 2 or k.ndim != 2 or v.shape[0] != k.shape[0]:
        raise DimensionError(f"cka needs matrices with equal row counts, got {v.shape} and {k.shape}")

    if center:
        v = v @ _centering(v.shape[1])
        k = k @ Tensor(_centering(k.shape[1]))

    gram_v = v @ v.T
    gram_k = k @ k.T
    norm_v_sq = float(np.sum(gram_v * gram_v))
    norm_k_sq = (gram_k * gram_k).sum()
    if norm_v_sq == 0.0 or norm_k_sq.item() == 0.0:
        logger.warning(f"CKA denominator is zero for {v.shape} vs {k.shape}; returning 0")
        return CkaResult(Tensor(0.0), degenerate=True)

    numerator = (gram_k * Tensor(gram_v)).sum()
    if mode == CkaMode.CANONICAL:
        denominator = norm_k_sq.sqrt() * float(np.sqrt(norm_v_sq))
    else:
        denominator = norm_k_sq * norm_v_sq
    return CkaResult(numerator / denominator)
