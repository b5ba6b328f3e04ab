"""
Experiment configuration for ADE-Net
Defaults come from config.settings; experiment files use dotenv key=value syntax
"""
import logging
import zlib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np
from dotenv import dotenv_values

from config import settings
from src.attacks.spec import ATTACK_ORDER, AttackSpec, attack_specs_for_count
from src.cka.similarity import CkaMode
from src.errors import ConfigurationError, MissingInputError
from src.nn.models import ModelHandle, build_mlp, build_unet1d

logger = logging.getLogger(__name__)


class CkaLabels:
    """Which attack labels select the columns of O_k"""
    PREDICTED = "predicted"
    GROUND_TRUTH = "ground_truth"

    ALL = (PREDICTED, GROUND_TRUTH)


ARCHITECTURES = ("mlp", "unet1d")


@dataclass
class ExperimentConfig:
    attack_count: int = 2
    epochs: int = settings.EPOCHS
    offline_epochs: int = settings.OFFLINE_EPOCHS
    victim_epochs: int = settings.OFFLINE_EPOCHS
    batch_size: int = settings.BATCH_SIZE
    lr_discriminator: float = settings.LR_DISCRIMINATOR
    lr_expert: float = settings.LR_EXPERT
    alpha: Optional[List[float]] = None
    lambda_cka: Optional[List[float]] = None
    beta: float = 1.0
    epsilon: float = settings.EPSILON
    seeds: List[int] = field(default_factory=lambda: list(settings.SEEDS))
    cka_mode: str = settings.CKA_MODE
    cka_center: bool = settings.CKA_CENTER
    cka_labels: str = CkaLabels.PREDICTED
    ov_cap: int = settings.OV_CAP
    arch: str = settings.ARCH
    mlp_hidden: List[int] = field(default_factory=lambda: list(settings.MLP_HIDDEN))
    unet_depth: int = settings.UNET_DEPTH
    unet_base_channels: int = settings.UNET_BASE_CHANNELS
    train_fraction: float = settings.TRAIN_FRACTION
    pgd_steps: int = settings.PGD_STEPS
    ifgsm_steps: int = settings.IFGSM_STEPS
    cw_constant: float = settings.CW_CONSTANT
    cw_confidence: float = settings.CW_CONFIDENCE
    cw_iters: int = settings.CW_ITERS
    cw_lr: float = settings.CW_LR
    cw_binary_steps: int = settings.CW_BINARY_STEPS
    attack_chunk_size: int = settings.ATTACK_CHUNK_SIZE
    workers: int = settings.WORKERS
    synth_classes: int = settings.SYNTH_CLASSES
    synth_bands: int = settings.SYNTH_BANDS
    synth_n_per_class: int = settings.SYNTH_N_PER_CLASS
    synth_separation: float = settings.SYNTH_SEPARATION
    synth_noise_std: float = settings.SYNTH_NOISE_STD
    pca_components: int = settings.PCA_COMPONENTS
    cube_path: Optional[str] = None
    cube_format: str = "hsic"
    mat_key: Optional[str] = None
    gt_path: Optional[str] = None
    gt_key: Optional[str] = None

    def __post_init__(self):
        if self.alpha is None:
            self.alpha = [1.0] * self.attack_count
        if self.lambda_cka is None:
            self.lambda_cka = [1.0] * self.attack_count
        self.validate()

    @property
    def attack_kinds(self) -> List[str]:
        return ATTACK_ORDER[:self.attack_count]

    def validate(self) -> None:
        k = self.attack_count
        if not 2 <= k <= len(ATTACK_ORDER):
            raise ConfigurationError(f"attack_count must be 2..{len(ATTACK_ORDER)}, got {k}")
        if len(self.alpha) != k or len(self.lambda_cka) != k:
            raise ConfigurationError(
                f"alpha and lambda_cka need {k} entries, got {len(self.alpha)} and {len(self.lambda_cka)}"
            )
        if min(self.alpha) < 0 or min(self.lambda_cka) < 0 or self.beta < 0:
            raise ConfigurationError("loss weights alpha, lambda_cka and beta must be >= 0")
        for name in ("epochs", "offline_epochs", "victim_epochs", "batch_size", "ov_cap", "workers",
                     "attack_chunk_size", "pca_components"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.lr_discriminator <= 0 or self.lr_expert <= 0:
            raise ConfigurationError("learning rates must be positive")
        if not self.seeds:
            raise ConfigurationError("seeds must list at least one trial seed")
        if self.cka_mode not in CkaMode.ALL:
            raise ConfigurationError(f"cka_mode must be one of {CkaMode.ALL}, got '{self.cka_mode}'")
        if self.cka_labels not in CkaLabels.ALL:
            raise ConfigurationError(f"cka_labels must be one of {CkaLabels.ALL}, got '{self.cka_labels}'")
        if self.arch not in ARCHITECTURES:
            raise ConfigurationError(f"arch must be one of {ARCHITECTURES}, got '{self.arch}'")
        if not 0 < self.train_fraction < 1:
            raise ConfigurationError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if self.cube_format not in ("hsic", "mat", "pixels"):
            raise ConfigurationError(f"cube_format must be hsic, mat or pixels, got '{self.cube_format}'")
        self.attack_specs()

    def attack_specs(self) -> List[AttackSpec]:
        return attack_specs_for_count(
            self.attack_count,
            epsilon=self.epsilon,
            pgd_steps=self.pgd_steps,
            ifgsm_steps=self.ifgsm_steps,
            cw_constant=self.cw_constant,
            cw_confidence=self.cw_confidence,
            cw_iters=self.cw_iters,
            cw_lr=self.cw_lr,
            cw_binary_steps=self.cw_binary_steps,
        )

    def build_network(self, input_dim: int, output_dim: int, seed: int) -> ModelHandle:
        if self.arch == "unet1d":
            return build_unet1d(input_dim, output_dim, self.unet_depth, self.unet_base_channels, seed)
        return build_mlp(input_dim, self.mlp_hidden, output_dim, seed)

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """Copy with some fields replaced; a new attack_count resets unspecified weights to 1.0"""
        if "attack_count" in overrides and overrides["attack_count"] != self.attack_count:
            overrides.setdefault("alpha", None)
            overrides.setdefault("lambda_cka", None)
        return replace(self, **overrides)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def load(cls, path: Union[str, Path], **overrides: Any) -> "ExperimentConfig":
        """Read a key=value experiment file; `overrides` (e.g. CLI flags) win over the file"""
        path = Path(path)
        if not path.exists():
            raise MissingInputError(f"config file not found: {path}")
        values = parse_config_values(dotenv_values(path))
        values.update({k: v for k, v in overrides.items() if v is not None})
        logger.info(f"Loaded experiment config {path.name}: {sorted(values)}")
        return cls(**values)


def _boolean(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _optional_text(raw: str) -> Optional[str]:
    return raw.strip() or None


def _int_list(raw: str) -> List[int]:
    return [int(part) for part in raw.split(",") if part.strip()]


def _float_list(raw: str) -> List[float]:
    return [float(part) for part in raw.split(",") if part.strip()]


_LIST_PARSERS: Dict[str, Callable[[str], Any]] = {
    "alpha": _float_list,
    "lambda_cka": _float_list,
    "seeds": _int_list,
    "mlp_hidden": _int_list,
}

_OPTIONAL_TEXT = ("cube_path", "mat_key", "gt_path", "gt_key")


def _parser_for(name: str, default: Any) -> Callable[[str], Any]:
    if name in _LIST_PARSERS:
        return _LIST_PARSERS[name]
    if name in _OPTIONAL_TEXT:
        return _optional_text
    if isinstance(default, bool):
        return _boolean
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    return str.strip


def parse_config_values(raw: Dict[str, Optional[str]]) -> Dict[str, Any]:
    """Typed ExperimentConfig fields from string values; unknown keys are rejected"""
    known = {f.name: f for f in fields(ExperimentConfig)}
    defaults = ExperimentConfig.__dataclass_fields__
    parsed: Dict[str, Any] = {}
    for key, value in raw.items():
        name = key.strip().lower()
        if name not in known:
            raise ConfigurationError(f"unknown config key '{key}'")
        if value is None:
            raise ConfigurationError(f"config key '{key}' has no value")
        default = defaults[name].default
        try:
            parsed[name] = _parser_for(name, default)(value)
        except ValueError as e:
            raise ConfigurationError(f"config key '{key}' has an invalid value {value!r}", str(e))
    return parsed


def derive_seed(seed: int, purpose: str) -> int:
    """Independent, reproducible seed for one named use of a trial seed"""
    sequence = np.random.SeedSequence([int(seed), zlib.crc32(purpose.encode("utf-8"))])
    return int(sequence.generate_state(1)[0])
