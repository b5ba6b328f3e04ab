"""
Phase I attack discriminator for ADE-Net
Offline training, the frozen vanilla logits O_v and routing
"""
import logging
from typing import Tuple

import numpy as np

from src.attacks.mix import AttackedDataset
from src.cka.similarity import LogitMatrix
from src.data.dataset import PixelDataset
from src.errors import ConfigurationError
from src.nn.models import ModelHandle
from src.pipeline.config import ExperimentConfig, derive_seed
from src.pipeline.training import accuracy, fit_classifier

logger = logging.getLogger(__name__)


def route(disc: ModelHandle, x: np.ndarray) -> np.ndarray:
    """Predicted attack label per sample; ties go to the smallest label"""
    return disc.predict(x)


def vanilla_logits(disc: ModelHandle, vanilla: PixelDataset, cap: int, seed: int) -> LogitMatrix:
    """K x min(n_v, cap) discriminator logits on clean samples; larger sets are subsampled"""
    n_v = len(vanilla)
    if n_v > cap:
        index = np.sort(np.random.default_rng(seed).choice(n_v, size=cap, replace=False))
    else:
        index = np.arange(n_v)
    return LogitMatrix(disc.logits(vanilla.features[index]).T)


def train_offline_discriminator(
    mix: AttackedDataset,
    vanilla: PixelDataset,
    cfg: ExperimentConfig,
    seed: int,
) -> Tuple[ModelHandle, LogitMatrix]:
    present = mix.labels_present
    if len(present) < 2:
        raise ConfigurationError(f"discriminator needs at least 2 attack labels, mix has {present}")
    if max(present) >= cfg.attack_count:
        raise ConfigurationError(f"mix has attack label {max(present)} but attack_count is {cfg.attack_count}")

    disc = cfg.build_network(mix.dim, cfg.attack_count, derive_seed(seed, "discriminator"))
    fit_classifier(
        disc,
        mix.features,
        mix.attack_labels,
        cfg.offline_epochs,
        cfg.batch_size,
        cfg.lr_discriminator,
        derive_seed(seed, "discriminator-batches"),
        name="offline discriminator",
    )
    logger.info(
        f"Offline discriminator attack accuracy (train): "
        f"{accuracy(disc, mix.features, mix.attack_labels):.2%}"
    )
    o_v = vanilla_logits(disc, vanilla, cfg.ov_cap, derive_seed(seed, "vanilla-logits"))
    return disc, o_v
