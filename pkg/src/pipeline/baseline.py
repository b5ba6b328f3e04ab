"""
Single-network baselines for ADE-Net
"""
import logging
from typing import Optional, Union

from src.attacks.mix import AttackedDataset
from src.data.dataset import BatchPlan, PixelDataset
from src.nn.models import ModelHandle
from src.pipeline.config import ExperimentConfig, derive_seed
from src.pipeline.training import accuracy, fit_classifier

logger = logging.getLogger(__name__)


def train_baseline(mix: Union[AttackedDataset, PixelDataset], cfg: ExperimentConfig, seed: int) -> ModelHandle:
    """One classifier on the pooled data, same epochs and optimizer as the experts"""
    model = cfg.build_network(mix.dim, mix.num_classes, derive_seed(seed, "baseline"))
    fit_classifier(
        model,
        mix.features,
        mix.class_labels,
        cfg.epochs,
        cfg.batch_size,
        cfg.lr_expert,
        derive_seed(seed, "baseline-batches"),
        name="baseline",
    )
    return model


def train_victim(
    clean: PixelDataset,
    cfg: ExperimentConfig,
    seed: int,
    plan: Optional[BatchPlan] = None,
) -> ModelHandle:
    """Clean-data classifier the attacks are generated against"""
    model = cfg.build_network(clean.dim, clean.num_classes, derive_seed(seed, "victim"))
    if plan is None:
        plan = BatchPlan(len(clean), cfg.batch_size, derive_seed(seed, "victim-batches"), dataset=clean)
    fit_classifier(
        model,
        clean.features,
        clean.class_labels,
        cfg.victim_epochs,
        plan.batch_size,
        cfg.lr_expert,
        plan.seed,
        name="victim",
        plan=plan,
    )
    logger.info(f"Victim clean accuracy (train): {accuracy(model, clean.features, clean.class_labels):.2%}")
    return model
