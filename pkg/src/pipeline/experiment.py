"""
End-to-end trials for ADE-Net
Data, victim, attack mixes, offline discriminator, ADE-Net and baseline for one seed
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from src.attacks.mix import AttackedDataset, build_attack_mix
from src.cka.similarity import LogitMatrix
from src.cka.trace import CkaHistory
from src.data.dataset import PixelDataset, split_and_batch
from src.data.synthetic import make_synthetic
from src.errors import ConfigurationError
from src.nn.models import ModelHandle
from src.pipeline.adenet import AdeNetModel, train_ade_net
from src.pipeline.baseline import train_baseline, train_victim
from src.pipeline.config import ExperimentConfig, derive_seed
from src.pipeline.discriminator import train_offline_discriminator
from src.pipeline.evaluation import EvalReport, evaluate
from src.pipeline.training import accuracy

logger = logging.getLogger(__name__)


@dataclass
class TrialInputs:
    """Everything a trial shares across loss-weight configurations"""

    seed: int
    train: PixelDataset
    test: PixelDataset
    victim: ModelHandle
    train_mix: AttackedDataset
    test_mix: AttackedDataset
    offline: Tuple[ModelHandle, LogitMatrix]
    victim_accuracy: Dict[str, float]


@dataclass
class TrialOutcome:
    seed: int
    model: AdeNetModel
    baseline: ModelHandle
    adenet_report: EvalReport
    baseline_report: EvalReport
    history: CkaHistory
    victim_accuracy: Dict[str, float]


def synthetic_dataset(cfg: ExperimentConfig, seed: int) -> PixelDataset:
    return make_synthetic(
        cfg.synth_n_per_class,
        cfg.synth_classes,
        cfg.synth_bands,
        cfg.synth_separation,
        derive_seed(seed, "synthetic"),
        noise_std=cfg.synth_noise_std,
    )


def prepare_trial(
    cfg: ExperimentConfig,
    seed: int,
    dataset: Optional[PixelDataset] = None,
    split: Optional[Tuple[PixelDataset, PixelDataset]] = None,
) -> TrialInputs:
    """
    Split (or take `split`), train the victim on clean data, attack both splits
    once and train the offline discriminator.
    """
    if split is None:
        dataset = dataset if dataset is not None else synthetic_dataset(cfg, seed)
        plan, test = split_and_batch(dataset, cfg.train_fraction, cfg.batch_size, derive_seed(seed, "split"))
        train = plan.dataset
    else:
        train, test = split
        plan = None
    if test is None:
        raise ConfigurationError("trial needs a non-empty test split")

    victim = train_victim(train, cfg, seed, plan=plan)
    specs = cfg.attack_specs()
    train_mix = build_attack_mix(
        train, specs, victim, derive_seed(seed, "attack-train"), cfg.workers, cfg.attack_chunk_size
    )
    test_mix = build_attack_mix(
        test, specs, victim, derive_seed(seed, "attack-test"), cfg.workers, cfg.attack_chunk_size
    )

    victim_accuracy = {"clean": accuracy(victim, test.features, test.class_labels)}
    for spec in specs:
        part = test_mix.for_attack(spec.attack_label)
        victim_accuracy[spec.kind] = accuracy(victim, part.features, part.class_labels)
    logger.info(f"Seed {seed} victim test accuracy: " + ", ".join(f"{k} {v:.2%}" for k, v in victim_accuracy.items()))

    offline = train_offline_discriminator(train_mix, train, cfg, seed)
    return TrialInputs(seed, train, test, victim, train_mix, test_mix, offline, victim_accuracy)


def run_trial(
    cfg: ExperimentConfig,
    seed: int,
    dataset: Optional[PixelDataset] = None,
    inputs: Optional[TrialInputs] = None,
) -> TrialOutcome:
    inputs = inputs if inputs is not None else prepare_trial(cfg, seed, dataset)
    history = CkaHistory()
    model = train_ade_net(inputs.train_mix, inputs.train, cfg, seed, offline=inputs.offline, history=history)
    baseline = train_baseline(inputs.train_mix, cfg, seed)
    return TrialOutcome(
        seed=seed,
        model=model,
        baseline=baseline,
        adenet_report=evaluate(model, inputs.test_mix),
        baseline_report=evaluate(baseline, inputs.test_mix),
        history=history,
        victim_accuracy=inputs.victim_accuracy,
    )
