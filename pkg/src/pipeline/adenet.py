"""
Joint discriminator and expert training
Discriminator update with CE + CKA, then hard routing to per-attack experts
"""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from src.attacks.mix import AttackedDataset
from src.autodiff import Tensor, softmax_cross_entropy
from src.cka.similarity import LogitMatrix, cka
from src.cka.trace import CkaHistory
from src.data.dataset import BatchPlan, PixelDataset
from src.errors import ConfigurationError, MissingInputError, NumericalError
from src.nn.checkpoint import load_checkpoint, save_checkpoint
from src.nn.models import ModelHandle
from src.nn.optim import Adam
from src.pipeline.config import CkaLabels, ExperimentConfig, derive_seed
from src.pipeline.discriminator import route, train_offline_discriminator

logger = logging.getLogger(__name__)


@dataclass
class AdeNetModel:
    """Phase I discriminator, one Phase II expert per attack label and the frozen O_v"""

    discriminator: ModelHandle
    experts: List[ModelHandle]
    o_v: LogitMatrix
    config: ExperimentConfig
    training_log: List[Dict[str, Any]] = field(default_factory=list)

    def __post_init__(self):
        k = self.discriminator.output_dim
        if len(self.experts) != k:
            raise ConfigurationError(f"{k} attack labels need {k} experts, got {len(self.experts)}")
        if len({e.output_dim for e in self.experts}) != 1:
            raise ConfigurationError("all experts must predict the same number of classes")
        if self.o_v.rows != k:
            raise ConfigurationError(f"O_v has {self.o_v.rows} rows, discriminator has {k} outputs")

    @property
    def attack_count(self) -> int:
        return self.discriminator.output_dim

    @property
    def num_classes(self) -> int:
        return self.experts[0].output_dim

    def predict(
        self,
        x: np.ndarray,
        attack_labels: Optional[np.ndarray] = None,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        (predicted attack labels, class predictions). Each sample is classified by
        the expert its predicted attack label selects, or by `attack_labels` when given.
        """
        predicted = route(self.discriminator, x)
        selector = predicted if attack_labels is None else np.asarray(attack_labels)
        classes = np.zeros(len(x), dtype=np.int64)
        for j, expert in enumerate(self.experts):
            index = np.flatnonzero(selector == j)
            if index.size:
                classes[index] = expert.predict(x[index])
        return predicted, classes

    def save(self, directory: Union[str, Path]) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        save_checkpoint(self.discriminator, directory / "discriminator.ckpt")
        for j, expert in enumerate(self.experts):
            save_checkpoint(expert, directory / f"expert{j}.ckpt")
        np.save(directory / "o_v.npy", self.o_v.values)
        (directory / "config.json").write_text(json.dumps(self.config.to_dict(), sort_keys=True, indent=2))
        return directory

    @classmethod
    def load(cls, directory: Union[str, Path]) -> "AdeNetModel":
        directory = Path(directory)
        if not (directory / "discriminator.ckpt").exists():
            raise MissingInputError(f"no ADE-Net model in {directory}")
        disc = load_checkpoint(directory / "discriminator.ckpt")
        experts = [load_checkpoint(directory / f"expert{j}.ckpt") for j in range(disc.output_dim)]
        config = ExperimentConfig(**json.loads((directory / "config.json").read_text()))
        return cls(disc, experts, LogitMatrix(np.load(directory / "o_v.npy")), config)


@dataclass
class BatchLoss:
    """Weighted terms of the unified loss for one batch"""

    epoch: int
    batch: int
    discriminator_ce: float
    cka_terms: Dict[int, float]
    expert_ce: Dict[int, float]
    routed_counts: Dict[int, int]
    beta: float
    lambda_cka: List[float]
    alpha: List[float]

    @property
    def discriminator_loss(self) -> float:
        return self.beta * self.discriminator_ce + sum(self.lambda_cka[k] * v for k, v in self.cka_terms.items())

    @property
    def ensemble_loss(self) -> float:
        return sum(self.alpha[j] * v for j, v in self.expert_ce.items())

    @property
    def total(self) -> float:
        return self.discriminator_loss + self.ensemble_loss


def discriminator_objective(
    model: AdeNetModel,
    logits: Tensor,
    c: np.ndarray,
    epoch: int = 0,
    batch: int = 0,
) -> Tuple[Tensor, Tensor, Dict[int, float]]:
    """
    beta * CE(c) + sum_k lambda_k * cka(O_v, O_k) on discriminator logits.
    O_k holds the logits of the samples assigned to attack k, by ground truth
    or by the discriminator's own argmax. Returns (loss, CE, per-attack CKA values).
    """
    cfg = model.config
    try:
        disc_ce = softmax_cross_entropy(logits, c)
    except NumericalError as e:
        raise NumericalError(f"non-finite discriminator CE at epoch {epoch}, batch {batch}", e.message)

    assigned = c if cfg.cka_labels == CkaLabels.GROUND_TRUTH else np.argmax(logits.data, axis=1)
    loss = disc_ce * cfg.beta
    cka_terms: Dict[int, float] = {}
    for k in range(model.attack_count):
        index = np.flatnonzero(assigned == k)
        if index.size == 0:
            continue
        try:
            term = cka(model.o_v, logits.take_rows(index).T, cfg.cka_mode, cfg.cka_center)
            loss = loss + term.value * cfg.lambda_cka[k]
        except NumericalError as e:
            raise NumericalError(f"non-finite CKA term for attack {k} at epoch {epoch}, batch {batch}", e.message)
        cka_terms[k] = term.item()
    return loss, disc_ce, cka_terms


def expert_objective(expert: ModelHandle, x: np.ndarray, y: np.ndarray, alpha: float) -> Tuple[Tensor, Tensor]:
    """(alpha * CE, CE) of one expert on the samples routed to it"""
    ce = softmax_cross_entropy(expert(Tensor(x)), y)
    return ce * alpha, ce


def _expert_step(
    expert: ModelHandle,
    optimizer: Adam,
    x: np.ndarray,
    y: np.ndarray,
    alpha: float,
) -> float:
    loss, ce = expert_objective(expert, x, y, alpha)
    loss.backward()
    optimizer.step()
    return ce.item()


def ade_batch_step(
    model: AdeNetModel,
    disc_optimizer: Adam,
    expert_optimizers: List[Adam],
    x: np.ndarray,
    y: np.ndarray,
    c: np.ndarray,
    epoch: int = 0,
    batch: int = 0,
    pool: Optional[ThreadPoolExecutor] = None,
) -> BatchLoss:
    """
    One batch of the unified objective.

    The discriminator takes an Adam step on `discriminator_objective`. The
    batch is then routed with the updated discriminator and every expert
    with routed samples takes one step on alpha_j * CE(y).
    """
    cfg = model.config
    disc = model.discriminator
    loss, disc_ce, cka_terms = discriminator_objective(model, disc(Tensor(x)), c, epoch, batch)
    if not np.isfinite(loss.item()):
        raise NumericalError(f"non-finite discriminator loss at epoch {epoch}, batch {batch}")
    try:
        loss.backward()
    except NumericalError as e:
        raise NumericalError(f"non-finite discriminator gradient at epoch {epoch}, batch {batch}", e.message)
    disc_optimizer.step()

    routes = route(disc, x)
    jobs = []
    for j, (expert, optimizer) in enumerate(zip(model.experts, expert_optimizers)):
        index = np.flatnonzero(routes == j)
        if index.size:
            jobs.append((j, expert, optimizer, index))

    def run(job):
        j, expert, optimizer, index = job
        try:
            return _expert_step(expert, optimizer, x[index], y[index], cfg.alpha[j])
        except NumericalError as e:
            raise NumericalError(f"non-finite CE for expert {j} at epoch {epoch}, batch {batch}", e.message)

    values = list(pool.map(run, jobs)) if pool is not None else [run(job) for job in jobs]
    expert_ce = {job[0]: value for job, value in zip(jobs, values)}
    routed = np.bincount(routes, minlength=model.attack_count)

    result = BatchLoss(
        epoch=epoch,
        batch=batch,
        discriminator_ce=disc_ce.item(),
        cka_terms=cka_terms,
        expert_ce=expert_ce,
        routed_counts={j: int(n) for j, n in enumerate(routed)},
        beta=cfg.beta,
        lambda_cka=list(cfg.lambda_cka),
        alpha=list(cfg.alpha),
    )
    logger.debug(
        f"epoch {epoch} batch {batch}: D {result.discriminator_loss:.4f} "
        f"ensemble {result.ensemble_loss:.4f} routed {result.routed_counts}"
    )
    return result


def train_ade_net(
    mix: AttackedDataset,
    vanilla: PixelDataset,
    cfg: ExperimentConfig,
    seed: int,
    offline: Optional[Tuple[ModelHandle, LogitMatrix]] = None,
    history: Optional[CkaHistory] = None,
) -> AdeNetModel:
    """
    Train the discriminator and experts jointly; Phase I starts from a copy of
    the offline discriminator, which is trained here when `offline` is None.
    """
    if offline is None:
        offline = train_offline_discriminator(mix, vanilla, cfg, seed)
    offline_disc, o_v = offline
    experts = [
        cfg.build_network(mix.dim, mix.num_classes, derive_seed(seed, f"expert{j}"))
        for j in range(cfg.attack_count)
    ]
    model = AdeNetModel(offline_disc.clone(), experts, o_v, cfg)
    history = history if history is not None else CkaHistory()

    disc_optimizer = Adam(model.discriminator.parameters(), cfg.lr_discriminator)
    expert_optimizers = [Adam(e.parameters(), cfg.lr_expert) for e in experts]
    plan = BatchPlan(len(mix), cfg.batch_size, derive_seed(seed, "adenet-batches"))
    pool = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None

    try:
        for epoch in range(cfg.epochs):
            batches = []
            for b, index in enumerate(plan.batches(epoch)):
                step = ade_batch_step(
                    model, disc_optimizer, expert_optimizers,
                    mix.features[index], mix.class_labels[index], mix.attack_labels[index],
                    epoch=epoch, batch=b, pool=pool,
                )
                for k, value in step.cka_terms.items():
                    history.record(epoch, k, value)
                batches.append(step)

            routed = {j: sum(s.routed_counts[j] for s in batches) for j in range(cfg.attack_count)}
            summary = {
                "epoch": epoch,
                "discriminator_loss": float(np.mean([s.discriminator_loss for s in batches])),
                "ensemble_loss": float(np.mean([s.ensemble_loss for s in batches])),
                "total_loss": float(np.mean([s.total for s in batches])),
                "routed_counts": routed,
            }
            model.training_log.append(summary)
            logger.info(
                f"ADE-Net epoch {epoch + 1}/{cfg.epochs}: total {summary['total_loss']:.4f} "
                f"(D {summary['discriminator_loss']:.4f}, ensemble {summary['ensemble_loss']:.4f}) "
                f"routed {routed}"
            )
            idle = [j for j, n in routed.items() if n == 0]
            if idle:
                logger.warning(f"Experts {idle} received no samples in epoch {epoch + 1}")
    finally:
        if pool is not None:
            pool.shutdown()
    return model
