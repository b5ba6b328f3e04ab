"""
Attack mixes for ADE-Net
Every spec is applied to a full copy of the clean set; samples carry class and attack labels
"""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
from zipfile import BadZipFile

import numpy as np

from src.attacks.cw import cw
from src.attacks.gradient import fgsm, ifgsm, pgd
from src.attacks.spec import AttackKind, AttackSpec
from src.data.dataset import PixelDataset
from src.errors import ConfigurationError, DataFormatError, MissingInputError, ValidationError
from src.nn.models import ModelHandle

logger = logging.getLogger(__name__)


@dataclass
class AttackedDataset:
    features: np.ndarray
    class_labels: np.ndarray
    attack_labels: np.ndarray
    num_classes: int
    source_index: np.ndarray
    flipped: np.ndarray
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.class_labels = np.asarray(self.class_labels, dtype=np.int64)
        self.attack_labels = np.asarray(self.attack_labels, dtype=np.int64)
        self.source_index = np.asarray(self.source_index, dtype=np.int64)
        self.flipped = np.asarray(self.flipped, dtype=bool)
        n = self.features.shape[0] if self.features.ndim == 2 else 0
        if n == 0:
            raise ValidationError(f"attacked dataset needs a non-empty n x d matrix, got {self.features.shape}")
        for name in ("class_labels", "attack_labels", "source_index", "flipped"):
            if getattr(self, name).shape != (n,):
                raise ValidationError(f"attacked dataset column {name} does not have {n} entries")
        if not np.all(np.isfinite(self.features)):
            raise ValidationError("attacked features contain NaN or infinite values")
        if self.class_labels.min() < 0 or self.class_labels.max() >= self.num_classes:
            raise ValidationError(f"class labels fall outside 0..{self.num_classes - 1}")
        if self.attack_labels.min() < 0:
            raise ValidationError("attack labels must be non-negative")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def attack_count(self) -> int:
        return int(self.attack_labels.max()) + 1

    @property
    def labels_present(self) -> List[int]:
        return np.unique(self.attack_labels).tolist()

    def subset(self, index: np.ndarray) -> "AttackedDataset":
        return AttackedDataset(
            self.features[index],
            self.class_labels[index],
            self.attack_labels[index],
            self.num_classes,
            self.source_index[index],
            self.flipped[index],
            dict(self.provenance),
        )

    def for_attack(self, attack_label: int) -> "AttackedDataset":
        return self.subset(np.flatnonzero(self.attack_labels == attack_label))

    @classmethod
    def from_clean(cls, ds: PixelDataset, attack_label: int = 0) -> "AttackedDataset":
        """Wrap a clean dataset as a single vanilla mix"""
        n = len(ds)
        return cls(
            ds.features.copy(),
            ds.class_labels.copy(),
            np.full(n, attack_label),
            ds.num_classes,
            np.arange(n),
            np.zeros(n, dtype=bool),
            {"specs": [AttackSpec(AttackKind.VANILLA, attack_label).to_dict()]},
        )


def apply_attack(
    spec: AttackSpec,
    victim: ModelHandle,
    x: np.ndarray,
    y: np.ndarray,
    seed: Union[int, Sequence[int]] = 0,
) -> Tuple[np.ndarray, np.ndarray]:
    """Adversarial copies of x and per-sample flags for a victim mistake on them"""
    if spec.kind == AttackKind.VANILLA:
        return x.copy(), victim.predict(x) != y
    if spec.kind == AttackKind.CW:
        return cw(
            victim, x, y,
            c_cw=spec.cw_constant,
            kappa=spec.cw_confidence,
            cw_iters=spec.cw_iters,
            lr=spec.cw_lr,
            epsilon=spec.epsilon,
            binary_steps=spec.cw_binary_steps,
        )
    if spec.kind == AttackKind.FGSM:
        x_adv = fgsm(victim, x, y, spec.epsilon)
    elif spec.kind == AttackKind.IFGSM:
        x_adv = ifgsm(victim, x, y, spec.epsilon, spec.steps, spec.step_size)
    else:
        x_adv = pgd(victim, x, y, spec.epsilon, spec.steps, spec.step_size, spec.random_start, seed)
    return x_adv, victim.predict(x_adv) != y


def build_attack_mix(
    clean: PixelDataset,
    specs: List[AttackSpec],
    victim: ModelHandle,
    seed: int = 0,
    workers: int = 1,
    chunk_size: int = 512,
) -> AttackedDataset:
    """
    Union of one attacked copy of `clean` per spec.

    Work is split into chunks of `chunk_size` samples; chunk i of the spec with
    label c draws its randomness from (seed, c, i), so the result does not
    depend on `workers`.
    """
    if not specs:
        raise ConfigurationError("attack mix needs at least one spec")
    labels = [s.attack_label for s in specs]
    if len(set(labels)) != len(labels):
        raise ConfigurationError(f"duplicate attack labels in mix: {labels}")
    if chunk_size < 1:
        raise ConfigurationError(f"chunk_size must be >= 1, got {chunk_size}")

    n = len(clean)
    x, y = clean.features, clean.class_labels
    starts = list(range(0, n, chunk_size))
    features, flipped = [], []
    for spec in specs:
        def run_chunk(i: int, spec: AttackSpec = spec) -> Tuple[np.ndarray, np.ndarray]:
            stop = min(starts[i] + chunk_size, n)
            return apply_attack(spec, victim, x[starts[i]:stop], y[starts[i]:stop], seed=[seed, spec.attack_label, i])

        if workers > 1 and len(starts) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                chunks = list(pool.map(run_chunk, range(len(starts))))
        else:
            chunks = [run_chunk(i) for i in range(len(starts))]
        x_adv = np.concatenate([c[0] for c in chunks])
        hits = np.concatenate([c[1] for c in chunks])
        features.append(x_adv)
        flipped.append(hits)
        logger.info(
            f"{spec.kind} (label {spec.attack_label}): victim accuracy {1.0 - hits.mean():.2%} "
            f"on {n} samples, max |delta| {np.abs(x_adv - x).max():.4f}"
        )

    return AttackedDataset(
        features=np.concatenate(features),
        class_labels=np.tile(y, len(specs)),
        attack_labels=np.repeat(labels, n),
        num_classes=clean.num_classes,
        source_index=np.tile(np.arange(n), len(specs)),
        flipped=np.concatenate(flipped),
        provenance={
            "victim_checksum": victim.checksum(),
            "seed": seed,
            "specs": [s.to_dict() for s in specs],
        },
    )


def save_attacked(mix: AttackedDataset, path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, "wb") as f:
        np.savez(
            f,
            features=mix.features,
            class_labels=mix.class_labels,
            attack_labels=mix.attack_labels,
            num_classes=np.int64(mix.num_classes),
            source_index=mix.source_index,
            flipped=mix.flipped,
            provenance=np.array(json.dumps(mix.provenance, sort_keys=True)),
        )
    logger.info(f"Wrote attack mix {path.name}: {len(mix)} samples, labels {mix.labels_present}")
    return path


def load_attacked(path: Union[str, Path]) -> AttackedDataset:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"attack mix not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as archive:
            return AttackedDataset(
                features=archive["features"],
                class_labels=archive["class_labels"],
                attack_labels=archive["attack_labels"],
                num_classes=int(archive["num_classes"]),
                source_index=archive["source_index"],
                flipped=archive["flipped"],
                provenance=json.loads(str(archive["provenance"])),
            )
    except KeyError as e:
        raise DataFormatError(f"{path.name}: missing array {e}")
    except (BadZipFile, ValueError, OSError) as e:
        raise DataFormatError(f"{path.name}: unreadable attack mix", str(e))


def spec_kinds(mix: AttackedDataset) -> Dict[int, str]:
    """Attack label -> kind, read from the provenance block"""
    return {s["attack_label"]: s["kind"] for s in mix.provenance.get("specs", [])}
