"""
Per-pixel datasets for ADE-Net
Stratified splitting, seeded batching and .npz persistence
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union
from zipfile import BadZipFile

import numpy as np
from sklearn.model_selection import train_test_split

from src.data.cube import HsiCube, cube_pixels
from src.data.pca import PcaModel, fit_pca
from src.errors import ConfigurationError, DataFormatError, MissingInputError, ValidationError

logger = logging.getLogger(__name__)


@dataclass
class PixelDataset:
    """n x d spectral features with class labels in 0..num_classes-1; no spatial patches"""

    features: np.ndarray
    class_labels: np.ndarray
    num_classes: int
    split: str = "all"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.class_labels = np.asarray(self.class_labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise ValidationError(f"{self.split} features must be a non-empty n x d matrix, got {self.features.shape}")
        if self.class_labels.shape != (self.features.shape[0],):
            raise ValidationError(f"{self.split}: {self.class_labels.shape[0]} labels for {self.features.shape[0]} samples")
        if not np.all(np.isfinite(self.features)):
            raise ValidationError(f"{self.split} features contain NaN or infinite values")
        if self.class_labels.min() < 0 or self.class_labels.max() >= self.num_classes:
            raise ValidationError(f"{self.split} class labels fall outside 0..{self.num_classes - 1}")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, index: np.ndarray, split: Optional[str] = None) -> "PixelDataset":
        return PixelDataset(self.features[index], self.class_labels[index], self.num_classes, split or self.split)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.class_labels, minlength=self.num_classes)


class BatchPlan:
    """
    Minibatch index order over n samples; reshuffled per epoch from (seed, epoch).
    `dataset` is the training set the plan was drawn for, when there is one.
    """

    def __init__(self, n_samples: int, batch_size: int, seed: int, dataset: Optional[PixelDataset] = None):
        if batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {batch_size}")
        if dataset is not None and len(dataset) != n_samples:
            raise ConfigurationError(f"batch plan over {n_samples} samples bound to {len(dataset)} samples")
        self.n_samples = n_samples
        self.batch_size = batch_size
        self.seed = seed
        self.dataset = dataset

    def batches(self, epoch: int) -> List[np.ndarray]:
        order = np.random.default_rng([self.seed, epoch]).permutation(self.n_samples)
        return [order[start:start + self.batch_size] for start in range(0, self.n_samples, self.batch_size)]

    def batch_sizes(self, epoch: int = 0) -> List[int]:
        return [len(b) for b in self.batches(epoch)]


def stratified_split(
    ds: PixelDataset,
    train_fraction: float,
    seed: int,
) -> Tuple[PixelDataset, Optional[PixelDataset]]:
    """Per-class split with scikit-learn; train_fraction 1 keeps everything for training"""
    if not 0 < train_fraction <= 1:
        raise ConfigurationError(f"train_fraction must lie in (0, 1], got {train_fraction}")
    index = np.arange(len(ds))
    if train_fraction == 1:
        train_idx, test_idx = index, index[:0]
    else:
        try:
            train_idx, test_idx = train_test_split(
                index,
                train_size=train_fraction,
                random_state=seed,
                stratify=ds.class_labels,
            )
        except ValueError as e:
            raise ConfigurationError(f"cannot split {len(ds)} samples at train_fraction {train_fraction}", str(e))
    train_idx, test_idx = np.sort(train_idx), np.sort(test_idx)
    train = ds.subset(train_idx, "train")
    test = ds.subset(test_idx, "test") if test_idx.size else None
    logger.info(f"Split {len(ds)} samples into {train_idx.size} train / {test_idx.size} test")
    return train, test


def split_and_batch(
    ds: PixelDataset,
    train_fraction: float,
    batch_size: int,
    seed: int,
) -> Tuple[BatchPlan, Optional[PixelDataset]]:
    if batch_size < 1:
        raise ConfigurationError(f"batch_size must be >= 1, got {batch_size}")
    train, test = stratified_split(ds, train_fraction, seed)
    return BatchPlan(len(train), batch_size, seed, dataset=train), test


def prepare_cube(
    cube: HsiCube,
    train_fraction: float,
    seed: int,
    k: int = 30,
) -> Tuple[PixelDataset, Optional[PixelDataset], PcaModel]:
    """Split labeled pixels, fit PCA on the training pixels only and project both splits"""
    features, labels, _ = cube_pixels(cube)
    raw = PixelDataset(features, labels, cube.num_classes)
    train, test = stratified_split(raw, train_fraction, seed)
    pca = fit_pca(train.features, k)
    train = PixelDataset(pca.transform(train.features), train.class_labels, train.num_classes, "train")
    if test is not None:
        test = PixelDataset(pca.transform(test.features), test.class_labels, test.num_classes, "test")
    return train, test, pca


def save_dataset(ds: PixelDataset, path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, "wb") as f:
        np.savez(
            f,
            features=ds.features,
            class_labels=ds.class_labels,
            num_classes=np.int64(ds.num_classes),
            split=np.array(ds.split),
        )
    logger.info(f"Wrote {ds.split} dataset {path.name}: {len(ds)} x {ds.dim}")
    return path


def load_dataset(path: Union[str, Path]) -> PixelDataset:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"dataset file not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as archive:
            return PixelDataset(
                archive["features"],
                archive["class_labels"],
                int(archive["num_classes"]),
                str(archive["split"]),
            )
    except KeyError as e:
        raise DataFormatError(f"{path.name}: missing array {e}")
    except (BadZipFile, ValueError, OSError) as e:
        raise DataFormatError(f"{path.name}: unreadable dataset file", str(e))


def save_pca(pca: PcaModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, "wb") as f:
        np.savez(f, mean=pca.mean, components=pca.components, explained_variance=pca.explained_variance)
    return path
