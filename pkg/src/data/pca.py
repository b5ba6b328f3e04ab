"""
Principal component reduction of spectral bands for ADE-Net
"""
import logging
from dataclasses import dataclass

import numpy as np
from sklearn.decomposition import PCA

from src.errors import DimensionError, RankError

logger = logging.getLogger(__name__)


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[1]

    def transform(self, pixels: np.ndarray) -> np.ndarray:
        if pixels.ndim != 2 or pixels.shape[1] != self.mean.shape[0]:
            raise DimensionError(f"PCA fitted on {self.mean.shape[0]} bands, got shape {pixels.shape}")
        return (pixels - self.mean) @ self.components

    def inverse_transform(self, reduced: np.ndarray) -> np.ndarray:
        if reduced.ndim != 2 or reduced.shape[1] != self.n_components:
            raise DimensionError(f"PCA keeps {self.n_components} components, got shape {reduced.shape}")
        return reduced @ self.components.T + self.mean


def fit_pca(pixels: np.ndarray, k: int = 30) -> PcaModel:
    """
    Top-k principal axes from scikit-learn's full SVD solver. Each component is
    flipped so its largest-magnitude entry is positive, which makes the result
    independent of the solver's sign choice.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 2:
        raise DimensionError(f"fit_pca expects n x bands pixels, got shape {pixels.shape}")
    n, bands = pixels.shape
    if bands < k:
        raise RankError(f"cannot keep {k} components from {bands} bands", "band dimension")
    if n <= k:
        raise RankError(f"need more than {k} pixels to fit {k} components, got {n}", "sample dimension")

    pca = PCA(n_components=k, svd_solver="full").fit(pixels)
    variance = pca.explained_variance_
    tolerance = max(variance[0], 0.0) * max(n, bands) * np.finfo(np.float64).eps
    deficient = np.flatnonzero(variance <= tolerance)
    if deficient.size:
        raise RankError(
            f"pixel matrix has rank {int(deficient[0])} < {k}",
            f"component {int(deficient[0]) + 1} has variance {variance[deficient[0]]:.3e}",
        )

    components = pca.components_.T
    pivots = np.argmax(np.abs(components), axis=0)
    components = components * np.sign(components[pivots, np.arange(k)])

    logger.info(f"PCA {bands} -> {k} bands keeps {pca.explained_variance_ratio_.sum():.2%} of the variance")
    return PcaModel(mean=pca.mean_.copy(), components=components, explained_variance=variance.copy())
