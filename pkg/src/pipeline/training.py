"""
Supervised training loop shared by the victim, baseline and offline discriminator
"""
import logging
from typing import List, Optional

import numpy as np

from src.autodiff import Tensor, softmax_cross_entropy
from src.data.dataset import BatchPlan
from src.errors import ConfigurationError, NumericalError
from src.nn.models import ModelHandle
from src.nn.optim import Adam

logger = logging.getLogger(__name__)


def fit_classifier(
    model: ModelHandle,
    features: np.ndarray,
    labels: np.ndarray,
    epochs: int,
    batch_size: int,
    lr: float,
    seed: int,
    name: str = "model",
    plan: Optional[BatchPlan] = None,
) -> List[float]:
    """
    Adam on mean cross entropy; returns the mean loss of every epoch.
    A given `plan` fixes the batch order and overrides batch_size and seed.
    """
    optimizer = Adam(model.parameters(), lr)
    if plan is None:
        plan = BatchPlan(len(features), batch_size, seed)
    elif plan.n_samples != len(features):
        raise ConfigurationError(f"{name}: batch plan covers {plan.n_samples} samples, got {len(features)}")
    history = []
    for epoch in range(epochs):
        losses = []
        for b, index in enumerate(plan.batches(epoch)):
            try:
                loss = softmax_cross_entropy(model(Tensor(features[index])), labels[index])
                loss.backward()
            except NumericalError as e:
                raise NumericalError(f"{name}: non-finite loss or gradient at epoch {epoch}, batch {b}", e.message)
            optimizer.step()
            losses.append(loss.item())
        history.append(float(np.mean(losses)))
        logger.info(f"{name} epoch {epoch + 1}/{epochs}: loss {history[-1]:.4f}")
    model.history.extend(history)
    return history


def accuracy(model: ModelHandle, features: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(model.predict(features) == labels))
