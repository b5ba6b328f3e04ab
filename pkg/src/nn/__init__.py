# NN package

from src.nn.models import ModelHandle, build_mlp, build_model, build_unet1d
from src.nn.optim import Adam, AdamState, adam_step
from src.nn.checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    'ModelHandle',
    'build_mlp',
    'build_model',
    'build_unet1d',
    'Adam',
    'AdamState',
    'adam_step',
    'load_checkpoint',
    'save_checkpoint',
]
