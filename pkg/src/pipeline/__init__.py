# Pipeline package

from src.pipeline.config import CkaLabels, ExperimentConfig, derive_seed
from src.pipeline.discriminator import route, train_offline_discriminator
from src.pipeline.adenet import (
    AdeNetModel,
    BatchLoss,
    ade_batch_step,
    discriminator_objective,
    expert_objective,
    train_ade_net,
)
from src.pipeline.baseline import train_baseline, train_victim
from src.pipeline.evaluation import EvalReport, evaluate, summarize, write_report
from src.pipeline.experiment import TrialInputs, TrialOutcome, prepare_trial, run_trial
from src.pipeline.grid import GRID_COLUMNS, DIFFICULTY_ALPHA, difficulty_alphas, hyperparameter_grid

__all__ = [
    'CkaLabels',
    'ExperimentConfig',
    'derive_seed',
    'route',
    'train_offline_discriminator',
    'AdeNetModel',
    'BatchLoss',
    'ade_batch_step',
    'discriminator_objective',
    'expert_objective',
    'train_ade_net',
    'train_baseline',
    'train_victim',
    'EvalReport',
    'evaluate',
    'summarize',
    'write_report',
    'TrialInputs',
    'TrialOutcome',
    'prepare_trial',
    'run_trial',
    'GRID_COLUMNS',
    'DIFFICULTY_ALPHA',
    'difficulty_alphas',
    'hyperparameter_grid',
]
