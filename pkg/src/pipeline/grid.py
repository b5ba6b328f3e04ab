"""
Loss-weight grid for ADE-Net
Five weight configurations plus the baseline, for 2 to 5 attack mixes
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from src.attacks.spec import ATTACK_ORDER, AttackKind
from src.data.dataset import PixelDataset
from src.pipeline.adenet import train_ade_net
from src.pipeline.baseline import train_baseline
from src.pipeline.config import ExperimentConfig
from src.pipeline.evaluation import EvalReport, evaluate, summarize
from src.pipeline.experiment import prepare_trial

logger = logging.getLogger(__name__)

# Expert weights scaled by how hard each attack is to classify
DIFFICULTY_ALPHA = {
    AttackKind.FGSM: 1.4,
    AttackKind.CW: 2.3,
    AttackKind.PGD: 1.7,
    AttackKind.IFGSM: 1.3,
    AttackKind.VANILLA: 1.0,
}


@dataclass(frozen=True)
class GridColumn:
    name: str
    lambda_cka: float
    beta: float
    alpha: Optional[float]  # None selects DIFFICULTY_ALPHA

    def weights(self, attack_count: int) -> Dict[str, object]:
        alpha = difficulty_alphas(attack_count) if self.alpha is None else [self.alpha] * attack_count
        return {"alpha": alpha, "lambda_cka": [self.lambda_cka] * attack_count, "beta": self.beta}


GRID_COLUMNS = [
    GridColumn("All = 1.0", 1.0, 1.0, 1.0),
    GridColumn("λ_k=β=0.1, α_k=10.0", 0.1, 0.1, 10.0),
    GridColumn("λ_k=β=10.0, α_k=0.1", 10.0, 10.0, 0.1),
    GridColumn("λ_k=β=1.0, α_k=X_k", 1.0, 1.0, None),
    GridColumn("λ_k=0 (No CKA), β=α_k=1.0", 0.0, 1.0, 1.0),
]
BASELINE_COLUMN = "Baseline"
ATTACK_COUNTS = (2, 3, 4, 5)


def difficulty_alphas(attack_count: int) -> List[float]:
    return [DIFFICULTY_ALPHA[kind] for kind in ATTACK_ORDER[:attack_count]]


@dataclass
class GridReport:
    table: pd.DataFrame
    records: pd.DataFrame


def _cell(report: EvalReport) -> str:
    phase2 = f"II: {100 * report.phase2_oa:.2f} ± {100 * report.phase2_sd:.2f}"
    if report.phase1_oa is None:
        return phase2
    return f"I: {100 * report.phase1_oa:.2f} ± {100 * report.phase1_sd:.2f} / {phase2}"


def hyperparameter_grid(
    cfg: ExperimentConfig,
    attack_counts: Sequence[int] = ATTACK_COUNTS,
    dataset: Optional[PixelDataset] = None,
    split: Optional[Tuple[PixelDataset, PixelDataset]] = None,
) -> GridReport:
    """
    Rows are attack counts, columns the five weight configurations and the
    baseline. Victim, attack mixes, offline discriminator and baseline are
    built once per (attack count, seed) and shared by the five columns.
    """
    cells: Dict[Tuple[int, str], str] = {}
    records = []
    for count in attack_counts:
        count_cfg = cfg.with_overrides(attack_count=count)
        per_column: Dict[str, List[EvalReport]] = {c.name: [] for c in GRID_COLUMNS}
        baselines: List[EvalReport] = []
        for seed in cfg.seeds:
            inputs = prepare_trial(count_cfg, seed, dataset, split)
            baselines.append(evaluate(train_baseline(inputs.train_mix, count_cfg, seed), inputs.test_mix))
            for column in GRID_COLUMNS:
                column_cfg = count_cfg.with_overrides(**column.weights(count))
                model = train_ade_net(inputs.train_mix, inputs.train, column_cfg, seed, offline=inputs.offline)
                per_column[column.name].append(evaluate(model, inputs.test_mix))

        for column in GRID_COLUMNS:
            summary = summarize(per_column[column.name])
            cells[(count, column.name)] = _cell(summary)
            records.append({
                "attacks": count, "column": column.name,
                "phase1_oa": summary.phase1_oa, "phase1_sd": summary.phase1_sd,
                "phase2_oa": summary.phase2_oa, "phase2_sd": summary.phase2_sd,
                "trials": summary.trials,
            })
        baseline = summarize(baselines)
        cells[(count, BASELINE_COLUMN)] = _cell(baseline)
        records.append({
            "attacks": count, "column": BASELINE_COLUMN,
            "phase1_oa": None, "phase1_sd": None,
            "phase2_oa": baseline.phase2_oa, "phase2_sd": baseline.phase2_sd,
            "trials": baseline.trials,
        })
        logger.info(f"Grid row for {count} attacks complete")

    columns = [c.name for c in GRID_COLUMNS] + [BASELINE_COLUMN]
    table = pd.DataFrame(
        [[cells[(count, name)] for name in columns] for count in attack_counts],
        index=pd.Index([f"{count} attack" for count in attack_counts], name="# Attack"),
        columns=columns,
    )
    return GridReport(table=table, records=pd.DataFrame(records))
