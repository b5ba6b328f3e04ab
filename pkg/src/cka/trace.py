"""
Per-epoch CKA traces for ADE-Net
"""
import logging
from collections import defaultdict
from itertools import combinations
from pathlib import Path
from typing import Dict, List, Tuple, Union

import pandas as pd

from src.errors import ContractError

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["epoch", "attack_label", "mean_cka"]


class CkaHistory:
    """Batch-level CKA values keyed by (epoch, attack label)"""

    def __init__(self):
        self.values: Dict[Tuple[int, int], List[float]] = defaultdict(list)

    def record(self, epoch: int, attack_label: int, value: float) -> None:
        self.values[(int(epoch), int(attack_label))].append(float(value))

    @property
    def epochs(self) -> List[int]:
        return sorted({epoch for epoch, _ in self.values})

    def __len__(self) -> int:
        return len(self.values)


def batch_cka_trace(history: CkaHistory) -> pd.DataFrame:
    if not len(history):
        raise ContractError("CKA trace needs at least one completed epoch")
    rows = [
        {"epoch": epoch, "attack_label": label, "mean_cka": sum(vals) / len(vals)}
        for (epoch, label), vals in sorted(history.values.items())
    ]
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)


def trace_gaps(trace: pd.DataFrame) -> pd.DataFrame:
    """Smallest gap between any two attack traces at each epoch"""
    rows = []
    for epoch, group in trace.groupby("epoch", sort=True):
        means = group.sort_values("attack_label")["mean_cka"].tolist()
        gaps = [abs(a - b) for a, b in combinations(means, 2)]
        rows.append({"epoch": epoch, "attacks": len(means), "min_gap": min(gaps) if gaps else float("nan")})
    return pd.DataFrame(rows, columns=["epoch", "attacks", "min_gap"])


def write_trace(trace: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    trace.to_csv(path, index=False)
    logger.info(f"Wrote CKA trace {path.name} ({len(trace)} rows)")
    return path
