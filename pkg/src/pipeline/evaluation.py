"""
Phase I / Phase II accuracy reports for ADE-Net
"""
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.attacks.mix import AttackedDataset, spec_kinds
from src.errors import ConfigurationError
from src.nn.models import ModelHandle
from src.pipeline.adenet import AdeNetModel

logger = logging.getLogger(__name__)


@dataclass
class EvalReport:
    """
    Accuracies as mean and population sd over `trials`.

    Phase I is attack-label accuracy of the discriminator and is None for a
    baseline. Phase II is class accuracy of the unified model (or the baseline).
    """

    phase2_oa: float
    phase2_sd: float = 0.0
    phase1_oa: Optional[float] = None
    phase1_sd: Optional[float] = None
    baseline_oa: Optional[float] = None
    baseline_sd: Optional[float] = None
    per_attack: Dict[int, float] = field(default_factory=dict)
    routed_counts: Dict[int, int] = field(default_factory=dict)
    attack_kinds: Dict[int, str] = field(default_factory=dict)
    trials: int = 1
    model_kind: str = "adenet"

    def to_dict(self) -> Dict:
        return asdict(self)

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {"metric": "phase1_oa", "mean": self.phase1_oa, "sd": self.phase1_sd},
            {"metric": "phase2_oa", "mean": self.phase2_oa, "sd": self.phase2_sd},
            {"metric": "baseline_oa", "mean": self.baseline_oa, "sd": self.baseline_sd},
        ]
        rows += [{"metric": f"attack{k}_class_oa", "mean": v, "sd": None} for k, v in sorted(self.per_attack.items())]
        rows += [{"metric": f"expert{k}_routed", "mean": v, "sd": None} for k, v in sorted(self.routed_counts.items())]
        frame = pd.DataFrame(rows, columns=["metric", "mean", "sd"])
        return frame[frame["mean"].notna()].reset_index(drop=True)

    def format_table(self) -> str:
        def pct(mean: Optional[float], sd: Optional[float]) -> str:
            return "-" if mean is None else f"{100 * mean:.2f} ± {100 * (sd or 0.0):.2f}"

        lines = [
            f"Trials: {self.trials}",
            f"Phase I OA:  {pct(self.phase1_oa, self.phase1_sd)}",
            f"Phase II OA: {pct(self.phase2_oa, self.phase2_sd)}",
            f"Baseline OA: {pct(self.baseline_oa, self.baseline_sd)}",
        ]
        for k, v in sorted(self.per_attack.items()):
            kind = f" ({self.attack_kinds[k]})" if k in self.attack_kinds else ""
            lines.append(f"  attack {k}{kind}: class OA {100 * v:.2f}")
        if self.routed_counts:
            lines.append(f"  routed per expert: {dict(sorted(self.routed_counts.items()))}")
        return "\n".join(lines)


def evaluate(
    model: Union[AdeNetModel, ModelHandle],
    test_mix: AttackedDataset,
    oracle_routing: bool = False,
) -> EvalReport:
    """
    Score a unified model or a single baseline network on a test mix. A misrouted
    sample counts through the expert it was routed to unless `oracle_routing`.
    """
    y, c = test_mix.class_labels, test_mix.attack_labels
    if isinstance(model, AdeNetModel):
        predicted, classes = model.predict(test_mix.features, c if oracle_routing else None)
        phase1 = float(np.mean(predicted == c))
        routed = np.bincount(predicted, minlength=model.attack_count)
        routed_counts = {j: int(n) for j, n in enumerate(routed)}
        kind = "adenet"
    else:
        classes = model.predict(test_mix.features)
        phase1, routed_counts, kind = None, {}, "baseline"
    correct = classes == y
    per_attack = {int(k): float(np.mean(correct[c == k])) for k in np.unique(c)}
    report = EvalReport(
        phase2_oa=float(np.mean(correct)),
        phase1_oa=phase1,
        phase1_sd=0.0 if phase1 is not None else None,
        per_attack=per_attack,
        routed_counts=routed_counts,
        attack_kinds=spec_kinds(test_mix),
        model_kind=kind,
    )
    logger.info(
        f"Evaluated {kind} on {len(test_mix)} samples: Phase II {report.phase2_oa:.2%}"
        + (f", Phase I {phase1:.2%}" if phase1 is not None else "")
    )
    return report


def _mean_sd(values: Sequence[float]):
    return float(np.mean(values)), float(np.std(values))


def summarize(
    reports: List[EvalReport],
    baseline_reports: Optional[List[EvalReport]] = None,
) -> EvalReport:
    """Combine per-trial reports into mean and population sd"""
    if not reports:
        raise ConfigurationError("summarize needs at least one report")
    phase2, phase2_sd = _mean_sd([r.phase2_oa for r in reports])
    phase1 = phase1_sd = None
    if all(r.phase1_oa is not None for r in reports):
        phase1, phase1_sd = _mean_sd([r.phase1_oa for r in reports])
    labels = sorted({k for r in reports for k in r.per_attack})
    per_attack = {k: float(np.mean([r.per_attack[k] for r in reports if k in r.per_attack])) for k in labels}
    experts = sorted({k for r in reports for k in r.routed_counts})
    routed = {k: int(sum(r.routed_counts.get(k, 0) for r in reports)) for k in experts}
    kinds: Dict[int, str] = {}
    for r in reports:
        kinds.update(r.attack_kinds)
    summary = EvalReport(
        phase2_oa=phase2,
        phase2_sd=phase2_sd,
        phase1_oa=phase1,
        phase1_sd=phase1_sd,
        per_attack=per_attack,
        routed_counts=routed,
        attack_kinds=kinds,
        trials=len(reports),
        model_kind=reports[0].model_kind,
    )
    if baseline_reports:
        summary.baseline_oa, summary.baseline_sd = _mean_sd([r.phase2_oa for r in baseline_reports])
    return summary


def write_report(report: EvalReport, directory: Union[str, Path], stem: str = "report") -> Path:
    directory = Path(directory)
    report.to_frame().to_csv(directory / f"{stem}.csv", index=False)
    (directory / f"{stem}.txt").write_text(report.format_table() + "\n", encoding="utf-8")
    logger.info(f"Wrote {stem}.csv and {stem}.txt")
    return directory / f"{stem}.csv"
