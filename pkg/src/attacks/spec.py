"""
Attack kinds and parameters for ADE-Net
"""
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional

from src.errors import ConfigurationError


class AttackKind:
    """Attack types"""
    FGSM = "FGSM"
    CW = "CW"
    PGD = "PGD"
    IFGSM = "IFGSM"
    VANILLA = "VANILLA"

    ALL = (FGSM, CW, PGD, IFGSM, VANILLA)
    ITERATIVE = (PGD, IFGSM)


# "2 attack" is FGSM + CW, each larger mix adds the next kind
ATTACK_ORDER = [AttackKind.FGSM, AttackKind.CW, AttackKind.PGD, AttackKind.IFGSM, AttackKind.VANILLA]


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    attack_label: int
    epsilon: float = 0.1
    steps: int = 10
    step_size: Optional[float] = None
    random_start: bool = True
    cw_confidence: float = 0.0
    cw_constant: float = 1.0
    cw_iters: int = 100
    cw_lr: float = 0.005
    cw_binary_steps: int = 0

    def __post_init__(self):
        if self.kind not in AttackKind.ALL:
            raise ConfigurationError(f"unknown attack kind '{self.kind}'", f"expected one of {AttackKind.ALL}")
        if self.kind != AttackKind.VANILLA and not self.epsilon > 0:
            raise ConfigurationError(f"{self.kind} needs epsilon > 0, got {self.epsilon}")
        if self.kind in AttackKind.ITERATIVE and self.steps < 1:
            raise ConfigurationError(f"{self.kind} needs steps >= 1, got {self.steps}")
        if self.step_size is not None and not self.step_size > 0:
            raise ConfigurationError(f"step_size must be positive, got {self.step_size}")
        if self.kind == AttackKind.CW:
            if self.cw_iters < 1 or self.cw_binary_steps < 0 or not self.cw_lr > 0:
                raise ConfigurationError(
                    f"CW needs cw_iters >= 1, cw_lr > 0 and cw_binary_steps >= 0, "
                    f"got {self.cw_iters}, {self.cw_lr}, {self.cw_binary_steps}"
                )
            if self.cw_constant <= 0 or self.cw_confidence < 0:
                raise ConfigurationError("CW needs cw_constant > 0 and cw_confidence >= 0")
        if self.attack_label < 0:
            raise ConfigurationError(f"attack_label must be >= 0, got {self.attack_label}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def attack_specs_for_count(
    count: int,
    epsilon: float = 0.1,
    pgd_steps: int = 10,
    ifgsm_steps: int = 10,
    cw_constant: float = 1.0,
    cw_confidence: float = 0.0,
    cw_iters: int = 100,
    cw_lr: float = 0.005,
    cw_binary_steps: int = 0,
) -> List[AttackSpec]:
    """Specs for the 2..5 attack mixes, labelled 0..count-1 in mix order"""
    if not 2 <= count <= len(ATTACK_ORDER):
        raise ConfigurationError(f"attack count must be 2..{len(ATTACK_ORDER)}, got {count}")
    specs = []
    for label, kind in enumerate(ATTACK_ORDER[:count]):
        steps = pgd_steps if kind == AttackKind.PGD else ifgsm_steps
        specs.append(AttackSpec(
            kind=kind,
            attack_label=label,
            epsilon=epsilon,
            steps=steps,
            cw_confidence=cw_confidence,
            cw_constant=cw_constant,
            cw_iters=cw_iters,
            cw_lr=cw_lr,
            cw_binary_steps=cw_binary_steps,
        ))
    return specs
