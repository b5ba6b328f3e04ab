# Attacks package

from src.attacks.spec import ATTACK_ORDER, AttackKind, AttackSpec, attack_specs_for_count
from src.attacks.gradient import fgsm, ifgsm, input_gradient, pgd
from src.attacks.cw import cw
from src.attacks.mix import (
    AttackedDataset,
    apply_attack,
    build_attack_mix,
    load_attacked,
    save_attacked,
    spec_kinds,
)

__all__ = [
    'ATTACK_ORDER',
    'AttackKind',
    'AttackSpec',
    'attack_specs_for_count',
    'fgsm',
    'ifgsm',
    'input_gradient',
    'pgd',
    'cw',
    'AttackedDataset',
    'apply_attack',
    'build_attack_mix',
    'load_attacked',
    'save_attacked',
    'spec_kinds',
]
