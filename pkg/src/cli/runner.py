"""
Command runner for ADE-Net
Each verb writes a manifest first, then its artifacts into the output directory
"""
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import pandas as pd

from config import settings
from src.attacks.mix import AttackedDataset, build_attack_mix, load_attacked, save_attacked
from src.cka.trace import CkaHistory, batch_cka_trace, trace_gaps, write_trace
from src.data.cube import load_cube, load_mat_cube, load_pixel_list
from src.data.dataset import PixelDataset, load_dataset, prepare_cube, save_dataset, save_pca, stratified_split
from src.errors import AdeNetError, ConfigurationError, MissingInputError, UsageError
from src.nn.checkpoint import load_checkpoint, save_checkpoint
from src.pipeline.adenet import AdeNetModel, train_ade_net
from src.pipeline.baseline import train_baseline, train_victim
from src.pipeline.config import ExperimentConfig, derive_seed
from src.pipeline.evaluation import EvalReport, evaluate, summarize, write_report
from src.pipeline.experiment import synthetic_dataset
from src.pipeline.grid import ATTACK_COUNTS, hyperparameter_grid

logger = logging.getLogger(__name__)

VERBS = ("prepare", "attack", "train-baseline", "train-adenet", "evaluate", "grid", "synth", "cka-trace")

TRAIN_DATASET = "dataset_train.npz"
TEST_DATASET = "dataset_test.npz"


def attack_file(split: str, seed: int) -> str:
    return f"attack_{split}_seed{seed}.npz"


@dataclass
class Command:
    verb: str
    output_dir: Path
    config_path: Optional[Path] = None
    input_dir: Optional[Path] = None
    seeds: Optional[List[int]] = None
    attacks: Optional[int] = None
    cka_mode: Optional[str] = None
    arch: Optional[str] = None

    def __post_init__(self):
        if self.verb not in VERBS:
            raise UsageError(f"unknown verb '{self.verb}'", f"expected one of {', '.join(VERBS)}")
        self.output_dir = Path(self.output_dir)
        self.input_dir = Path(self.input_dir) if self.input_dir is not None else self.output_dir

    def overrides(self) -> Dict[str, Any]:
        values = {"seeds": self.seeds, "attack_count": self.attacks, "cka_mode": self.cka_mode, "arch": self.arch}
        return {k: v for k, v in values.items() if v is not None}

    def load_config(self) -> ExperimentConfig:
        if self.config_path is not None:
            return ExperimentConfig.load(self.config_path, **self.overrides())
        return ExperimentConfig(**self.overrides())


def file_checksum(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class CommandRunner:
    """Executes one Command; verb handlers return the artifact paths they wrote"""

    def __init__(self, command: Command):
        self.command = command
        self.cfg = command.load_config()
        self.out = command.output_dir
        self.inp = command.input_dir
        self.handlers: Dict[str, Callable[[], List[Path]]] = {
            "synth": self.synth,
            "prepare": self.prepare,
            "attack": self.attack,
            "train-baseline": self.train_baseline,
            "train-adenet": self.train_adenet,
            "evaluate": self.evaluate,
            "grid": self.grid,
            "cka-trace": self.cka_trace,
        }

    # Inputs and manifest

    def _input(self, name: str) -> Path:
        path = self.inp / name
        if not path.exists():
            raise MissingInputError(f"{self.command.verb} needs {name} in {self.inp}")
        return path

    def _training_input(self, seed: int) -> Path:
        path = self.inp / attack_file("train", seed)
        return path if path.exists() else self._input(TRAIN_DATASET)

    def _test_input(self, seed: int) -> Path:
        path = self.inp / attack_file("test", seed)
        return path if path.exists() else self._input(TEST_DATASET)

    def _cube_inputs(self) -> List[Path]:
        if not self.cfg.cube_path:
            raise ConfigurationError("prepare needs cube_path in the experiment config")
        paths = [Path(self.cfg.cube_path)] + ([Path(self.cfg.gt_path)] if self.cfg.gt_path else [])
        for p in paths:
            if not p.exists():
                raise MissingInputError(f"cube input not found: {p}")
        return paths

    def required_inputs(self) -> List[Path]:
        verb, seeds = self.command.verb, self.cfg.seeds
        if verb == "synth":
            return []
        if verb == "prepare":
            return self._cube_inputs()
        if verb == "attack":
            return [self._input(TRAIN_DATASET), self._input(TEST_DATASET)]
        if verb in ("train-baseline", "train-adenet", "cka-trace"):
            inputs = [self._training_input(s) for s in seeds]
            if verb != "train-baseline":
                inputs.append(self._input(TRAIN_DATASET))
            return inputs
        if verb == "evaluate":
            inputs = [self._test_input(s) for s in seeds]
            for s in seeds:
                inputs += [p for p in (self.inp / f"adenet_seed{s}").glob("*") if p.is_file()]
                if (self.inp / f"baseline_seed{s}.ckpt").exists():
                    inputs.append(self.inp / f"baseline_seed{s}.ckpt")
            return inputs
        return [p for p in (self.inp / TRAIN_DATASET, self.inp / TEST_DATASET) if p.exists()]

    def write_manifest(self, inputs: List[Path]) -> Path:
        manifest = {
            "tool": settings.TOOL_NAME,
            "version": settings.TOOL_VERSION,
            "verb": self.command.verb,
            "config": self.cfg.to_dict(),
            "inputs": {str(p): file_checksum(p) for p in sorted(set(inputs))},
        }
        path = self.out / f"manifest_{self.command.verb}.json"
        path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        logger.info(f"Wrote {path.name} with {len(inputs)} input checksums")
        return path

    def run(self) -> List[Path]:
        inputs = self.required_inputs()
        self.out.mkdir(parents=True, exist_ok=True)
        manifest = self.write_manifest(inputs)
        return [manifest] + self.handlers[self.command.verb]()

    # Loading helpers

    def _load_training(self, seed: int) -> AttackedDataset:
        path = self._training_input(seed)
        if path.name == TRAIN_DATASET:
            logger.info(f"No attack mix for seed {seed}; training on clean {TRAIN_DATASET}")
            return AttackedDataset.from_clean(load_dataset(path))
        return load_attacked(path)

    def _load_test(self, seed: int) -> AttackedDataset:
        path = self._test_input(seed)
        if path.name == TEST_DATASET:
            return AttackedDataset.from_clean(load_dataset(path))
        return load_attacked(path)

    # Verbs

    def synth(self) -> List[Path]:
        seed = self.cfg.seeds[0]
        train, test = stratified_split(synthetic_dataset(self.cfg, seed), self.cfg.train_fraction, derive_seed(seed, "split"))
        return [save_dataset(train, self.out / TRAIN_DATASET), save_dataset(test, self.out / TEST_DATASET)]

    def prepare(self) -> List[Path]:
        cfg = self.cfg
        if cfg.cube_format == "mat":
            cube = load_mat_cube(cfg.cube_path, cfg.mat_key, cfg.gt_path, cfg.gt_key)
        elif cfg.cube_format == "pixels":
            cube = load_pixel_list(cfg.cube_path)
        else:
            cube = load_cube(cfg.cube_path)
        train, test, pca = prepare_cube(cube, cfg.train_fraction, derive_seed(cfg.seeds[0], "split"), cfg.pca_components)
        return [
            save_dataset(train, self.out / TRAIN_DATASET),
            save_dataset(test, self.out / TEST_DATASET),
            save_pca(pca, self.out / "pca.npz"),
        ]

    def attack(self) -> List[Path]:
        train = load_dataset(self.inp / TRAIN_DATASET)
        test = load_dataset(self.inp / TEST_DATASET)
        written = []
        for seed in self.cfg.seeds:
            victim = train_victim(train, self.cfg, seed)
            written.append(save_checkpoint(victim, self.out / f"victim_seed{seed}.ckpt"))
            for split, ds in (("train", train), ("test", test)):
                mix = build_attack_mix(
                    ds, self.cfg.attack_specs(), victim,
                    derive_seed(seed, f"attack-{split}"), self.cfg.workers, self.cfg.attack_chunk_size,
                )
                written.append(save_attacked(mix, self.out / attack_file(split, seed)))
        return written

    def train_baseline(self) -> List[Path]:
        written = []
        for seed in self.cfg.seeds:
            model = train_baseline(self._load_training(seed), self.cfg, seed)
            written.append(save_checkpoint(model, self.out / f"baseline_seed{seed}.ckpt"))
            log_path = self.out / f"baseline_seed{seed}_loss.csv"
            pd.DataFrame({"epoch": range(len(model.history)), "loss": model.history}).to_csv(log_path, index=False)
            written.append(log_path)
        return written

    def _train_adenet(self, seed: int) -> Tuple[AdeNetModel, CkaHistory]:
        history = CkaHistory()
        mix = self._load_training(seed)
        model = train_ade_net(mix, load_dataset(self.inp / TRAIN_DATASET), self.cfg, seed, history=history)
        return model, history

    def train_adenet(self) -> List[Path]:
        written = []
        for seed in self.cfg.seeds:
            model, history = self._train_adenet(seed)
            written.append(model.save(self.out / f"adenet_seed{seed}"))
            log = pd.json_normalize(model.training_log)
            log_path = self.out / f"adenet_seed{seed}_loss.csv"
            log.to_csv(log_path, index=False)
            written += [log_path, write_trace(batch_cka_trace(history), self.out / f"cka_trace_seed{seed}.csv")]
        return written

    def cka_trace(self) -> List[Path]:
        written = []
        for seed in self.cfg.seeds:
            _, history = self._train_adenet(seed)
            trace = batch_cka_trace(history)
            written.append(write_trace(trace, self.out / f"cka_trace_seed{seed}.csv"))
            gaps_path = self.out / f"cka_gaps_seed{seed}.csv"
            trace_gaps(trace).to_csv(gaps_path, index=False)
            written.append(gaps_path)
        return written

    def evaluate(self) -> List[Path]:
        adenet_reports: List[EvalReport] = []
        baseline_reports: List[EvalReport] = []
        for seed in self.cfg.seeds:
            test_mix = self._load_test(seed)
            if (self.inp / f"adenet_seed{seed}" / "discriminator.ckpt").exists():
                adenet_reports.append(evaluate(AdeNetModel.load(self.inp / f"adenet_seed{seed}"), test_mix))
            if (self.inp / f"baseline_seed{seed}.ckpt").exists():
                baseline_reports.append(evaluate(load_checkpoint(self.inp / f"baseline_seed{seed}.ckpt"), test_mix))
        if adenet_reports:
            report = summarize(adenet_reports, baseline_reports or None)
        elif baseline_reports:
            report = summarize(baseline_reports)
        else:
            raise MissingInputError(f"no trained ADE-Net or baseline checkpoints in {self.inp}")
        print(report.format_table())
        return [write_report(report, self.out)]

    def grid(self) -> List[Path]:
        split: Optional[Tuple[PixelDataset, PixelDataset]] = None
        if (self.inp / TRAIN_DATASET).exists() and (self.inp / TEST_DATASET).exists():
            split = (load_dataset(self.inp / TRAIN_DATASET), load_dataset(self.inp / TEST_DATASET))
        counts = [self.command.attacks] if self.command.attacks else list(ATTACK_COUNTS)
        report = hyperparameter_grid(self.cfg, counts, split=split)
        table_csv = self.out / "grid_table.csv"
        table_txt = self.out / "grid_table.txt"
        records = self.out / "grid_records.csv"
        report.table.to_csv(table_csv)
        table_txt.write_text(report.table.to_string() + "\n", encoding="utf-8")
        report.records.to_csv(records, index=False)
        print(report.table.to_string())
        return [table_csv, table_txt, records]


def run(command: Command) -> int:
    """Execute a command and map failures to exit codes"""
    try:
        written = CommandRunner(command).run()
    except AdeNetError as e:
        logger.error(f"{command.verb} failed with a {e.category} error: {e}")
        print(f"\n❌ {e}")
        return e.exit_code
    except Exception as e:
        logger.exception(f"{command.verb} failed unexpectedly")
        print(f"\n❌ [internal] {e}")
        return 5
    for path in written:
        logger.info(f"Artifact: {path}")
    print(f"\n✅ {command.verb} finished: {len(written)} artifacts in {command.output_dir}")
    return 0
