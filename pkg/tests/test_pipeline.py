"""
Tests for the discriminator, the unified ADE-Net step, evaluation and the weight grid
"""
import numpy as np
import pytest

from src.attacks import AttackedDataset, AttackKind, attack_specs_for_count
from src.autodiff import Tensor, softmax_cross_entropy
from src.cka import CkaHistory, CkaMode, LogitMatrix
from src.data import BatchPlan, PixelDataset, make_synthetic, split_and_batch
from src.errors import ConfigurationError, NumericalError
from src.nn import Adam, build_mlp
from src.pipeline import (
    GRID_COLUMNS,
    AdeNetModel,
    CkaLabels,
    EvalReport,
    ExperimentConfig,
    ade_batch_step,
    derive_seed,
    difficulty_alphas,
    discriminator_objective,
    evaluate,
    expert_objective,
    hyperparameter_grid,
    prepare_trial,
    route,
    run_trial,
    summarize,
    train_ade_net,
    train_offline_discriminator,
    train_victim,
    write_report,
)
from src.pipeline.experiment import synthetic_dataset
from src.pipeline.training import fit_classifier


def _ce(logits, labels):
    z = logits - logits.max(axis=1, keepdims=True)
    return float(np.mean(np.log(np.exp(z).sum(axis=1)) - z[np.arange(len(labels)), labels]))


def _cka(o_v, o_k):
    return np.linalg.norm(o_v.T @ o_k) ** 2 / (np.linalg.norm(o_v.T @ o_v) * np.linalg.norm(o_k.T @ o_k))


def _toy_model(seed=0, input_dim=4, classes=3, **overrides):
    cfg = ExperimentConfig(attack_count=2, mlp_hidden=[3], cka_center=False, **overrides)
    disc = build_mlp(input_dim, [3], 2, seed=seed)
    experts = [build_mlp(input_dim, [3], classes, seed=seed + 10 + j) for j in range(2)]
    o_v = LogitMatrix(np.random.default_rng(seed).normal(size=(2, 5)))
    return AdeNetModel(disc, experts, o_v, cfg)


def _optimizers(model):
    disc = Adam(model.discriminator.parameters(), model.config.lr_discriminator)
    return disc, [Adam(e.parameters(), model.config.lr_expert) for e in model.experts]


def _two_box_mix(seed=0, n=50, dim=4):
    rng = np.random.default_rng(seed)
    features = np.vstack([rng.uniform(0, 1, (n, dim)), rng.uniform(3, 4, (n, dim))])
    return AttackedDataset(
        features,
        rng.integers(0, 2, size=2 * n),
        np.repeat([0, 1], n),
        2,
        np.tile(np.arange(n), 2),
        np.zeros(2 * n, dtype=bool),
    )


class TestRouting:

    def test_one_hot_logits(self, linear_model):
        disc = linear_model([[0.0, 5.0, 0.0]])
        assert route(disc, np.array([[1.0]])).tolist() == [1]

    def test_ties_go_to_smallest_label(self, linear_model):
        disc = linear_model([[3.0, 3.0]])
        assert route(disc, np.array([[1.0], [2.0]])).tolist() == [0, 0]

    def test_routing_partitions_the_batch(self):
        disc = build_mlp(4, [6], 3, seed=2)
        x = np.random.default_rng(0).normal(size=(37, 4))
        counts = np.bincount(route(disc, x), minlength=3)
        assert counts.sum() == 37


class TestOfflineDiscriminator:

    def test_separable_attacks(self):
        mix = _two_box_mix()
        vanilla = PixelDataset(np.random.default_rng(1).uniform(0, 1, (40, 4)), np.zeros(40, dtype=int), 2)
        cfg = ExperimentConfig(offline_epochs=30, batch_size=16, lr_discriminator=0.01, mlp_hidden=[16], ov_cap=10)
        disc, o_v = train_offline_discriminator(mix, vanilla, cfg, seed=0)
        assert np.mean(disc.predict(mix.features) == mix.attack_labels) >= 0.99
        assert o_v.values.shape == (2, 10)

        _, again = train_offline_discriminator(mix, vanilla, cfg, seed=0)
        assert again.values.tobytes() == o_v.values.tobytes()

    def test_small_vanilla_set_is_not_padded(self):
        mix = _two_box_mix()
        vanilla = PixelDataset(np.ones((3, 4)), np.zeros(3, dtype=int), 2)
        cfg = ExperimentConfig(offline_epochs=1, mlp_hidden=[4], ov_cap=10)
        _, o_v = train_offline_discriminator(mix, vanilla, cfg, seed=0)
        assert o_v.values.shape == (2, 3)

    def test_needs_two_attack_labels(self):
        mix = _two_box_mix().for_attack(0)
        vanilla = PixelDataset(np.ones((3, 4)), np.zeros(3, dtype=int), 2)
        with pytest.raises(ConfigurationError):
            train_offline_discriminator(mix, vanilla, ExperimentConfig(offline_epochs=1), seed=0)


class TestBatchStep:

    def test_one_batch_loss_matches_independent_recomputation(self):
        model = _toy_model(alpha=[0.7, 1.3], lambda_cka=[0.5, 2.0], beta=1.5, cka_labels=CkaLabels.GROUND_TRUTH)
        rng = np.random.default_rng(3)
        x = rng.normal(size=(2, 4))
        y = np.array([0, 2])
        c = np.array([0, 1])

        z = model.discriminator.logits(x)
        o_v = model.o_v.values
        expert_logits = [e.logits(x) for e in model.experts]
        expected = 1.5 * _ce(z, c) + 0.5 * _cka(o_v, z[[0]].T) + 2.0 * _cka(o_v, z[[1]].T)

        result = ade_batch_step(model, *_optimizers(model), x, y, c)

        routes = model.discriminator.predict(x)
        for j, alpha in enumerate([0.7, 1.3]):
            index = np.flatnonzero(routes == j)
            if index.size:
                expected += alpha * _ce(expert_logits[j][index], y[index])
        assert result.total == pytest.approx(expected, abs=1e-10)
        assert result.total == pytest.approx(result.discriminator_loss + result.ensemble_loss, abs=1e-12)
        assert sum(result.routed_counts.values()) == 2

    def test_no_cka_reduces_to_weighted_ce(self):
        model = _toy_model(lambda_cka=[0.0, 0.0], beta=2.0)
        twin = model.discriminator.clone()
        rng = np.random.default_rng(4)
        x = rng.normal(size=(8, 4))
        y = rng.integers(0, 3, size=8)
        c = rng.integers(0, 2, size=8)

        result = ade_batch_step(model, *_optimizers(model), x, y, c)
        assert result.discriminator_loss == result.beta * result.discriminator_ce

        twin_opt = Adam(twin.parameters(), model.config.lr_discriminator)
        (softmax_cross_entropy(twin(Tensor(x)), c) * 2.0).backward()
        twin_opt.step()
        for a, b in zip(model.discriminator.state(), twin.state()):
            assert np.array_equal(a, b)

    def test_expert_without_samples_is_untouched(self):
        model = _toy_model()
        weight, bias = model.discriminator.parameters()[-2:]
        weight.data = np.zeros_like(weight.data)
        bias.data = np.array([50.0, 0.0])
        idle_before = model.experts[1].state()
        x = np.random.default_rng(5).normal(size=(6, 4))

        result = ade_batch_step(model, *_optimizers(model), x, np.zeros(6, dtype=int), np.array([0, 1] * 3))
        assert result.routed_counts == {0: 6, 1: 0}
        assert 1 not in result.expert_ce
        for a, b in zip(model.experts[1].state(), idle_before):
            assert np.array_equal(a, b)
        assert all(p.grad is None for p in model.experts[1].parameters())

    def test_ensemble_loss_does_not_reach_the_discriminator(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(10, 4))
        y = rng.integers(0, 3, size=10)
        c = rng.integers(0, 2, size=10)
        light = _toy_model(alpha=[1.0, 1.0])
        heavy = _toy_model(alpha=[100.0, 100.0])
        ade_batch_step(light, *_optimizers(light), x, y, c)
        ade_batch_step(heavy, *_optimizers(heavy), x, y, c)
        for a, b in zip(light.discriminator.state(), heavy.discriminator.state()):
            assert np.array_equal(a, b)

    @pytest.mark.parametrize("seed", range(20))
    @pytest.mark.parametrize("cka_labels", CkaLabels.ALL)
    @pytest.mark.parametrize("cka_mode", CkaMode.ALL)
    def test_discriminator_objective_gradient(self, parameter_gradcheck, seed, cka_labels, cka_mode):
        model = _toy_model(seed, beta=1.5, lambda_cka=[0.5, 2.0], cka_labels=cka_labels, cka_mode=cka_mode)
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(8, 4))
        c = rng.permutation(np.arange(8) % 2)
        disc = model.discriminator

        def loss():
            return discriminator_objective(model, disc(Tensor(x)), c)[0]

        assert parameter_gradcheck(loss, disc.parameters()) < 1e-4

    @pytest.mark.parametrize("seed", range(20))
    def test_expert_objective_gradient(self, parameter_gradcheck, seed):
        model = _toy_model(seed)
        rng = np.random.default_rng(100 + seed)
        x = rng.normal(size=(7, 4))
        y = rng.integers(0, 3, size=7)
        expert = model.experts[seed % 2]

        def loss():
            return expert_objective(expert, x, y, 2.3)[0]

        assert parameter_gradcheck(loss, expert.parameters()) < 1e-4

    def test_objectives_match_hand_built_losses(self):
        model = _toy_model(3, beta=1.5, lambda_cka=[0.5, 2.0], cka_labels=CkaLabels.GROUND_TRUTH)
        rng = np.random.default_rng(3)
        x = rng.normal(size=(8, 4))
        c = np.array([0, 1] * 4)
        y = rng.integers(0, 3, size=8)
        logits = model.discriminator(Tensor(x))
        loss, ce, terms = discriminator_objective(model, logits, c)
        o_v = model.o_v.values
        expected_terms = {k: _cka(o_v, logits.data[c == k].T) for k in range(2)}
        assert ce.item() == pytest.approx(_ce(logits.data, c))
        assert terms == pytest.approx(expected_terms)
        assert loss.item() == pytest.approx(1.5 * _ce(logits.data, c) + 0.5 * expected_terms[0] + 2.0 * expected_terms[1])

        weighted, expert_ce = expert_objective(model.experts[0], x, y, 2.3)
        assert expert_ce.item() == pytest.approx(_ce(model.experts[0](Tensor(x)).data, y))
        assert weighted.item() == pytest.approx(2.3 * expert_ce.item())


class TestEvaluation:

    def _echo_model(self, column_echo, routing_column, attack_count=4, classes=3, dim=3):
        disc = column_echo(dim, attack_count, routing_column)
        experts = [column_echo(dim, classes, 1) for _ in range(attack_count)]
        return AdeNetModel(disc, experts, LogitMatrix(np.ones((attack_count, 2))), ExperimentConfig(attack_count=attack_count))

    def _mix(self, features, y, c, classes=3):
        n = len(y)
        return AttackedDataset(features, y, c, classes, np.arange(n), np.zeros(n, dtype=bool))

    def test_perfect_routing(self, column_echo):
        rng = np.random.default_rng(0)
        c = rng.integers(0, 4, size=200)
        y = rng.integers(0, 3, size=200)
        mix = self._mix(np.column_stack([c, y, np.zeros(200)]).astype(float), y, c)
        report = evaluate(self._echo_model(column_echo, 0), mix)
        assert report.phase1_oa == 1.0
        assert report.phase2_oa == 1.0
        assert sum(report.routed_counts.values()) == 200

    def test_random_routing_is_chance(self, column_echo):
        rng = np.random.default_rng(1)
        n = 2000
        c = rng.integers(0, 4, size=n)
        y = rng.integers(0, 3, size=n)
        noise = rng.integers(0, 4, size=n)
        mix = self._mix(np.column_stack([c, y, noise]).astype(float), y, c)
        report = evaluate(self._echo_model(column_echo, 2), mix)
        assert abs(report.phase1_oa - 0.25) < 0.03
        assert report.phase2_oa == 1.0

    def test_misrouted_samples_use_the_routed_expert(self, column_echo):
        y = np.array([0, 1, 2, 0])
        c = np.array([0, 0, 1, 1])
        routes = np.array([0, 1, 1, 0])
        guesses = np.array([0, 0, 2, 0])
        features = np.column_stack([np.zeros(4), y, np.zeros(4), routes, guesses]).astype(float)
        disc = column_echo(5, 2, 3)
        experts = [column_echo(5, 3, 1), column_echo(5, 3, 4)]
        model = AdeNetModel(disc, experts, LogitMatrix(np.ones((2, 3))), ExperimentConfig())
        mix = self._mix(features, y, c)

        routed = evaluate(model, mix)
        assert routed.phase1_oa == 0.5
        assert routed.phase2_oa == 0.75
        assert evaluate(model, mix, oracle_routing=True).phase2_oa == 1.0

    def test_baseline_report_has_no_phase_one(self, random_victim, tiny_dataset):
        mix = AttackedDataset.from_clean(tiny_dataset)
        report = evaluate(random_victim, mix)
        assert report.phase1_oa is None
        assert report.model_kind == "baseline"

    def test_summarize_population_sd(self):
        reports = [EvalReport(0.5, phase1_oa=0.8), EvalReport(0.7, phase1_oa=0.6)]
        summary = summarize(reports, [EvalReport(0.4, model_kind="baseline")] * 2)
        assert summary.phase2_oa == pytest.approx(0.6)
        assert summary.phase2_sd == pytest.approx(0.1)
        assert summary.phase1_oa == pytest.approx(0.7)
        assert summary.phase1_sd == pytest.approx(0.1)
        assert summary.baseline_oa == pytest.approx(0.4)
        assert summary.baseline_sd == 0.0
        assert summary.trials == 2

    def test_report_names_attack_kinds(self, column_echo):
        rng = np.random.default_rng(2)
        c = rng.integers(0, 2, size=40)
        y = rng.integers(0, 3, size=40)
        mix = self._mix(np.column_stack([c, y, np.zeros(40)]).astype(float), y, c)
        mix.provenance = {"specs": [s.to_dict() for s in attack_specs_for_count(2)]}
        report = evaluate(self._echo_model(column_echo, 0, attack_count=2), mix)
        assert report.attack_kinds == {0: AttackKind.FGSM, 1: AttackKind.CW}
        assert "attack 1 (CW): class OA 100.00" in report.format_table()
        assert summarize([report, report]).attack_kinds == report.attack_kinds

    def test_summarize_needs_reports(self):
        with pytest.raises(ConfigurationError):
            summarize([])

    def test_write_report(self, tmp_path):
        write_report(EvalReport(0.9, phase1_oa=0.8, per_attack={0: 0.85}), tmp_path)
        assert (tmp_path / "report.csv").read_text().startswith("metric,mean,sd")
        assert "Phase II OA: 90.00" in (tmp_path / "report.txt").read_text()


class TestTraining:

    def test_trial_end_to_end(self, tiny_config_values):
        cfg = ExperimentConfig(**tiny_config_values)
        outcome = run_trial(cfg, seed=0)
        assert len(outcome.model.experts) == 2
        assert len(outcome.model.training_log) == cfg.epochs
        assert 0.0 <= outcome.adenet_report.phase2_oa <= 1.0
        assert 0.0 <= outcome.baseline_report.phase2_oa <= 1.0
        assert set(outcome.victim_accuracy) == {"clean", AttackKind.FGSM, AttackKind.CW}
        assert len(outcome.history) > 0

    def test_trial_is_reproducible(self, tiny_config_values):
        cfg = ExperimentConfig(**tiny_config_values)
        a = run_trial(cfg, seed=1)
        b = run_trial(cfg, seed=1)
        assert a.model.discriminator.checksum() == b.model.discriminator.checksum()
        assert a.adenet_report.to_dict() == b.adenet_report.to_dict()

    def test_collapsed_discriminator_completes(self, tiny_config_values, caplog):
        cfg = ExperimentConfig(**tiny_config_values)
        inputs = prepare_trial(cfg, seed=0)
        disc = build_mlp(inputs.train.dim, [8], 2, seed=0)
        weight, bias = disc.parameters()[-2:]
        weight.data = np.zeros_like(weight.data)
        bias.data = np.array([100.0, 0.0])
        o_v = LogitMatrix(np.random.default_rng(0).normal(size=(2, 5)))

        model = train_ade_net(inputs.train_mix, inputs.train, cfg, 0, offline=(disc, o_v))
        report = evaluate(model, inputs.test_mix)
        assert report.routed_counts == {0: len(inputs.test_mix), 1: 0}
        assert "received no samples" in caplog.text

    def test_offline_discriminator_is_not_modified(self, tiny_config_values):
        cfg = ExperimentConfig(**tiny_config_values)
        inputs = prepare_trial(cfg, seed=0)
        before = inputs.offline[0].checksum()
        history = CkaHistory()
        train_ade_net(inputs.train_mix, inputs.train, cfg, 0, offline=inputs.offline, history=history)
        assert inputs.offline[0].checksum() == before
        assert history.epochs == list(range(cfg.epochs))

    def test_victim_trains_on_the_split_batch_plan(self, tiny_config_values):
        cfg = ExperimentConfig(**tiny_config_values)
        inputs = prepare_trial(cfg, seed=0)
        plan, test = split_and_batch(
            synthetic_dataset(cfg, 0), cfg.train_fraction, cfg.batch_size, derive_seed(0, "split")
        )
        assert np.array_equal(inputs.train.features, plan.dataset.features)
        assert np.array_equal(inputs.test.features, test.features)
        assert train_victim(plan.dataset, cfg, 0, plan=plan).checksum() == inputs.victim.checksum()

    def test_victim_plan_must_cover_the_training_set(self, tiny_config_values, tiny_dataset):
        cfg = ExperimentConfig(**tiny_config_values)
        with pytest.raises(ConfigurationError):
            train_victim(tiny_dataset, cfg, 0, plan=BatchPlan(len(tiny_dataset) - 1, 8, seed=0))

    def test_non_finite_gradient_names_epoch_and_batch(self, tiny_dataset, random_victim, monkeypatch):
        def explode(tensor):
            raise NumericalError("non-finite gradient flowing out of matmul")

        monkeypatch.setattr(Tensor, "backward", explode)
        with pytest.raises(NumericalError, match="victim: non-finite loss or gradient at epoch 0, batch 0"):
            fit_classifier(
                random_victim, tiny_dataset.features, tiny_dataset.class_labels, 1, 16, 0.01, seed=0, name="victim"
            )

    def test_non_finite_discriminator_gradient_names_epoch_and_batch(self, monkeypatch):
        model = _toy_model()

        def explode(tensor):
            raise NumericalError("non-finite gradient flowing out of matmul")

        monkeypatch.setattr(Tensor, "backward", explode)
        x = np.random.default_rng(0).normal(size=(4, 4))
        with pytest.raises(NumericalError, match="discriminator gradient at epoch 2, batch 5"):
            ade_batch_step(model, *_optimizers(model), x, np.zeros(4, dtype=int), np.array([0, 1, 0, 1]), epoch=2, batch=5)

    def test_model_directory_round_trip(self, tmp_path):
        model = _toy_model()
        model.save(tmp_path / "adenet")
        restored = AdeNetModel.load(tmp_path / "adenet")
        x = np.random.default_rng(0).normal(size=(5, 4))
        for a, b in zip(model.predict(x), restored.predict(x)):
            assert np.array_equal(a, b)
        assert restored.config == model.config


class TestGrid:

    def test_difficulty_alphas(self):
        assert difficulty_alphas(5) == [1.4, 2.3, 1.7, 1.3, 1.0]
        assert difficulty_alphas(2) == [1.4, 2.3]

    def test_columns(self):
        assert len(GRID_COLUMNS) == 5
        weights = {c.name: c.weights(3) for c in GRID_COLUMNS}
        assert weights["All = 1.0"] == {"alpha": [1.0] * 3, "lambda_cka": [1.0] * 3, "beta": 1.0}
        assert weights["λ_k=β=1.0, α_k=X_k"]["alpha"] == [1.4, 2.3, 1.7]
        assert weights["λ_k=0 (No CKA), β=α_k=1.0"]["lambda_cka"] == [0.0] * 3
        assert weights["λ_k=β=0.1, α_k=10.0"]["alpha"] == [10.0] * 3
        assert weights["λ_k=β=10.0, α_k=0.1"]["beta"] == 10.0

    def test_two_attack_mix_is_fgsm_and_cw(self):
        assert [s.kind for s in attack_specs_for_count(2)] == [AttackKind.FGSM, AttackKind.CW]

    def test_grid_table_shape(self, tiny_config_values):
        cfg = ExperimentConfig(**tiny_config_values)
        dataset = make_synthetic(20, 3, 8, 1.4, seed=0)
        report = hyperparameter_grid(cfg, dataset=dataset)
        assert report.table.shape == (4, 6)
        assert list(report.table.index) == ["2 attack", "3 attack", "4 attack", "5 attack"]
        assert report.table.columns[-1] == "Baseline"
        assert all(cell.startswith("I: ") and " / II: " in cell for cell in report.table.iloc[:, :5].values.ravel())
        assert all(cell.startswith("II: ") for cell in report.table["Baseline"])
        assert len(report.records) == 4 * 6
