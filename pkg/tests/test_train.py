"""Optimizers, schedulers, early stopping and training loops against hand oracles."""

import dataclasses
import json
import math

import numpy as np
import pytest

from fd_fixtures import make_generator_fixture
from signaudio.extractor import ToyClassifier, cross_entropy
from signaudio.specgen import (
    GeneratorParams,
    LossWeights,
    SpectrogramGenerator,
    combined_loss,
    combined_loss_with_grad,
    complex_loss_with_grad,
)
from signaudio.train import (
    AdamConfig,
    CosineScheduler,
    EarlyStop,
    PlateauScheduler,
    SgdConfig,
    TrainHistory,
    adam_step,
    early_stop_update,
    grad_check,
    scheduler_step,
    sgd_accumulate_step,
    train_combined,
    train_specgen,
)


class TestConfigs:
    def test_sgd_defaults(self):
        cfg = SgdConfig()
        assert cfg.learning_rate == 1e-3
        assert cfg.momentum == 0.9
        assert cfg.weight_decay == 1e-8
        assert cfg.accumulation == 8

    def test_adam_defaults(self):
        cfg = AdamConfig()
        assert cfg.learning_rate == 1e-2
        assert (cfg.beta1, cfg.beta2) == (0.9, 0.999)
        assert cfg.eps == 1e-8
        assert cfg.weight_decay == 1e-8

    def test_sgd_validation(self):
        with pytest.raises(ValueError):
            SgdConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            SgdConfig(momentum=1.0)
        with pytest.raises(ValueError):
            SgdConfig(accumulation=0)
        with pytest.raises(ValueError):
            SgdConfig(weight_decay=-1e-9)

    def test_adam_validation(self):
        with pytest.raises(ValueError):
            AdamConfig(learning_rate=-1e-3)
        with pytest.raises(ValueError):
            AdamConfig(beta1=1.0)
        with pytest.raises(ValueError):
            AdamConfig(beta2=-0.1)
        with pytest.raises(ValueError):
            AdamConfig(eps=0.0)
        # zero learning rate is legal: it freezes the weights
        assert AdamConfig(learning_rate=0.0).learning_rate == 0.0


class TestSgdAccumulateStep:
    def test_eight_identical_gradients_move_by_eta_times_eight_g(self):
        # gradient entries are powers of two so the repeated sums are exact
        g = np.array([0.25, -0.5, 1.0])
        theta = np.array([1.0, 2.0, 3.0])
        cfg = SgdConfig(learning_rate=0.01, momentum=0.0, weight_decay=0.0,
                        accumulation=8)
        sgd_accumulate_step([theta], [[g]] * 8, cfg)
        assert np.array_equal(theta, np.array([1.0, 2.0, 3.0]) - 0.01 * 8.0 * g)

    def test_momentum_second_step_scales_by_one_point_nine(self):
        g = np.array([0.4, -1.5])
        cfg = SgdConfig(learning_rate=0.1, momentum=0.9, weight_decay=0.0,
                        accumulation=1)
        theta = np.array([5.0, 5.0])
        v = sgd_accumulate_step([theta], [[g]], cfg)
        after_first = theta.copy()
        sgd_accumulate_step([theta], [[g]], cfg, v)
        first_update = np.array([5.0, 5.0]) - after_first
        second_update = after_first - theta
        assert np.allclose(first_update, 0.1 * g, rtol=0, atol=1e-15)
        assert np.allclose(second_update, 0.1 * 1.9 * g, rtol=0, atol=1e-15)

    def test_zero_gradients_zero_decay_leave_params_unchanged(self):
        theta = np.array([1.5, -2.5, 0.0])
        cfg = SgdConfig(momentum=0.9, weight_decay=0.0, accumulation=2)
        sgd_accumulate_step([theta], [[np.zeros(3)], [np.zeros(3)]], cfg)
        assert np.array_equal(theta, [1.5, -2.5, 0.0])

    def test_weight_decay_contributes_two_wd_theta(self):
        theta = np.array([2.0, -4.0])
        cfg = SgdConfig(learning_rate=0.1, momentum=0.0, weight_decay=0.01,
                        accumulation=1)
        sgd_accumulate_step([theta], [[np.zeros(2)]], cfg)
        expected = np.array([2.0, -4.0]) * (1.0 - 0.1 * 2.0 * 0.01)
        assert np.allclose(theta, expected, rtol=0, atol=1e-15)

    def test_accumulate_then_step_equals_single_step_on_sum_bit_exact(self):
        rng = np.random.default_rng(0)
        shapes = [(4, 3), (3,)]
        theta_a = [rng.standard_normal(s) for s in shapes]
        theta_b = [p.copy() for p in theta_a]
        batches = [[rng.standard_normal(s) for s in shapes] for _ in range(8)]
        summed = []
        for k, s in enumerate(shapes):
            acc = np.zeros(s)
            for batch in batches:
                acc += batch[k]
            summed.append(acc)
        sgd_accumulate_step(theta_a, batches,
                            SgdConfig(momentum=0.0, weight_decay=0.0, accumulation=8))
        sgd_accumulate_step(theta_b, [summed],
                            SgdConfig(momentum=0.0, weight_decay=0.0, accumulation=1))
        for a, b in zip(theta_a, theta_b):
            assert np.array_equal(a, b)

    def test_accumulation_one_equals_classic_momentum_sgd(self):
        rng = np.random.default_rng(1)
        theta = rng.standard_normal(5)
        ref = theta.copy()
        cfg = SgdConfig(learning_rate=0.05, momentum=0.8, weight_decay=0.001,
                        accumulation=1)
        v = None
        v_ref = np.zeros(5)
        for _ in range(5):
            g = rng.standard_normal(5)
            v = sgd_accumulate_step([theta], [[g]], cfg, v)
            g_total = g + 2.0 * 0.001 * ref
            v_ref = 0.8 * v_ref + g_total
            ref = ref - 0.05 * v_ref
            assert np.allclose(theta, ref, rtol=0, atol=1e-14)

    def test_wrong_batch_count_rejected(self):
        theta = np.zeros(2)
        cfg = SgdConfig(accumulation=3)
        with pytest.raises(ValueError):
            sgd_accumulate_step([theta], [[np.zeros(2)]] * 2, cfg)

    def test_shape_mismatch_rejected(self):
        theta = np.zeros(2)
        cfg = SgdConfig(accumulation=1)
        with pytest.raises(ValueError):
            sgd_accumulate_step([theta], [[np.zeros(3)]], cfg)

    def test_learning_rate_override(self):
        theta = np.array([1.0])
        cfg = SgdConfig(learning_rate=1e-3, momentum=0.0, weight_decay=0.0,
                        accumulation=1)
        sgd_accumulate_step([theta], [[np.array([2.0])]], cfg, learning_rate=0.5)
        assert np.allclose(theta, [1.0 - 0.5 * 2.0])


class TestAdamStep:
    def test_zero_gradient_zero_decay_leaves_params_unchanged(self):
        theta = np.array([0.3, -0.7])
        adam_step([theta], [np.zeros(2)], AdamConfig(weight_decay=0.0), t=1)
        assert np.array_equal(theta, [0.3, -0.7])

    def test_first_step_moves_by_learning_rate_times_sign(self):
        theta = np.array([1.0, -2.0, 0.5])
        g = np.array([0.8, -1.3, 2.2])
        cfg = AdamConfig(learning_rate=0.01, weight_decay=0.0)
        adam_step([theta], [g], cfg, t=1)
        delta = theta - np.array([1.0, -2.0, 0.5])
        assert np.allclose(delta, -0.01 * np.sign(g), rtol=1e-6)

    def test_matches_hand_stepped_recurrence_for_five_steps(self):
        cfg = AdamConfig(learning_rate=0.05, beta1=0.9, beta2=0.999, eps=1e-8,
                         weight_decay=0.01)
        rng = np.random.default_rng(7)
        theta = np.array([0.5, -1.2, 2.0])
        hand = [0.5, -1.2, 2.0]
        hand_m = [0.0, 0.0, 0.0]
        hand_v = [0.0, 0.0, 0.0]
        moments = None
        for t in range(1, 6):
            g = rng.standard_normal(3)
            moments = adam_step([theta], [g], cfg, t, moments)
            for j in range(3):
                ge = g[j] + cfg.weight_decay * hand[j]
                hand_m[j] = cfg.beta1 * hand_m[j] + (1.0 - cfg.beta1) * ge
                hand_v[j] = cfg.beta2 * hand_v[j] + (1.0 - cfg.beta2) * ge * ge
                m_hat = hand_m[j] / (1.0 - cfg.beta1 ** t)
                v_hat = hand_v[j] / (1.0 - cfg.beta2 ** t)
                hand[j] = hand[j] - cfg.learning_rate * m_hat / (math.sqrt(v_hat) + cfg.eps)
            assert np.allclose(theta, hand, rtol=0, atol=1e-12)

    def test_step_count_must_be_positive(self):
        with pytest.raises(ValueError):
            adam_step([np.zeros(1)], [np.zeros(1)], AdamConfig(), t=0)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            adam_step([np.zeros(2)], [np.zeros(3)], AdamConfig(), t=1)

    def test_learning_rate_override(self):
        theta = np.array([1.0])
        cfg = AdamConfig(learning_rate=1e-2, weight_decay=0.0)
        adam_step([theta], [np.array([1.0])], cfg, t=1, learning_rate=0.3)
        assert np.allclose(theta, [1.0 - 0.3], rtol=1e-6)


class TestPlateauScheduler:
    def test_drops_after_third_non_improving_epoch(self):
        sched = PlateauScheduler(1.0, factor=0.1, patience=3)
        losses = [1.0, 0.9, 0.91, 0.92, 0.93]
        rates = [sched.step(e, loss) for e, loss in enumerate(losses)]
        assert rates == [1.0, 1.0, 1.0, 1.0, pytest.approx(0.1)]

    def test_strictly_decreasing_losses_never_change_rate(self):
        sched = PlateauScheduler(0.5, factor=0.3, patience=2)
        for e, loss in enumerate([1.0, 0.9, 0.8, 0.7, 0.6]):
            assert sched.step(e, loss) == 0.5

    def test_counter_resets_after_reduction(self):
        sched = PlateauScheduler(1.0, factor=0.1, patience=2)
        losses = [1.0, 1.1, 1.2, 1.3, 1.4]
        rates = [sched.step(e, loss) for e, loss in enumerate(losses)]
        # reductions at the second and fourth non-improving epochs
        assert rates == [1.0, 1.0, pytest.approx(0.1), pytest.approx(0.1),
                         pytest.approx(0.01)]

    def test_equal_loss_counts_as_non_improvement(self):
        sched = PlateauScheduler(1.0, factor=0.5, patience=1)
        sched.step(0, 1.0)
        assert sched.step(1, 1.0) == pytest.approx(0.5)

    def test_epoch_must_not_go_backwards(self):
        sched = PlateauScheduler(1.0)
        sched.step(3, 1.0)
        with pytest.raises(ValueError):
            sched.step(2, 0.9)

    def test_validation(self):
        with pytest.raises(ValueError):
            PlateauScheduler(0.0)
        with pytest.raises(ValueError):
            PlateauScheduler(1.0, factor=1.0)
        with pytest.raises(ValueError):
            PlateauScheduler(1.0, patience=-1)


class TestCosineScheduler:
    def test_endpoints_and_midpoint(self):
        sched = CosineScheduler(1.0, period=50, min_rate=0.2)
        assert sched.rate_at(0) == pytest.approx(1.0)
        assert sched.rate_at(25) == pytest.approx(0.6)
        assert sched.rate_at(50) == pytest.approx(0.2)

    def test_epoch_fifty_returns_min_rate_with_period_fifty(self):
        sched = CosineScheduler(1e-2, period=50)
        assert sched.step(50, None) == pytest.approx(0.0, abs=1e-18)

    def test_anneals_back_up_past_one_period(self):
        # epoch 60 sits on the rising half of the 2*period cycle; a formula
        # that wrapped at the period would place it on the falling half
        sched = CosineScheduler(1.0, period=50, min_rate=0.0)
        expected = (1.0 + math.cos(math.pi * 60 / 50)) / 2.0
        assert sched.rate_at(60) == pytest.approx(expected)
        assert sched.rate_at(60) < 0.5
        assert sched.rate_at(100) == pytest.approx(1.0)

    def test_epoch_must_not_go_backwards(self):
        sched = CosineScheduler(1.0, period=10)
        sched.step(5, None)
        with pytest.raises(ValueError):
            sched.step(4, None)

    def test_validation(self):
        with pytest.raises(ValueError):
            CosineScheduler(0.0, period=10)
        with pytest.raises(ValueError):
            CosineScheduler(1.0, period=0)
        with pytest.raises(ValueError):
            CosineScheduler(1.0, period=10, min_rate=2.0)

    def test_scheduler_step_delegates(self):
        cos = CosineScheduler(1.0, period=2)
        assert scheduler_step(cos, 2) == pytest.approx(0.0, abs=1e-18)
        plat = PlateauScheduler(1.0, factor=0.1, patience=1)
        scheduler_step(plat, 0, 1.0)
        assert scheduler_step(plat, 1, 2.0) == pytest.approx(0.1)


class TestEarlyStop:
    def test_always_improving_never_stops(self):
        stop = EarlyStop(patience=5)
        for loss in np.linspace(1.0, 0.1, 30):
            assert stop.update(float(loss)) is False
        assert stop.stopped is False

    def test_stops_after_patience_non_improving_epochs(self):
        stop = EarlyStop(patience=2)
        assert stop.update(1.0) is False
        assert stop.update(1.1) is False
        assert stop.update(1.2) is True
        assert stop.stopped is True

    def test_equal_loss_counts_as_non_improvement(self):
        stop = EarlyStop(patience=1)
        stop.update(1.0)
        assert stop.update(1.0) is True

    def test_once_stopped_stays_stopped(self):
        stop = EarlyStop(patience=1)
        stop.update(1.0)
        stop.update(1.5)
        assert stop.update(0.1) is True

    def test_patience_validation(self):
        with pytest.raises(ValueError):
            EarlyStop(patience=0)

    def test_functional_form(self):
        stop = EarlyStop(patience=1)
        assert early_stop_update(stop, 1.0) is False
        assert early_stop_update(stop, 1.0) is True


class TestGradCheck:
    def test_generator_fixture_passes_tight_tolerance(self):
        gen, phi, _, _, loss_fn, analytic_fn = make_generator_fixture()

        def grad_fn():
            analytic_fn()
            return [g for _, _, g in gen.parameters()]

        params = [p for _, p, _ in gen.parameters()]
        result = grad_check(loss_fn, grad_fn, params, tolerance=1e-6)
        assert result.passed
        assert result.max_rel_error < 1e-6

    def test_toy_classifier_cross_entropy_passes(self):
        cls = ToyClassifier(input_dim=5, feature_dim=7, class_count=4, seed=3)
        rng = np.random.default_rng(4)
        window = rng.uniform(-1.0, 1.0, 5)
        label = 2
        result = grad_check(
            lambda: cross_entropy(cls.logits(window), label),
            lambda: cls.grads_for(window, label),
            cls.parameters(),
            tolerance=1e-6,
        )
        assert result.passed
        assert result.max_rel_error < 1e-6

    def test_corrupted_gradient_is_caught(self):
        cls = ToyClassifier(input_dim=5, feature_dim=7, class_count=4, seed=3)
        rng = np.random.default_rng(4)
        window = rng.uniform(-1.0, 1.0, 5)
        label = 2

        def corrupted_grads():
            grads = cls.grads_for(window, label)
            flat = grads[0].reshape(-1)
            worst = np.argmax(np.abs(flat))
            flat[worst] *= 1.01
            return grads

        result = grad_check(
            lambda: cross_entropy(cls.logits(window), label),
            corrupted_grads,
            cls.parameters(),
            tolerance=1e-6,
        )
        assert not result.passed
        assert result.max_rel_error > 1e-3

    def test_non_finite_loss_raises(self):
        theta = np.array([1.0])
        with pytest.raises(ValueError):
            grad_check(lambda: float("inf"), lambda: [np.zeros(1)], [theta])

    def test_misaligned_gradients_rejected(self):
        theta = np.array([1.0, 2.0])
        with pytest.raises(ValueError):
            grad_check(lambda: 0.0, lambda: [np.zeros(3)], [theta])


class TestTrainHistory:
    def test_round_trips_through_json(self, tmp_path):
        hist = TrainHistory(train_losses=[1.0, 0.5], val_losses=[1.1, 0.6],
                            learning_rates={"generator": [1e-2, 5e-3]},
                            stopped_early=True)
        path = tmp_path / "history.json"
        hist.save(path)
        loaded = json.loads(path.read_text())
        assert loaded == {
            "train_loss": [1.0, 0.5],
            "val_loss": [1.1, 0.6],
            "learning_rates": {"generator": [1e-2, 5e-3]},
            "stopped_early": True,
        }


def make_specgen_fixture(seed=1, count=64):
    """Teacher-student pairs: fixed targets a same-shaped network can reach."""
    rng = np.random.default_rng(seed)
    params = GeneratorParams.micro()
    teacher = SpectrogramGenerator(params, seed=seed + 100)
    student = SpectrogramGenerator(params, seed=seed)
    data = []
    for _ in range(count):
        phi = rng.uniform(-1.0, 1.0, params.input_dim)
        data.append((phi, teacher.forward(phi)))
    return student, data


class TestTrainSpecgen:
    def test_empty_dataset_rejected(self):
        gen = SpectrogramGenerator(GeneratorParams.micro(), seed=0)
        with pytest.raises(ValueError):
            train_specgen([], gen)

    def test_two_hundred_iterations_halve_the_training_loss(self):
        student, data = make_specgen_fixture(seed=1)
        hist = train_specgen(data, student, epochs=200, batch_size=64, seed=1)
        assert len(hist.train_losses) == 200
        assert hist.train_losses[-1] <= 0.5 * hist.train_losses[0]

    def test_zero_learning_rate_keeps_history_constant(self):
        params = dataclasses.replace(GeneratorParams.micro(), dropout=0.0)
        gen = SpectrogramGenerator(params, seed=2)
        rng = np.random.default_rng(3)
        data = [(rng.uniform(-1, 1, 8), (rng.uniform(-1, 1, (9, 4)),
                                         rng.uniform(-1, 1, (9, 4))))
                for _ in range(4)]
        hist = train_specgen(data, gen, adam=AdamConfig(learning_rate=0.0),
                             epochs=5, seed=0)
        assert np.allclose(hist.train_losses, hist.train_losses[0], rtol=0,
                           atol=1e-12)
        assert np.allclose(hist.val_losses, hist.val_losses[0], rtol=0,
                           atol=1e-12)

    def test_best_validation_weights_are_restored(self):
        student, data = make_specgen_fixture(seed=4, count=16)
        rng = np.random.default_rng(5)
        teacher = SpectrogramGenerator(GeneratorParams.micro(), seed=104)
        val = []
        for _ in range(8):
            phi = rng.uniform(-1.0, 1.0, 8)
            val.append((phi, teacher.forward(phi)))
        hist = train_specgen(data, student, epochs=15, batch_size=8,
                             val_dataset=val, seed=4,
                             adam=AdamConfig(learning_rate=0.05))
        final_val = np.mean([
            complex_loss_with_grad(s_true, student.forward(phi), LossWeights())[0]
            for phi, s_true in val
        ])
        assert final_val == pytest.approx(min(hist.val_losses), rel=1e-12)

    def test_early_stopping_truncates_history_and_sets_flag(self):
        # one pair and a frozen learning rate make every epoch loss identical
        # bit for bit, so "equal counts as non-improvement" is exercised
        params = dataclasses.replace(GeneratorParams.micro(), dropout=0.0)
        gen = SpectrogramGenerator(params, seed=6)
        rng = np.random.default_rng(7)
        data = [(rng.uniform(-1, 1, 8), (rng.uniform(-1, 1, (9, 4)),
                                         rng.uniform(-1, 1, (9, 4))))]
        hist = train_specgen(data, gen, adam=AdamConfig(learning_rate=0.0),
                             early_stop=EarlyStop(patience=2), epochs=50, seed=0)
        assert hist.stopped_early is True
        assert len(hist.train_losses) == 3

    def test_scheduler_rates_are_recorded_per_epoch(self):
        student, data = make_specgen_fixture(seed=8, count=8)
        sched = CosineScheduler(1e-2, period=4)
        hist = train_specgen(data, student, scheduler=sched, epochs=5,
                             batch_size=8, seed=8)
        expected = [CosineScheduler(1e-2, period=4).rate_at(e) for e in range(5)]
        assert np.allclose(hist.learning_rates["generator"], expected)

    def test_history_file_is_written(self, tmp_path):
        student, data = make_specgen_fixture(seed=9, count=4)
        path = tmp_path / "run.json"
        hist = train_specgen(data, student, epochs=2, batch_size=4, seed=9,
                             history_path=path)
        loaded = json.loads(path.read_text())
        assert loaded["train_loss"] == pytest.approx(hist.train_losses)
        assert loaded["stopped_early"] is False
        assert set(loaded) == {"train_loss", "val_loss", "learning_rates",
                               "stopped_early"}


def make_combined_fixture(seed=0, per_class=4):
    """Separable 3-class windows with per-class reachable target spectrograms."""
    rng = np.random.default_rng(seed)
    cls = ToyClassifier(input_dim=3, feature_dim=8, class_count=3, seed=seed)
    gen = SpectrogramGenerator(GeneratorParams.micro(), seed=seed + 50)
    teacher = SpectrogramGenerator(GeneratorParams.micro(), seed=seed + 99)
    centers = 2.0 * np.eye(3)
    targets = [teacher.forward(rng.uniform(-1.0, 1.0, 8)) for _ in range(3)]
    data = []
    for label in range(3):
        for _ in range(per_class):
            window = centers[label] + 0.1 * rng.standard_normal(3)
            data.append((window, label, targets[label]))
    return cls, gen, data


class TestTrainCombined:
    def test_empty_dataset_rejected(self):
        cls, gen, _ = make_combined_fixture()
        with pytest.raises(ValueError):
            train_combined([], cls, gen)

    def test_combined_loss_decreases_over_one_hundred_steps(self):
        cls, gen, data = make_combined_fixture(seed=0)
        # 12 samples / batch 4 = 3 batches per epoch; 34 epochs = 102 steps
        hist = train_combined(data, cls, gen, epochs=34, batch_size=4, seed=0)
        assert hist.train_losses[-1] < hist.train_losses[0]

    def test_zero_spec_weight_leaves_generator_untouched(self):
        cls, gen, data = make_combined_fixture(seed=1)
        before = [p.copy() for _, p, _ in gen.parameters()]
        cls_before = [p.copy() for p in cls.parameters()]
        hist = train_combined(
            data, cls, gen,
            weights=LossWeights(lambda_spec=0.0),
            sgd=SgdConfig(accumulation=2),
            adam=AdamConfig(weight_decay=0.0),
            epochs=2, batch_size=4, seed=1,
        )
        for (_, p, _), snap in zip(gen.parameters(), before):
            assert np.array_equal(p, snap)
        assert any(not np.array_equal(p, snap)
                   for p, snap in zip(cls.parameters(), cls_before))
        assert len(hist.train_losses) == 2

    def test_joint_gradient_through_generator_matches_finite_differences(self):
        cls = ToyClassifier(input_dim=3, feature_dim=8, class_count=2, seed=0)
        gen = SpectrogramGenerator(GeneratorParams.micro(), seed=50)
        rng = np.random.default_rng(0)
        window = rng.uniform(-1.0, 1.0, 3)
        label = 1
        s_true = (rng.uniform(-0.8, 0.8, (9, 4)), rng.uniform(-0.8, 0.8, (9, 4)))
        weights = LossWeights(lambda_spec=10.0, lambda_sc=0.5, lambda_mse=0.25)

        def loss_fn():
            pooled = cls.pool(window)
            phi = cls.w1 @ pooled + cls.b1
            logits = cls.w2 @ phi + cls.b2
            total, _ = combined_loss(logits, label, s_true, gen.forward(phi),
                                     weights)
            return total

        def grad_fn():
            pooled = cls.pool(window)
            phi = cls.w1 @ pooled + cls.b1
            logits = cls.w2 @ phi + cls.b2
            planes = gen.forward(phi)
            _, _, _, g_r, g_i = combined_loss_with_grad(logits, label, s_true,
                                                        planes, weights)
            g_phi = gen.backward(g_r, g_i)
            return cls.grads_for(window, label, g_phi=g_phi)

        result = grad_check(loss_fn, grad_fn, cls.parameters(), tolerance=1e-6)
        assert result.passed
        assert result.max_rel_error < 1e-6

    def test_classifier_steps_only_when_accumulation_fills(self):
        # 12 samples / batch 4 = 3 batches per epoch; with accumulation 8 the
        # window only fills during a third epoch (it carries across epochs)
        cls, gen, data = make_combined_fixture(seed=2, per_class=4)
        before = [p.copy() for p in cls.parameters()]
        train_combined(data, cls, gen, sgd=SgdConfig(accumulation=8),
                       epochs=2, batch_size=4, seed=2)
        assert all(np.array_equal(p, snap)
                   for p, snap in zip(cls.parameters(), before))

        cls2, gen2, data2 = make_combined_fixture(seed=2, per_class=4)
        before2 = [p.copy() for p in cls2.parameters()]
        train_combined(data2, cls2, gen2, sgd=SgdConfig(accumulation=8),
                       epochs=3, batch_size=4, seed=2)
        assert any(not np.array_equal(p, snap)
                   for p, snap in zip(cls2.parameters(), before2))

    def test_default_schedules_are_cosine_and_plateau(self):
        cls, gen, data = make_combined_fixture(seed=3)
        hist = train_combined(data, cls, gen, epochs=3, batch_size=4, seed=3)
        cosine = CosineScheduler(AdamConfig().learning_rate, period=50)
        assert np.allclose(hist.learning_rates["generator"],
                           [cosine.rate_at(e) for e in range(3)])
        assert hist.learning_rates["classifier"] == [SgdConfig().learning_rate] * 3

    def test_history_records_both_networks(self, tmp_path):
        cls, gen, data = make_combined_fixture(seed=4)
        path = tmp_path / "combined.json"
        hist = train_combined(data, cls, gen, epochs=2, batch_size=4, seed=4,
                              history_path=path)
        loaded = json.loads(path.read_text())
        assert set(loaded["learning_rates"]) == {"classifier", "generator"}
        assert len(loaded["train_loss"]) == len(hist.train_losses) == 2
