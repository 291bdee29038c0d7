"""Optimizers, schedulers, early stopping, and the two training loops.

The classifier head trains with gradient-accumulated momentum SGD under a
reduce-on-plateau schedule; the spectrogram generator trains with
bias-corrected Adam under cosine annealing.  Every state transition here is
a deterministic function of (state, inputs) in a fixed summation order, so
replaying a run with the same seed reproduces the weights bit for bit.
A finite-difference gradient audit (`grad_check`) ships alongside because
the backward passes in this package are written by hand.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .specgen import LossWeights, combined_loss, combined_loss_with_grad, \
    complex_loss_with_grad


@dataclass(frozen=True)
class SgdConfig:
    """Momentum SGD with summed-gradient accumulation and L2 regularization."""

    learning_rate: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 1e-8
    accumulation: int = 8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.accumulation < 1:
            raise ValueError("accumulation must be >= 1")


@dataclass(frozen=True)
class AdamConfig:
    """Adam settings; a zero learning rate is allowed and freezes the weights."""

    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-8

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ValueError("betas must be in [0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")


def _check_aligned(params, grads, what="gradient"):
    if len(grads) != len(params):
        raise ValueError(f"{what} count {len(grads)} != parameter count {len(params)}")
    for p, g in zip(params, grads):
        if np.shape(g) != p.shape:
            raise ValueError(f"{what} shape {np.shape(g)} != parameter shape {p.shape}")


def sgd_accumulate_step(params, grad_batches, cfg: SgdConfig, velocity=None,
                        learning_rate=None):
    """One accumulated update: theta <- theta - eta * v, v <- m*v + g_total.

    grad_batches must hold exactly cfg.accumulation gradient sets, each a
    list aligned with params; they are summed in order, the L2 term
    2*wd*theta is added, and the total folds into the momentum buffer.
    Parameters are updated in place; the velocity buffers are returned so
    the caller can thread them through consecutive steps.
    """
    if len(grad_batches) != cfg.accumulation:
        raise ValueError(
            f"got {len(grad_batches)} gradient sets, accumulation is {cfg.accumulation}"
        )
    for batch in grad_batches:
        _check_aligned(params, batch)
    if velocity is None:
        velocity = [np.zeros_like(p) for p in params]
    _check_aligned(params, velocity, what="velocity")
    eta = cfg.learning_rate if learning_rate is None else float(learning_rate)
    for k, p in enumerate(params):
        g_total = np.zeros_like(p)
        for batch in grad_batches:
            g_total += batch[k]
        g_total += 2.0 * cfg.weight_decay * p
        velocity[k] = cfg.momentum * velocity[k] + g_total
        p -= eta * velocity[k]
    return velocity


def adam_step(params, grads, cfg: AdamConfig, t: int, moments=None,
              learning_rate=None):
    """Bias-corrected Adam update with the L2 term added to the gradient.

    t is the 1-based step count used for bias correction; moments is the
    (first, second) buffer pair returned by the previous call.  Parameters
    are updated in place.
    """
    if t < 1:
        raise ValueError(f"step count must be >= 1, got {t}")
    _check_aligned(params, grads)
    if moments is None:
        moments = ([np.zeros_like(p) for p in params],
                   [np.zeros_like(p) for p in params])
    m, v = moments
    eta = cfg.learning_rate if learning_rate is None else float(learning_rate)
    for k, p in enumerate(params):
        g = grads[k] + cfg.weight_decay * p
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g
        m_hat = m[k] / (1.0 - cfg.beta1 ** t)
        v_hat = v[k] / (1.0 - cfg.beta2 ** t)
        p -= eta * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return moments


class PlateauScheduler:
    """Multiply the rate by `factor` after `patience` consecutive epochs
    without strict improvement, then restart the count.

    The best-so-far loss is kept across reductions, so a stretch of equal
    losses keeps shrinking the rate.
    """

    def __init__(self, base_rate: float, factor: float = 0.1, patience: int = 3):
        if base_rate <= 0:
            raise ValueError("base_rate must be positive")
        if not 0.0 < factor < 1.0:
            raise ValueError("factor must be in (0, 1)")
        if patience < 0:
            raise ValueError("patience must be >= 0")
        self.rate = float(base_rate)
        self.factor = float(factor)
        self.patience = int(patience)
        self.best = math.inf
        self.bad_epochs = 0
        self._last_epoch = -math.inf

    def step(self, epoch: int, validation_loss: float) -> float:
        if epoch < self._last_epoch:
            raise ValueError(f"epoch went backwards: {epoch} after {self._last_epoch}")
        self._last_epoch = epoch
        if validation_loss < self.best:
            self.best = float(validation_loss)
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.rate *= self.factor
                self.bad_epochs = 0
        return self.rate


class CosineScheduler:
    """Cosine annealing: min + (base - min) * (1 + cos(pi * epoch / period)) / 2.

    The rate is a pure function of the epoch number, gliding from the base
    rate at epoch 0 down to the minimum at epoch `period` (and back up over
    the following `period` epochs, cosine being periodic over 2*period).
    """

    def __init__(self, base_rate: float, period: int, min_rate: float = 0.0):
        if base_rate <= 0:
            raise ValueError("base_rate must be positive")
        if period < 1:
            raise ValueError("period must be >= 1")
        if not 0.0 <= min_rate <= base_rate:
            raise ValueError("min_rate must be in [0, base_rate]")
        self.base_rate = float(base_rate)
        self.period = int(period)
        self.min_rate = float(min_rate)
        self.rate = self.rate_at(0)
        self._last_epoch = -math.inf

    def rate_at(self, epoch: int) -> float:
        span = self.base_rate - self.min_rate
        return self.min_rate + span * (1.0 + math.cos(math.pi * epoch / self.period)) / 2.0

    def step(self, epoch: int, validation_loss: float = None) -> float:
        if epoch < self._last_epoch:
            raise ValueError(f"epoch went backwards: {epoch} after {self._last_epoch}")
        self._last_epoch = epoch
        self.rate = self.rate_at(epoch)
        return self.rate


def scheduler_step(state, epoch: int, validation_loss: float = None) -> float:
    """Advance a scheduler by one epoch and return the new learning rate."""
    return state.step(epoch, validation_loss)


@dataclass
class EarlyStop:
    """Stop after `patience` consecutive epochs without strict improvement.

    A loss equal to the best so far counts as no improvement.
    """

    patience: int = 5
    best: float = math.inf
    epochs_without_improvement: int = 0
    stopped: bool = False

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("patience must be >= 1")

    def update(self, validation_loss: float) -> bool:
        """Record one validation loss; returns True when training should stop."""
        if self.stopped:
            return True
        if validation_loss < self.best:
            self.best = float(validation_loss)
            self.epochs_without_improvement = 0
        else:
            self.epochs_without_improvement += 1
            if self.epochs_without_improvement >= self.patience:
                self.stopped = True
        return self.stopped


def early_stop_update(state: EarlyStop, validation_loss: float) -> bool:
    """Functional form of EarlyStop.update: True means stop."""
    return state.update(validation_loss)


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_error: float
    passed: bool


def grad_check(loss_fn, grad_fn, params, tolerance: float = 1e-6,
               step: float = 1e-5) -> GradCheckResult:
    """Audit analytic gradients against central finite differences.

    loss_fn() recomputes the scalar loss at the current parameter values;
    grad_fn() runs forward/backward and returns gradient arrays aligned
    with `params`.  Each parameter coordinate is perturbed in place by
    +/- step and the relative error
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-12) is taken;
    the result carries the worst coordinate and whether it beat tolerance.
    """
    base = float(loss_fn())
    if not math.isfinite(base):
        raise ValueError(f"loss is not finite: {base}")
    grads = [np.array(g, dtype=np.float64, copy=True) for g in grad_fn()]
    _check_aligned(params, grads)
    worst = 0.0
    for p, g in zip(params, grads):
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for idx in range(flat_p.size):
            keep = flat_p[idx]
            flat_p[idx] = keep + step
            up = float(loss_fn())
            flat_p[idx] = keep - step
            down = float(loss_fn())
            flat_p[idx] = keep
            if not (math.isfinite(up) and math.isfinite(down)):
                raise ValueError("loss is not finite under perturbation")
            numeric = (up - down) / (2.0 * step)
            rel = abs(numeric - flat_g[idx]) / max(abs(numeric), abs(flat_g[idx]), 1e-12)
            worst = max(worst, rel)
    return GradCheckResult(max_rel_error=worst, passed=worst < tolerance)


@dataclass
class TrainHistory:
    """Per-epoch record of a training run, serializable to JSON."""

    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    learning_rates: dict = field(default_factory=dict)
    stopped_early: bool = False

    def to_dict(self):
        return {
            "train_loss": [float(x) for x in self.train_losses],
            "val_loss": [float(x) for x in self.val_losses],
            "learning_rates": {k: [float(x) for x in v]
                               for k, v in self.learning_rates.items()},
            "stopped_early": self.stopped_early,
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def _spectrogram_loss_mean(generator, data, weights):
    """Mean composite loss over (feature, target) pairs, dropout off."""
    total = 0.0
    for phi, s_true in data:
        planes = generator.forward(phi, train_mode=False)
        loss, _, _, _ = complex_loss_with_grad(s_true, planes, weights)
        total += loss
    return total / len(data)


def train_specgen(dataset, generator, weights: LossWeights = LossWeights(),
                  adam: AdamConfig = AdamConfig(), scheduler=None,
                  early_stop: EarlyStop = None, *, epochs: int = 100,
                  batch_size: int = 64, val_dataset=None, seed: int = 0,
                  history_path=None) -> TrainHistory:
    """Fit the generator to (feature, target-spectrogram) pairs with Adam.

    Each epoch shuffles the pairs, averages the composite-loss gradients
    over batches of `batch_size`, and takes one Adam step per batch.  The
    recorded training loss is the per-sample mean the optimizer saw
    (dropout active); validation runs with dropout off over val_dataset
    when given, else the training loss doubles as the monitored value.
    The weights from the best validation epoch are restored at the end.
    """
    data = list(dataset)
    if not data:
        raise ValueError("empty dataset")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    val_data = list(val_dataset) if val_dataset is not None else None

    order_rng = np.random.default_rng([seed, 1])
    mask_rng = np.random.default_rng([seed, 2])
    triples = generator.parameters()
    params = [p for _, p, _ in triples]
    grad_bufs = [g for _, _, g in triples]
    moments = None
    adam_steps = 0
    rate = scheduler.rate if scheduler is not None else adam.learning_rate

    history = TrainHistory(learning_rates={"generator": []})
    best_val = math.inf
    best_weights = None

    for epoch in range(epochs):
        order = order_rng.permutation(len(data))
        loss_sum = 0.0
        for start in range(0, len(data), batch_size):
            batch = order[start:start + batch_size]
            generator.zero_grads()
            for k in batch:
                phi, s_true = data[k]
                drop_seed = int(mask_rng.integers(1 << 62))
                planes = generator.forward(phi, train_mode=True, seed=drop_seed)
                loss, _, g_r, g_i = complex_loss_with_grad(s_true, planes, weights)
                generator.backward(g_r, g_i)
                loss_sum += loss
            scale = 1.0 / len(batch)
            grads = [g * scale for g in grad_bufs]
            adam_steps += 1
            moments = adam_step(params, grads, adam, adam_steps, moments,
                                learning_rate=rate)
        train_loss = loss_sum / len(data)
        val_loss = (_spectrogram_loss_mean(generator, val_data, weights)
                    if val_data is not None else train_loss)

        history.train_losses.append(train_loss)
        history.val_losses.append(val_loss)
        history.learning_rates["generator"].append(rate)

        if val_loss < best_val:
            best_val = val_loss
            best_weights = [p.copy() for p in params]
        if early_stop is not None and early_stop.update(val_loss):
            history.stopped_early = True
            break
        if scheduler is not None:
            rate = scheduler.step(epoch + 1, val_loss)

    if best_weights is not None:
        for p, w in zip(params, best_weights):
            p[...] = w
    if history_path is not None:
        history.save(history_path)
    return history


def _combined_loss_mean(classifier, generator, data, weights):
    """Mean combined loss over (window, label, target) triples, dropout off."""
    total = 0.0
    for window, label, s_true in data:
        pooled = classifier.pool(window)
        phi = classifier.w1 @ pooled + classifier.b1
        logits = classifier.w2 @ phi + classifier.b2
        planes = generator.forward(phi, train_mode=False)
        loss, _ = combined_loss(logits, label, s_true, planes, weights)
        total += loss
    return total / len(data)


def train_combined(dataset, classifier, generator,
                   weights: LossWeights = LossWeights(),
                   sgd: SgdConfig = SgdConfig(), adam: AdamConfig = AdamConfig(),
                   classifier_scheduler=None, generator_scheduler=None,
                   early_stop: EarlyStop = None, *, epochs: int = 100,
                   batch_size: int = 4, val_dataset=None, seed: int = 0,
                   history_path=None) -> TrainHistory:
    """Jointly fit the classifier head and the generator on one objective.

    Each (window, label, target) sample contributes cross-entropy plus
    lambda_spec times the spectrogram loss.  Spectrogram gradients flow
    back through the generator into the feature vector and on into the
    classifier, whose averaged batch gradients accumulate across
    `sgd.accumulation` batches before one momentum-SGD step (the
    accumulation window carries across epoch boundaries).  The generator
    takes one Adam step per batch.  By default the classifier rate follows
    a reduce-on-plateau schedule and the generator rate a cosine cycle of
    50 epochs; both observe the same validation values, as does early
    stopping.  Best-validation weights for both networks are restored at
    the end.
    """
    data = list(dataset)
    if not data:
        raise ValueError("empty dataset")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    val_data = list(val_dataset) if val_dataset is not None else None
    if classifier_scheduler is None:
        classifier_scheduler = PlateauScheduler(sgd.learning_rate,
                                                factor=0.1, patience=3)
    if generator_scheduler is None:
        generator_scheduler = CosineScheduler(adam.learning_rate, period=50)

    order_rng = np.random.default_rng([seed, 1])
    mask_rng = np.random.default_rng([seed, 2])

    cls_params = classifier.parameters()
    gen_triples = generator.parameters()
    gen_params = [p for _, p, _ in gen_triples]
    gen_grad_bufs = [g for _, _, g in gen_triples]

    velocity = None
    moments = None
    adam_steps = 0
    pending_batches = []
    cls_rate = classifier_scheduler.rate
    gen_rate = generator_scheduler.rate

    history = TrainHistory(learning_rates={"classifier": [], "generator": []})
    best_val = math.inf
    best_cls = None
    best_gen = None

    for epoch in range(epochs):
        order = order_rng.permutation(len(data))
        loss_sum = 0.0
        for start in range(0, len(data), batch_size):
            batch = order[start:start + batch_size]
            generator.zero_grads()
            cls_batch = [np.zeros_like(p) for p in cls_params]
            for k in batch:
                window, label, s_true = data[k]
                pooled = classifier.pool(window)
                phi = classifier.w1 @ pooled + classifier.b1
                logits = classifier.w2 @ phi + classifier.b2
                drop_seed = int(mask_rng.integers(1 << 62))
                planes = generator.forward(phi, train_mode=True, seed=drop_seed)
                loss, _, _, g_r, g_i = combined_loss_with_grad(
                    logits, label, s_true, planes, weights)
                g_phi = generator.backward(g_r, g_i)
                for buf, g in zip(cls_batch, classifier.grads_for(window, label,
                                                                  g_phi=g_phi)):
                    buf += g
                loss_sum += loss
            scale = 1.0 / len(batch)
            pending_batches.append([g * scale for g in cls_batch])
            if len(pending_batches) == sgd.accumulation:
                velocity = sgd_accumulate_step(cls_params, pending_batches, sgd,
                                               velocity, learning_rate=cls_rate)
                pending_batches = []
            gen_grads = [g * scale for g in gen_grad_bufs]
            adam_steps += 1
            moments = adam_step(gen_params, gen_grads, adam, adam_steps, moments,
                                learning_rate=gen_rate)
        train_loss = loss_sum / len(data)
        val_loss = (_combined_loss_mean(classifier, generator, val_data, weights)
                    if val_data is not None else train_loss)

        history.train_losses.append(train_loss)
        history.val_losses.append(val_loss)
        history.learning_rates["classifier"].append(cls_rate)
        history.learning_rates["generator"].append(gen_rate)

        if val_loss < best_val:
            best_val = val_loss
            best_cls = [p.copy() for p in cls_params]
            best_gen = [p.copy() for p in gen_params]
        if early_stop is not None and early_stop.update(val_loss):
            history.stopped_early = True
            break
        cls_rate = classifier_scheduler.step(epoch + 1, val_loss)
        gen_rate = generator_scheduler.step(epoch + 1, val_loss)

    if best_cls is not None:
        for p, w in zip(cls_params, best_cls):
            p[...] = w
        for p, w in zip(gen_params, best_gen):
            p[...] = w
    if history_path is not None:
        history.save(history_path)
    return history
