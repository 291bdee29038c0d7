"""
Training the spectrogram generator
===================================

The generator learns by gradient descent on a composite spectrogram loss:
scaled L1 distance on the real and imaginary planes plus a spectral
convergence term on the magnitudes.  All gradients are computed by the
package's own backward passes (no autograd framework anywhere), which is
why the training loop can be audited with finite differences.

The task here is teacher-student: a frozen copy of the same architecture
with different weights labels random features, so a perfect fit exists
and the loss curve has somewhere to go.
"""

import numpy as np

from signaudio.specgen import GeneratorParams, LossWeights, SpectrogramGenerator, complex_spectrogram_loss
from signaudio.train import AdamConfig, CosineScheduler, EarlyStop, train_specgen

rng = np.random.default_rng(1)

# 1. Dataset: 64 (feature, target planes) pairs from a frozen teacher.

params = GeneratorParams.micro()
teacher = SpectrogramGenerator(params, seed=101)
student = SpectrogramGenerator(params, seed=1)
data = []
for _ in range(64):
    phi = rng.uniform(-1.0, 1.0, params.input_dim)
    data.append((phi, teacher.forward(phi)))
print(f"dataset: {len(data)} pairs, planes {params.output[0]}x{params.output[1]}")

# 2. The loss on one pair before any training.

total, terms = complex_spectrogram_loss(data[0][1], student.forward(data[0][0]))
print(f"untrained loss on pair 0: {total:.4f}  "
      f"(l1_real {terms['l1_real']:.3f}, l1_imag {terms['l1_imag']:.3f}, "
      f"sc_real {terms['sc_real']:.3f}, sc_imag {terms['sc_imag']:.3f})")

# 3. Train with Adam under a cosine-annealed learning rate, holding out
# the last 16 pairs for validation and stopping early if the validation
# loss stalls for 25 epochs.

history = train_specgen(
    data[:48], student,
    weights=LossWeights(lambda_sc=0.5, lambda_mse=0.0),
    adam=AdamConfig(learning_rate=0.01),
    scheduler=CosineScheduler(base_rate=0.01, period=200, min_rate=0.001),
    early_stop=EarlyStop(patience=25),
    epochs=200, batch_size=16, val_dataset=data[48:], seed=1,
)

print(f"\nepochs run: {len(history.train_losses)} "
      f"(stopped early: {history.stopped_early})")
print("epoch  train-loss  val-loss  learning-rate")
marks = [0, 1, 4, 9, 24, 49, 99, len(history.train_losses) - 1]
for e in sorted(set(m for m in marks if 0 <= m < len(history.train_losses))):
    print(f"{e + 1:5d}  {history.train_losses[e]:10.4f}  "
          f"{history.val_losses[e]:8.4f}  "
          f"{history.learning_rates['generator'][e]:.5f}")

ratio = history.train_losses[-1] / history.train_losses[0]
print(f"\nfinal/initial training loss: {ratio:.3f}")

# 4. The weights kept at the end are the ones with the best validation
# loss, not whatever the last epoch produced.

val_now = np.mean([complex_spectrogram_loss(target, student.forward(phi),
                                            LossWeights(lambda_sc=0.5, lambda_mse=0.0))[0]
                   for phi, target in data[48:]])
print(f"validation loss of the restored weights: {val_now:.4f} "
      f"(best seen during training: {min(history.val_losses):.4f})")
