"""
Scoring audio and label sequences
==================================

The metric suite answers two questions: how close is the synthesized
audio to a reference (SNR, MSE, STOI, MCD), and how close is the detected
gloss sequence to the intended one (WER, CER, BLEU, top-k accuracy).
This script degrades a speech-like signal step by step and watches each
audio metric react, then walks the sequence metrics on small examples.
"""

import numpy as np

from signaudio.core import AudioBuffer
from signaudio.metrics import (
    TranscriptPair,
    bleu,
    cer,
    mcd,
    mse_metric,
    snr,
    stoi,
    topk_accuracy,
    wer,
)

rng = np.random.default_rng(0)

# 1. A speech-like reference: a few amplitude-modulated harmonics.  Pure
# tones would leave most of the octave bands empty, which starves STOI.

sample_rate = 22050
t = np.arange(int(1.5 * sample_rate)) / sample_rate
x = np.zeros_like(t)
for f0, amp in [(120, 1.0), (240, 0.8), (480, 0.6), (960, 0.5),
                (1900, 0.4), (3100, 0.3)]:
    envelope = 0.5 + 0.5 * np.sin(2 * np.pi * rng.uniform(1.5, 5.0) * t)
    x += amp * envelope * np.sin(2 * np.pi * f0 * t)
x = (0.3 * x / np.max(np.abs(x))).astype(np.float32)
reference = AudioBuffer(x, sample_rate)

# 2. Add more and more noise and score every step.

print("noise level      SNR dB      MSE        STOI     MCD")
for level in [0.0, 0.001, 0.01, 0.05, 0.2]:
    noisy = AudioBuffer(x + level * rng.standard_normal(len(x)).astype(np.float32),
                        sample_rate)
    print(f"{level:11.3f}  {snr(reference, noisy):9.2f}  "
          f"{mse_metric(x, noisy.samples):.2e}  "
          f"{stoi(reference, noisy):7.3f}  {mcd(reference, noisy):6.2f}")
print("identical audio hits the 120 dB SNR cap; every metric worsens "
      "monotonically with the noise")

# 3. Sequence metrics.  WER counts word edits against reference length,
# CER does the same per character, BLEU rewards matching n-grams.

cases = [
    ("open the front door", "open the front door"),
    ("open the front door", "open the back door"),
    ("open the front door", "door open"),
]
print("\nreference             hypothesis            WER    CER    BLEU")
for ref_text, hyp_text in cases:
    pair = TranscriptPair(ref_text.split(), hyp_text.split())
    print(f"{ref_text:20s}  {hyp_text:20s}  "
          f"{wer(pair):.3f}  {cer(pair):.3f}  {bleu(pair):.3f}")

# 4. Top-k accuracy over confidence rows: the correct class counts as a
# hit if it is among the k highest confidences, so accuracy can only grow
# with k.

confidences = rng.uniform(0.0, 1.0, (200, 10))
labels = rng.integers(0, 10, 200)
for row, label in zip(confidences[::4], labels[::4]):
    row[label] += 0.4  # make some rows confidently correct
print("\nk:        " + "  ".join(f"{k:5d}" for k in (1, 2, 3, 5, 10)))
print("top-k:    " + "  ".join(f"{topk_accuracy(confidences, labels, k):5.3f}"
                               for k in (1, 2, 3, 5, 10)))
