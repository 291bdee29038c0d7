"""
Short-time analysis and overlap-add resynthesis
================================================

The synthesis side of the package turns complex spectrograms into audio
with a weighted overlap-add inverse transform.  This script shows the
forward/inverse pair reconstructing a signal, why the edges differ from
the interior, and what the accumulated window envelope looks like.
"""

import numpy as np

from signaudio.core import AudioBuffer
from signaudio.dsp import StftConfig, hann_window, istft, stft

rng = np.random.default_rng(0)

# 1. A one-second test signal: two tones plus a little noise.

sample_rate = 22050
t = np.arange(sample_rate) / sample_rate
x = (0.5 * np.sin(2 * np.pi * 220 * t)
     + 0.3 * np.sin(2 * np.pi * 1760 * t)
     + 0.01 * rng.standard_normal(sample_rate)).astype(np.float32)
audio = AudioBuffer(x, sample_rate)

cfg = StftConfig(n_fft=2048, hop=512)
spec = stft(audio, cfg)
print(f"signal: {len(x)} samples at {sample_rate} Hz")
print(f"spectrogram: {spec.num_bins} bins x {spec.num_frames} frames "
      f"(n_fft={cfg.n_fft}, hop={cfg.hop})")

# 2. Invert and compare.  The inverse covers (frames-1)*hop + n_fft
# samples; whatever the last partial frame did not cover is simply gone.

y = istft(spec, cfg).samples
usable = (spec.num_frames - 1) * cfg.hop + cfg.n_fft
print(f"reconstruction: {len(y)} samples ({len(x) - usable} tail samples "
      f"were never framed)")


def snr_db(reference, test):
    reference = reference.astype(np.float64)
    err = reference - test.astype(np.float64)
    return 10.0 * np.log10(np.sum(reference**2) / np.sum(err**2))


full = snr_db(x[:usable], y)
interior = snr_db(x[cfg.n_fft : usable - cfg.n_fft],
                  y[cfg.n_fft : usable - cfg.n_fft])
print(f"reconstruction SNR, full span : {full:7.2f} dB")
print(f"reconstruction SNR, interior  : {interior:7.2f} dB")

# 3. The interior is essentially exact while the edges are not, and the
# window envelope explains why.  Overlap-add divides by the sum of squared
# windows; in the middle that sum is constant, but the first and last
# n_fft samples have fewer overlapping frames.

w = hann_window(cfg.n_fft)
envelope = np.zeros(usable)
for k in range(spec.num_frames):
    envelope[k * cfg.hop : k * cfg.hop + cfg.n_fft] += w * w

probes = [0, cfg.hop, cfg.n_fft, usable // 2, usable - cfg.n_fft, usable - 1]
print("\nsquared-window envelope at a few sample offsets:")
for p in probes:
    print(f"  sample {p:6d}: {envelope[p]:.4f}")
print("a flat envelope across the interior is the overlap-add condition "
      "that makes the round trip exact there")

# 4. Hop size matters: with hop == n_fft (no overlap) the Hann window
# zeroes out the frame boundaries and reconstruction collapses.

coarse = StftConfig(n_fft=2048, hop=2048)
bad = istft(stft(audio, coarse), coarse).samples
span = min(len(bad), usable)
print(f"\nround trip at hop == n_fft: SNR {snr_db(x[:span], bad[:span]):.2f} dB "
      "(boundaries cannot be recovered)")
