"""
From a feature vector to a waveform
====================================

The generator maps one visual feature vector straight to a complex
spectrogram (a real plane and an imaginary plane), and the inverse
transform renders that as audio.  No text, no phoneme stage: one vector
in, one short waveform out.  This script runs the small demonstration
geometry and writes the result as a WAV file.
"""

import os

import numpy as np

from signaudio.core import wav_write
from signaudio.dsp import istft
from signaudio.specgen import GeneratorParams, SpectrogramGenerator, generate_spectrogram

out_dir = "demo_output"
os.makedirs(out_dir, exist_ok=True)
rng = np.random.default_rng(7)

# 1. Build the network.  The toy geometry takes a 32-dimensional feature
# and emits 33 x 10 planes; the same code path scales to the full
# 2048 -> 1025 x 100 configuration, just slower.

params = GeneratorParams.toy()
gen = SpectrogramGenerator(params, seed=1)
print(f"generator: {params.input_dim}-dim feature -> "
      f"{params.output[0]} bins x {params.output[1]} frames")

stack = [f"linear {params.input_dim}->{params.mlp_dims[0]}"]
stack += [f"linear {a}->{b}" for a, b in zip(params.mlp_dims, params.mlp_dims[1:])]
stack.append(f"reshape {params.reshape}")
stack += [f"deconv ch={d.channels} k={d.kernel} s={d.stride}" for d in params.deconv]
print("stack:", " | ".join(stack))

# 2. One feature vector, one spectrogram.  Inference mode is
# deterministic: the same weights and feature always give the same planes.

phi = rng.uniform(-1.0, 1.0, params.input_dim)
spec = generate_spectrogram(gen, phi, sample_rate=22050)
again = generate_spectrogram(gen, phi, sample_rate=22050)
print(f"\nspectrogram planes: {spec.real.shape}, "
      f"deterministic: {np.array_equal(spec.real, again.real)}")
print(f"transform geometry from the plane height: n_fft={spec.n_fft}, "
      f"hop={spec.hop}")

# 3. Render.  Output length is fixed by the geometry alone:
# (frames - 1) * hop + n_fft samples, independent of the feature values.

audio = istft(spec)
expected = (spec.num_frames - 1) * spec.hop + spec.n_fft
print(f"\naudio: {len(audio.samples)} samples "
      f"({audio.duration * 1000:.1f} ms), expected {expected}")

peak = float(np.max(np.abs(audio.samples)))
normalized = audio
if peak > 1.0:
    normalized.samples = audio.samples / peak
path = os.path.join(out_dir, "generated_sign.wav")
wav_write(normalized, path)
print(f"wrote {path}")

# 4. Different features give different audio; nearby features give
# similar audio.  An untrained network already shows the mapping is
# smooth, which is what gradient training leans on.

phi_far = rng.uniform(-1.0, 1.0, params.input_dim)
phi_near = phi + 0.01 * rng.standard_normal(params.input_dim)
wave = lambda p: istft(generate_spectrogram(gen, p)).samples.astype(np.float64)
base = wave(phi)
print(f"\nrms distance to a nearby feature's audio : "
      f"{np.sqrt(np.mean((base - wave(phi_near)) ** 2)):.6f}")
print(f"rms distance to an unrelated feature's audio: "
      f"{np.sqrt(np.mean((base - wave(phi_far)) ** 2)):.6f}")
