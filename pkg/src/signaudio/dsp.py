"""Short-time Fourier analysis and synthesis, plus mel cepstra.

The synthesis direction is the one doing real work here: spectrograms
predicted by the generator are turned into audio by a windowed overlap-add
inverse transform with squared-window normalization.  The forward transform
exists mainly so the inverse can be tested as a round trip, and as the front
end of the cepstral distance metric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .core import AudioBuffer, ComplexSpectrogram


@dataclass(frozen=True)
class StftConfig:
    """Analysis/synthesis geometry: transform size and frame hop.

    The window is a periodic Hann of length n_fft; there is no center
    padding, so frame k covers samples [k*hop, k*hop + n_fft).
    """

    n_fft: int = 2048
    hop: int = 512

    def __post_init__(self):
        if self.n_fft < 2 or self.n_fft & (self.n_fft - 1):
            raise ValueError(f"n_fft must be a power of two, got {self.n_fft}")
        if not 0 < self.hop <= self.n_fft:
            raise ValueError(f"hop must be in (0, n_fft], got {self.hop}")

    @property
    def num_bins(self) -> int:
        return self.n_fft // 2 + 1


def hann_window(n_fft: int) -> np.ndarray:
    """Periodic Hann: w[i] = 0.5 - 0.5*cos(2*pi*i / n_fft)."""
    i = np.arange(n_fft)
    return (0.5 - 0.5 * np.cos(2.0 * np.pi * i / n_fft)).astype(np.float64)


def num_frames(signal_length: int, cfg: StftConfig) -> int:
    if signal_length < cfg.n_fft:
        raise ValueError(
            f"signal length {signal_length} shorter than one frame ({cfg.n_fft})"
        )
    return 1 + (signal_length - cfg.n_fft) // cfg.hop


def stft(signal: AudioBuffer, cfg: StftConfig = StftConfig()) -> ComplexSpectrogram:
    """One-sided short-time Fourier transform, Hann analysis window, no padding."""
    x = np.asarray(signal.samples, dtype=np.float64)
    tau = num_frames(len(x), cfg)
    window = hann_window(cfg.n_fft)
    frames = np.empty((tau, cfg.n_fft), dtype=np.float64)
    for k in range(tau):
        frames[k] = x[k * cfg.hop : k * cfg.hop + cfg.n_fft] * window
    spec = np.fft.rfft(frames, axis=1).T  # bins x frames
    return ComplexSpectrogram(
        spec.real.astype(np.float32),
        spec.imag.astype(np.float32),
        sample_rate=signal.sample_rate,
        n_fft=cfg.n_fft,
        hop=cfg.hop,
    )


def istft(spec: ComplexSpectrogram, cfg: StftConfig | None = None) -> AudioBuffer:
    """Weighted overlap-add inverse transform.

    Each frame's one-sided spectrum is inverted with an inverse real FFT,
    multiplied by the Hann synthesis window, and accumulated at hop
    offsets; the sum is divided by the accumulated squared window so that
    istft(stft(x)) == x wherever that envelope is nonzero.  Output length
    is exactly (num_frames - 1)*hop + n_fft.
    """
    if cfg is None:
        cfg = StftConfig(n_fft=spec.n_fft, hop=spec.hop)
    if spec.num_bins != cfg.n_fft // 2 + 1:
        raise ValueError(
            f"spectrogram has {spec.num_bins} bins, inconsistent with n_fft "
            f"{cfg.n_fft} (expected {cfg.n_fft // 2 + 1})"
        )
    tau = spec.num_frames
    window = hann_window(cfg.n_fft)
    complex_frames = (spec.real.astype(np.float64) + 1j * spec.imag.astype(np.float64)).T
    time_frames = np.fft.irfft(complex_frames, n=cfg.n_fft, axis=1)
    out_len = (tau - 1) * cfg.hop + cfg.n_fft
    acc = np.zeros(out_len, dtype=np.float64)
    envelope = np.zeros(out_len, dtype=np.float64)
    w_sq = window * window
    for k in range(tau):
        start = k * cfg.hop
        acc[start : start + cfg.n_fft] += time_frames[k] * window
        envelope[start : start + cfg.n_fft] += w_sq
    safe = envelope > 1e-11
    out = np.zeros(out_len, dtype=np.float64)
    out[safe] = acc[safe] / envelope[safe]
    return AudioBuffer(out.astype(np.float32), spec.sample_rate)


HZ_PER_MEL_BREAK = 700.0
MEL_SCALE = 2595.0
LOG_FLOOR = 1e-10


def hz_to_mel(f):
    return MEL_SCALE * np.log10(1.0 + np.asarray(f, dtype=np.float64) / HZ_PER_MEL_BREAK)


def mel_to_hz(m):
    return HZ_PER_MEL_BREAK * (10.0 ** (np.asarray(m, dtype=np.float64) / MEL_SCALE) - 1.0)


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular filters on the mel scale, shape (n_mels, n_fft//2 + 1).

    Band edges are n_mels + 2 points equally spaced in mel between 0 Hz and
    the Nyquist frequency; each filter rises linearly from its left edge to
    its center and falls to its right edge, evaluated at the FFT bin
    frequencies.
    """
    nyquist = sample_rate / 2.0
    mel_points = np.linspace(hz_to_mel(0.0), hz_to_mel(nyquist), n_mels + 2)
    hz_points = mel_to_hz(mel_points)
    bin_freqs = np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)
    bank = np.zeros((n_mels, n_fft // 2 + 1), dtype=np.float64)
    for m in range(n_mels):
        left, center, right = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        rising = (bin_freqs - left) / max(center - left, 1e-12)
        falling = (right - bin_freqs) / max(right - center, 1e-12)
        bank[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def mel_cepstra(
    audio: AudioBuffer,
    cfg: StftConfig = StftConfig(),
    n_mels: int = 40,
    n_coeffs: int = 13,
) -> np.ndarray:
    """Mel-frequency cepstra, shape (frames, n_coeffs), 0th coefficient excluded.

    Pipeline: power spectrogram -> mel filterbank -> log (floored) ->
    orthonormal DCT-II -> keep coefficients 1..n_coeffs.
    """
    spec = stft(audio, cfg)
    power = spec.real.astype(np.float64) ** 2 + spec.imag.astype(np.float64) ** 2
    bank = mel_filterbank(n_mels, cfg.n_fft, audio.sample_rate)
    mel_energy = bank @ power  # n_mels x frames
    log_mel = np.log(np.maximum(mel_energy, LOG_FLOOR))
    ceps = scipy.fft.dct(log_mel, type=2, norm="ortho", axis=0)
    return ceps[1 : n_coeffs + 1].T.copy()
