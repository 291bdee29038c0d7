"""Quality metrics for synthesized audio, gloss transcripts, and classifiers.

Audio: signal-to-noise ratio, mean squared error, short-time objective
intelligibility (STOI), and mel cepstral distortion.  Transcripts: word and
character error rates via Levenshtein distance, and BLEU.  Classification:
top-k accuracy and macro-averaged F1.  Everything is a deterministic pure
function of its inputs.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .core import AudioBuffer
from .dsp import StftConfig, hann_window, mel_cepstra

SNR_CAP_DB = 120.0

STOI_SR = 10000
STOI_FRAME = 256
STOI_HOP = 128
STOI_NFFT = 512
STOI_NUM_BANDS = 15
STOI_FIRST_CF = 150.0
STOI_SEGMENT = 30
STOI_DYN_RANGE_DB = 40.0
STOI_MIN_SECONDS = 0.386

_EPS = 1e-12


def _samples_of(x) -> np.ndarray:
    if isinstance(x, AudioBuffer):
        return np.asarray(x.samples, dtype=np.float64)
    return np.asarray(x, dtype=np.float64)


def snr(reference, test) -> float:
    """10*log10(signal energy / residual energy) in dB, capped at +120.

    Inputs may be AudioBuffer or bare sample arrays of equal length; the
    reference must carry some energy.  A zero residual returns the cap.
    """
    ref = _samples_of(reference)
    tst = _samples_of(test)
    if ref.shape != tst.shape:
        raise ValueError(f"length mismatch: {ref.shape} vs {tst.shape}")
    signal_energy = float(np.sum(ref * ref))
    if signal_energy == 0.0:
        raise ValueError("reference signal is all zeros")
    residual = ref - tst
    residual_energy = float(np.sum(residual * residual))
    if residual_energy == 0.0:
        return SNR_CAP_DB
    return min(10.0 * math.log10(signal_energy / residual_energy), SNR_CAP_DB)


def mse_metric(a, b) -> float:
    """Mean of squared differences between two equally shaped arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def _resample_linear(x: np.ndarray, sr_in: int, sr_out: int) -> np.ndarray:
    if sr_in == sr_out:
        return x.astype(np.float64)
    n_out = int(round(len(x) * sr_out / sr_in))
    positions = np.arange(n_out) * (sr_in / sr_out)
    return np.interp(positions, np.arange(len(x)), x)


def _stoi_frames(x: np.ndarray, window: np.ndarray) -> np.ndarray:
    count = 1 + (len(x) - STOI_FRAME) // STOI_HOP
    frames = np.empty((count, STOI_FRAME), dtype=np.float64)
    for k in range(count):
        frames[k] = x[k * STOI_HOP : k * STOI_HOP + STOI_FRAME] * window
    return frames


def _third_octave_bands() -> np.ndarray:
    """Boolean matrix (bands, bins): which FFT bins feed each band."""
    bin_freqs = np.arange(STOI_NFFT // 2 + 1) * (STOI_SR / STOI_NFFT)
    bands = np.zeros((STOI_NUM_BANDS, bin_freqs.size), dtype=bool)
    for j in range(STOI_NUM_BANDS):
        cf = STOI_FIRST_CF * 2.0 ** (j / 3.0)
        lo, hi = cf / 2.0 ** (1.0 / 6.0), cf * 2.0 ** (1.0 / 6.0)
        bands[j] = (bin_freqs >= lo) & (bin_freqs < hi)
    return bands


def stoi(reference: AudioBuffer, test: AudioBuffer) -> float:
    """Short-time objective intelligibility, clamped to [0, 1].

    Both signals are linearly resampled to 10 kHz and truncated to a common
    length.  Frames where the reference sits more than 40 dB below its peak
    energy are dropped from both signals.  The remaining frames are grouped
    into 15 one-third-octave bands starting at 150 Hz, and for every 30-frame
    (384 ms) sliding segment the test band envelope is scale-normalized,
    clipped, and correlated with the reference envelope; the mean correlation
    over bands and segments is the score.
    """
    if reference.sample_rate != test.sample_rate:
        raise ValueError(
            f"sample rates differ: {reference.sample_rate} vs {test.sample_rate}"
        )
    if reference.duration < STOI_MIN_SECONDS or test.duration < STOI_MIN_SECONDS:
        raise ValueError(f"audio shorter than {STOI_MIN_SECONDS * 1000:.0f} ms")

    x = _resample_linear(_samples_of(reference), reference.sample_rate, STOI_SR)
    y = _resample_linear(_samples_of(test), test.sample_rate, STOI_SR)
    n = min(len(x), len(y))
    x, y = x[:n], y[:n]

    window = hann_window(STOI_FRAME)
    x_frames = _stoi_frames(x, window)
    y_frames = _stoi_frames(y, window)

    energy_db = 20.0 * np.log10(np.linalg.norm(x_frames, axis=1) + _EPS)
    keep = energy_db > np.max(energy_db) - STOI_DYN_RANGE_DB
    x_frames = x_frames[keep]
    y_frames = y_frames[keep]
    if x_frames.shape[0] < STOI_SEGMENT:
        raise ValueError(
            f"fewer than {STOI_SEGMENT} active frames after silence removal"
        )

    x_spec = np.fft.rfft(x_frames, n=STOI_NFFT, axis=1)
    y_spec = np.fft.rfft(y_frames, n=STOI_NFFT, axis=1)
    bands = _third_octave_bands()
    # band envelope: sqrt of summed power per band, shape (bands, frames)
    x_band = np.sqrt(bands @ (np.abs(x_spec.T) ** 2))
    y_band = np.sqrt(bands @ (np.abs(y_spec.T) ** 2))

    clip_factor = 1.0 + 10.0 ** (15.0 / 20.0)
    total = 0.0
    count = 0
    frames = x_band.shape[1]
    for m in range(STOI_SEGMENT, frames + 1):
        x_seg = x_band[:, m - STOI_SEGMENT : m]
        y_seg = y_band[:, m - STOI_SEGMENT : m]
        alpha = np.linalg.norm(x_seg, axis=1) / (np.linalg.norm(y_seg, axis=1) + _EPS)
        y_norm = np.minimum(y_seg * alpha[:, None], clip_factor * x_seg)
        xd = x_seg - x_seg.mean(axis=1, keepdims=True)
        yd = y_norm - y_norm.mean(axis=1, keepdims=True)
        denom = np.linalg.norm(xd, axis=1) * np.linalg.norm(yd, axis=1) + _EPS
        total += float(np.sum(np.sum(xd * yd, axis=1) / denom))
        count += STOI_NUM_BANDS
    return float(np.clip(total / count, 0.0, 1.0))


def mcd(reference: AudioBuffer, test: AudioBuffer,
        cfg: StftConfig = StftConfig()) -> float:
    """Mel cepstral distortion in dB, averaged over aligned frames.

    Per frame: (10 / ln 10) * sqrt(2 * sum of squared cepstrum differences)
    over coefficients 1..13; the two cepstrum sequences are truncated to the
    shorter one.
    """
    if reference.sample_rate != test.sample_rate:
        raise ValueError(
            f"sample rates differ: {reference.sample_rate} vs {test.sample_rate}"
        )
    c_ref = mel_cepstra(reference, cfg)
    c_tst = mel_cepstra(test, cfg)
    frames = min(c_ref.shape[0], c_tst.shape[0])
    diff = c_ref[:frames] - c_tst[:frames]
    per_frame = (10.0 / math.log(10.0)) * np.sqrt(2.0 * np.sum(diff ** 2, axis=1))
    return float(np.mean(per_frame))


@dataclass
class TranscriptPair:
    """A reference gloss sequence and the hypothesis to score against it."""

    reference: list = field(default_factory=list)
    hypothesis: list = field(default_factory=list)

    def __post_init__(self):
        self.reference = list(self.reference)
        self.hypothesis = list(self.hypothesis)
        for side, tokens in (("reference", self.reference),
                             ("hypothesis", self.hypothesis)):
            for tok in tokens:
                if not isinstance(tok, str) or not tok:
                    raise ValueError(f"{side} tokens must be nonempty strings")


def levenshtein(a, b) -> int:
    """Unit-cost edit distance between two sequences, O(min(len)) memory."""
    a, b = list(a), list(b)
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, item_a in enumerate(a, start=1):
        current = [i] + [0] * len(b)
        for j, item_b in enumerate(b, start=1):
            current[j] = min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (item_a != item_b),
            )
        previous = current
    return previous[-1]


def wer(pair: TranscriptPair) -> float:
    """Token-level edit distance divided by the reference length."""
    if not pair.reference:
        raise ValueError("empty reference")
    return levenshtein(pair.reference, pair.hypothesis) / len(pair.reference)


def cer(pair: TranscriptPair) -> float:
    """Character-level edit distance over the space-joined transcripts."""
    if not pair.reference:
        raise ValueError("empty reference")
    ref = " ".join(pair.reference)
    hyp = " ".join(pair.hypothesis)
    return levenshtein(ref, hyp) / len(ref)


def _ngram_counts(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(pair: TranscriptPair) -> float:
    """Geometric mean of clipped n-gram precisions with a brevity penalty.

    Orders run from 1 up to min(4, hypothesis length) with uniform weights;
    an empty hypothesis scores 0 by convention.
    """
    if not pair.reference:
        raise ValueError("empty reference")
    hyp = pair.hypothesis
    ref = pair.reference
    if not hyp:
        return 0.0
    max_n = min(4, len(hyp))
    log_sum = 0.0
    for n in range(1, max_n + 1):
        hyp_counts = _ngram_counts(hyp, n)
        ref_counts = _ngram_counts(ref, n)
        clipped = sum(min(count, ref_counts[gram])
                      for gram, count in hyp_counts.items())
        total = len(hyp) - n + 1
        if clipped == 0:
            return 0.0
        log_sum += math.log(clipped / total)
    geometric = math.exp(log_sum / max_n)
    brevity = 1.0 if len(hyp) >= len(ref) else math.exp(1.0 - len(ref) / len(hyp))
    return brevity * geometric


def topk_accuracy(confidences, labels, k: int) -> float:
    """Fraction of samples whose label ranks in the k highest confidences.

    Equal confidences rank by lower index first.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    confidences = list(confidences)
    labels = list(labels)
    if len(confidences) != len(labels):
        raise ValueError("confidences and labels differ in length")
    if not confidences:
        raise ValueError("empty input")
    hits = 0
    for conf, label in zip(confidences, labels):
        conf = np.asarray(conf)
        if not 0 <= int(label) < conf.shape[0]:
            raise ValueError(f"label {label} out of range for {conf.shape[0]} classes")
        order = np.argsort(-conf, kind="stable")
        if int(label) in order[:k]:
            hits += 1
    return hits / len(labels)


def f1_macro(predictions, labels, class_count: int) -> float:
    """Average per-class F1 over all class_count classes.

    A class that never occurs as a prediction or a label contributes 0,
    as do classes with zero precision+recall.
    """
    preds = np.asarray(list(predictions), dtype=np.int64)
    labs = np.asarray(list(labels), dtype=np.int64)
    if preds.shape != labs.shape:
        raise ValueError("predictions and labels differ in length")
    if preds.size == 0:
        raise ValueError("empty input")
    if class_count < 1:
        raise ValueError("class_count must be >= 1")
    for arr, what in ((preds, "prediction"), (labs, "label")):
        if np.any(arr < 0) or np.any(arr >= class_count):
            raise ValueError(f"{what} out of range for {class_count} classes")
    total = 0.0
    for c in range(class_count):
        tp = int(np.sum((preds == c) & (labs == c)))
        fp = int(np.sum((preds == c) & (labs != c)))
        fn = int(np.sum((preds != c) & (labs == c)))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        if precision + recall:
            total += 2.0 * precision * recall / (precision + recall)
    return total / class_count
