"""Temporal non-maximal suppression over a frame stream.

A sliding window of w frames advances one frame at a time; at selected
window positions a feature extractor scores the window, and a detection is
emitted only when the locally best-scoring window has been left behind by
more than w - o positions.  This keeps exactly one detection per burst of
overlapping high-confidence windows, which is what turns a continuous sign
stream into a sequence of isolated gesture hits.

The update rules are deliberately asymmetric and are preserved exactly:

- the first full window (position t = 1) is always scored and becomes the
  running best when max(C) >= theta (non-strict);
- later positions are scored only when (t - 1) mod h == 0, and become a
  fresh best only on strict max(C) > theta;
- once t - t_best > w - o the stored best is emitted; the current window
  starts a new best run if it clears theta strictly, otherwise the best is
  cleared;
- while a best is held, a later window replaces it only on strictly larger
  max(C), so ties keep the earlier window.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class NmsParams:
    """window_size w, hop h (in window positions), overlap o (frames), threshold theta."""

    window_size: int = 50
    hop: int = 3
    overlap: int = 25
    threshold: float = 0.7

    def __post_init__(self):
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")
        if self.hop < 1:
            raise ValueError("hop must be >= 1")
        if not 0 <= self.overlap < self.window_size:
            raise ValueError("overlap must satisfy 0 <= overlap < window_size")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be in [0, 1]")


@dataclass
class Detection:
    """One emitted sign: the best window of a suppressed burst."""

    emitted_at: int  # window position t at which the best was recorded
    feature: np.ndarray
    confidence: np.ndarray
    predicted_class: int = field(init=False)

    def __post_init__(self):
        self.predicted_class = int(np.argmax(self.confidence))

    @property
    def max_confidence(self) -> float:
        return float(np.max(self.confidence))


class NmsState:
    """Incremental detector state: one instance per stream, push frames, flush at end."""

    def __init__(self, params: NmsParams):
        self.params = params
        self.window = deque(maxlen=params.window_size)
        self.t = 0
        self.t_best = None
        self.phi_best = None
        self.c_best = None
        self.extract_calls = 0

    def _take_best(self) -> Detection:
        det = Detection(self.t_best, self.phi_best, self.c_best)
        self._clear_best()
        return det

    def _clear_best(self):
        self.t_best = None
        self.phi_best = None
        self.c_best = None

    def _set_best(self, t, phi, conf):
        self.t_best = t
        self.phi_best = phi
        self.c_best = conf

    def push(self, frame, source) -> Detection | None:
        """Advance by one frame; returns a Detection when one is emitted."""
        p = self.params
        self.window.append(frame)
        if len(self.window) < p.window_size:
            return None
        self.t += 1
        t = self.t

        if t == 1:
            phi, conf = source.extract(list(self.window), t)
            self.extract_calls += 1
            if float(np.max(conf)) >= p.threshold:
                self._set_best(t, phi, conf)
            return None

        if (t - 1) % p.hop != 0:
            return None

        phi, conf = source.extract(list(self.window), t)
        self.extract_calls += 1
        peak = float(np.max(conf))

        if self.t_best is None:
            if peak > p.threshold:
                self._set_best(t, phi, conf)
            return None

        if t - self.t_best > p.window_size - p.overlap:
            emitted = self._take_best()
            if peak > p.threshold:
                self._set_best(t, phi, conf)
            return emitted

        if peak > float(np.max(self.c_best)):
            self._set_best(t, phi, conf)
        return None

    def flush(self) -> Detection | None:
        """End of stream: hand back a still-pending best, then reset completely.

        The suppression loop alone never returns its final best (nothing
        arrives after it to push it out), so finite streams need this.
        """
        pending = self._take_best() if self.t_best is not None else None
        self.window.clear()
        self.t = 0
        self.extract_calls = 0
        return pending


def run_nms(frames, source, params: NmsParams) -> list[Detection]:
    """Feed a whole frame sequence through the detector, flush included."""
    state = NmsState(params)
    out = []
    for frame in frames:
        det = state.push(frame, source)
        if det is not None:
            out.append(det)
    tail = state.flush()
    if tail is not None:
        out.append(tail)
    return out


class _PositionSource:
    """Serves a 1-element confidence vector per window position (for simulation)."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=np.float64)

    def extract(self, window, window_index: int):
        peak = self.values[window_index - 1]
        return np.zeros(1, dtype=np.float32), np.array([peak], dtype=np.float64)


def simulate_positions(max_confidences, params: NmsParams) -> list[int]:
    """Run the detector over a synthetic stream defined by per-position peaks.

    ``max_confidences[i]`` is the max confidence the extractor would report
    at window position i + 1.  Returns the emitted positions (flush
    included), which is all the suppression logic depends on.
    """
    values = list(max_confidences)
    frame_count = params.window_size - 1 + len(values)
    dets = run_nms(range(frame_count), _PositionSource(values), params)
    return [d.emitted_at for d in dets]
