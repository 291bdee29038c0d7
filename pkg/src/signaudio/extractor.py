"""Feature extraction sources: the contract phi, C = E(X) and its test backends.

A source maps a window of frames (plus its stream position) to a feature
vector phi and a confidence vector C.  The heavyweight video backbone that
produces these in production is deliberately out of scope; what matters
downstream is the contract, so this module ships three deterministic stand-ins
(Mock, Scripted, FileBacked) and one genuinely trainable toy classifier that
is small enough to gradient-check.
"""

from __future__ import annotations

import os

import numpy as np

from .core import tensor_read

FEATURE_DIM = 2048


def _mix64(x: int) -> int:
    """splitmix64 finalizer: avalanche a 64-bit integer."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


class MockSource:
    """Pseudo-random but fully reproducible features.

    (phi, C) depend only on (seed, window_index): the pair is hashed through
    a 64-bit mixer and the result seeds a PCG64 stream, so the same query
    always returns bit-identical arrays and different indices decorrelate.
    The window contents are ignored.
    """

    def __init__(self, seed: int, feature_dim: int = FEATURE_DIM, class_count: int = 100):
        self.seed = int(seed)
        self.feature_dim = feature_dim
        self.class_count = class_count

    def extract(self, window, window_index: int):
        key = _mix64(_mix64(self.seed) ^ (int(window_index) & 0xFFFFFFFFFFFFFFFF))
        rng = np.random.Generator(np.random.PCG64(key))
        phi = rng.uniform(-1.0, 1.0, self.feature_dim).astype(np.float32)
        conf = rng.uniform(0.0, 1.0, self.class_count).astype(np.float32)
        return phi, conf


class ScriptedSource:
    """Replays a fixed list of (phi, C) pairs in query order.

    Holds a cursor, so one instance serves exactly one stream; querying past
    the end raises.
    """

    def __init__(self, pairs):
        self.pairs = [(np.asarray(p, dtype=np.float32), np.asarray(c, dtype=np.float32))
                      for p, c in pairs]
        self.cursor = 0

    def extract(self, window, window_index: int):
        if self.cursor >= len(self.pairs):
            raise IndexError(
                f"scripted source exhausted after {len(self.pairs)} queries"
            )
        pair = self.pairs[self.cursor]
        self.cursor += 1
        return pair


class FileBackedSource:
    """Reads (phi, C) from '{dir}/win_%06d.phi.isvt' / '...conf.isvt' by window index."""

    def __init__(self, directory):
        self.directory = str(directory)

    def extract(self, window, window_index: int):
        phi_path = os.path.join(self.directory, f"win_{window_index:06d}.phi.isvt")
        conf_path = os.path.join(self.directory, f"win_{window_index:06d}.conf.isvt")
        if not os.path.exists(phi_path) or not os.path.exists(conf_path):
            raise FileNotFoundError(
                f"no stored extraction for window index {window_index} in {self.directory}"
            )
        return tensor_read(phi_path), tensor_read(conf_path)


class ToyClassifier:
    """Two-layer head over mean-pooled pixels: the smallest trainable extractor.

    forward: pool the window to a vector by averaging every axis except the
    last, then phi = W1 @ pooled + b1, logits = W2 @ phi + b2, and
    C = softmax(logits).  Logits stay accessible so cross-entropy training
    of the head can be exercised with real gradients.
    """

    def __init__(self, input_dim: int, feature_dim: int, class_count: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        s1 = 1.0 / np.sqrt(input_dim)
        s2 = 1.0 / np.sqrt(feature_dim)
        self.w1 = rng.uniform(-s1, s1, (feature_dim, input_dim)).astype(np.float64)
        self.b1 = np.zeros(feature_dim, dtype=np.float64)
        self.w2 = rng.uniform(-s2, s2, (class_count, feature_dim)).astype(np.float64)
        self.b2 = np.zeros(class_count, dtype=np.float64)
        self.input_dim = input_dim
        self.feature_dim = feature_dim
        self.class_count = class_count

    def pool(self, window) -> np.ndarray:
        """Average the window over every axis except the last (channel-ish) one."""
        arr = np.asarray(window, dtype=np.float64)
        if arr.ndim == 1:
            pooled = arr
        else:
            pooled = arr.reshape(-1, arr.shape[-1]).mean(axis=0)
        if pooled.shape[0] != self.input_dim:
            raise ValueError(
                f"pooled input has dim {pooled.shape[0]}, classifier expects {self.input_dim}"
            )
        return pooled

    def logits(self, window) -> np.ndarray:
        pooled = self.pool(window)
        phi = self.w1 @ pooled + self.b1
        return self.w2 @ phi + self.b2

    def extract(self, window, window_index: int):
        pooled = self.pool(window)
        phi = self.w1 @ pooled + self.b1
        logits = self.w2 @ phi + self.b2
        return phi.astype(np.float32), softmax(logits).astype(np.float32)

    def parameters(self):
        return [self.w1, self.b1, self.w2, self.b2]

    def grads_for(self, window, label: int, g_phi=None):
        """Cross-entropy gradient of all four parameter blocks for one example.

        g_phi, when given, is the gradient of an additional loss term that
        consumes the feature vector (e.g. a downstream network fed by phi);
        it is chained through phi = W1 @ pooled + b1 and added, so the result
        is the gradient of the full combined objective.
        """
        pooled = self.pool(window)
        phi = self.w1 @ pooled + self.b1
        logits = self.w2 @ phi + self.b2
        p = softmax(logits)
        d_logits = p.copy()
        d_logits[label] -= 1.0
        g_w2 = np.outer(d_logits, phi)
        g_b2 = d_logits
        d_phi = self.w2.T @ d_logits
        if g_phi is not None:
            d_phi = d_phi + np.asarray(g_phi, dtype=np.float64)
        g_w1 = np.outer(d_phi, pooled)
        g_b1 = d_phi
        return [g_w1, g_b1, g_w2, g_b2]


def extract(source, window, window_index: int):
    """phi, C = E(X): dispatch to the source's backend."""
    return source.extract(window, window_index)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - np.max(z)
    e = np.exp(z)
    return e / e.sum()


def cross_entropy(logits: np.ndarray, label: int) -> float:
    """-log softmax(logits)[label], computed via logsumexp for stability."""
    z = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < len(z):
        raise IndexError(f"label {label} out of range for {len(z)} classes")
    m = np.max(z)
    lse = m + np.log(np.sum(np.exp(z - m)))
    return float(lse - z[label])


def cross_entropy_grad(logits: np.ndarray, label: int) -> np.ndarray:
    """d loss / d logits = softmax(logits) - onehot(label)."""
    g = softmax(logits)
    g[label] -= 1.0
    return g
