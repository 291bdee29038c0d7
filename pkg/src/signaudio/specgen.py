"""Feature-to-spectrogram generator with hand-written forward and backward passes.

A pooled visual feature vector phi goes through a stack of
linear -> layer-norm -> leaky-ReLU -> dropout stages, is reshaped into a
small channels x height x width volume, and is upsampled by two parallel
transposed-convolution branches (block: transposed conv -> instance norm ->
ReLU -> dropout) into the real and imaginary planes of a complex
spectrogram.  Each branch ends in a shape-preserving 3x3 transposed conv to
one channel, and the result is center-cropped or zero-padded to the target
freq_bins x frames.

Every layer carries its own analytic backward pass and accumulates
parameter gradients across calls, so the whole network trains without any
autodiff framework and can be audited against finite differences.

This module also houses the spectrogram losses: mean-absolute-error terms
on the real plane, imaginary plane and reconstructed magnitude, spectral
convergence (relative Frobenius error) per plane, optional squared-error
terms, and the combination of all of that with classification
cross-entropy.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .core import ComplexSpectrogram, tensor_read, tensor_write
from .extractor import cross_entropy, cross_entropy_grad

NORM_EPS = 1e-5
# Smoothing constant under the magnitude square root.  It only has to keep
# sqrt differentiable at r = i = 0; it must be small enough not to disturb
# hand-computable loss values at the 1e-6 level (1e-18 shifts a magnitude
# of 1 by ~5e-19, and a zero magnitude to 1e-9).
MAG_SMOOTHING = 1e-18


class Linear:
    def __init__(self, d_in: int, d_out: int, rng):
        s = 1.0 / np.sqrt(d_in)
        self.w = rng.uniform(-s, s, (d_out, d_in))
        self.b = rng.uniform(-s, s, d_out)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._x = None

    def forward(self, x, train_mode=False, rng=None):
        self._x = x
        return self.w @ x + self.b

    def backward(self, g):
        self.gw += np.outer(g, self._x)
        self.gb += g
        return self.w.T @ g

    def param_items(self):
        return [("w", self.w, self.gw), ("b", self.b, self.gb)]


class LayerNorm:
    """Normalizes a vector to zero mean / unit variance, then rescales."""

    def __init__(self, dim: int):
        self.gain = np.ones(dim)
        self.offset = np.zeros(dim)
        self.ggain = np.zeros(dim)
        self.goffset = np.zeros(dim)
        self._xhat = None
        self._inv = None

    def forward(self, x, train_mode=False, rng=None):
        mu = x.mean()
        self._inv = 1.0 / np.sqrt(x.var() + NORM_EPS)
        self._xhat = (x - mu) * self._inv
        return self.gain * self._xhat + self.offset

    def backward(self, g):
        self.ggain += g * self._xhat
        self.goffset += g
        gxh = g * self.gain
        m1 = gxh.mean()
        m2 = (gxh * self._xhat).mean()
        return self._inv * (gxh - m1 - self._xhat * m2)

    def param_items(self):
        return [("gain", self.gain, self.ggain), ("offset", self.offset, self.goffset)]


class LeakyReLU:
    """slope * x for x <= 0 (the negative-side slope applies at exactly zero)."""

    def __init__(self, slope: float = 0.01):
        self.slope = slope
        self._pos = None

    def forward(self, x, train_mode=False, rng=None):
        self._pos = x > 0
        return np.where(self._pos, x, self.slope * x)

    def backward(self, g):
        return np.where(self._pos, g, self.slope * g)

    def param_items(self):
        return []


class Relu(LeakyReLU):
    def __init__(self):
        super().__init__(slope=0.0)


class Dropout:
    """Inverted dropout: active only in train mode, mask drawn from the shared rng."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        self.rate = rate
        self._mask = None

    def forward(self, x, train_mode=False, rng=None):
        if not train_mode or self.rate == 0.0:
            self._mask = None
            return x
        self._mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self._mask

    def backward(self, g):
        return g if self._mask is None else g * self._mask

    def param_items(self):
        return []


class ConvTranspose2d:
    """Transposed 2-D convolution on a single (channels, height, width) volume.

    Output size per axis is (in - 1)*stride - 2*padding + kernel.  The
    forward pass scatters each kernel tap onto the strided output grid;
    the backward pass gathers along the same routing.
    """

    def __init__(self, c_in, c_out, kernel, stride, padding, rng, bias=True):
        self.c_in, self.c_out = c_in, c_out
        self.kernel = tuple(kernel)
        self.stride = tuple(stride)
        self.padding = tuple(padding)
        kh, kw = self.kernel
        s = 1.0 / np.sqrt(c_in * kh * kw)
        self.w = rng.uniform(-s, s, (c_in, c_out, kh, kw))
        # a bias is pointless (and its gradient pure rounding noise) when an
        # instance norm follows, since per-channel constants are removed
        self.b = rng.uniform(-s, s, c_out) if bias else None
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b) if bias else None
        self._x = None

    def out_shape(self, h, w):
        kh, kw = self.kernel
        sh, sw = self.stride
        ph, pw = self.padding
        return (h - 1) * sh - 2 * ph + kh, (w - 1) * sw - 2 * pw + kw

    def _tap_slices(self, h, w, di, dj):
        sh, sw = self.stride
        return (slice(di, di + (h - 1) * sh + 1, sh),
                slice(dj, dj + (w - 1) * sw + 1, sw))

    def forward(self, x, train_mode=False, rng=None):
        if x.shape[0] != self.c_in:
            raise ValueError(f"expected {self.c_in} input channels, got {x.shape[0]}")
        self._x = x
        _, h, w = x.shape
        kh, kw = self.kernel
        sh, sw = self.stride
        ph, pw = self.padding
        full_h = (h - 1) * sh + kh
        full_w = (w - 1) * sw + kw
        full = np.zeros((self.c_out, full_h, full_w))
        for di in range(kh):
            for dj in range(kw):
                rows, cols = self._tap_slices(h, w, di, dj)
                full[:, rows, cols] += np.einsum("io,ihw->ohw", self.w[:, :, di, dj], x)
        out = full[:, ph : full_h - ph, pw : full_w - pw]
        if self.b is not None:
            out = out + self.b[:, None, None]
        return out

    def backward(self, g):
        x = self._x
        _, h, w = x.shape
        kh, kw = self.kernel
        sh, sw = self.stride
        ph, pw = self.padding
        full_h = (h - 1) * sh + kh
        full_w = (w - 1) * sw + kw
        g_full = np.zeros((self.c_out, full_h, full_w))
        g_full[:, ph : full_h - ph, pw : full_w - pw] = g
        if self.b is not None:
            self.gb += g.sum(axis=(1, 2))
        gx = np.zeros_like(x)
        for di in range(kh):
            for dj in range(kw):
                rows, cols = self._tap_slices(h, w, di, dj)
                sub = g_full[:, rows, cols]
                self.gw[:, :, di, dj] += np.einsum("ihw,ohw->io", x, sub)
                gx += np.einsum("io,ohw->ihw", self.w[:, :, di, dj], sub)
        return gx

    def param_items(self):
        items = [("w", self.w, self.gw)]
        if self.b is not None:
            items.append(("b", self.b, self.gb))
        return items


class InstanceNorm2d:
    """Per-channel normalization over the spatial axes of one volume."""

    def __init__(self, channels: int):
        self.gain = np.ones(channels)
        self.offset = np.zeros(channels)
        self.ggain = np.zeros(channels)
        self.goffset = np.zeros(channels)
        self._xhat = None
        self._inv = None

    def forward(self, x, train_mode=False, rng=None):
        mu = x.mean(axis=(1, 2), keepdims=True)
        self._inv = 1.0 / np.sqrt(x.var(axis=(1, 2), keepdims=True) + NORM_EPS)
        self._xhat = (x - mu) * self._inv
        return self.gain[:, None, None] * self._xhat + self.offset[:, None, None]

    def backward(self, g):
        self.ggain += (g * self._xhat).sum(axis=(1, 2))
        self.goffset += g.sum(axis=(1, 2))
        gxh = g * self.gain[:, None, None]
        m1 = gxh.mean(axis=(1, 2), keepdims=True)
        m2 = (gxh * self._xhat).mean(axis=(1, 2), keepdims=True)
        return self._inv * (gxh - m1 - self._xhat * m2)

    def param_items(self):
        return [("gain", self.gain, self.ggain), ("offset", self.offset, self.goffset)]


class CenterCropOrPad:
    """Fits a 2-D plane to a target size, cropping or zero-padding per axis."""

    def __init__(self, target):
        self.target = tuple(target)
        self._src = None
        self._dst = None
        self._in_shape = None

    @staticmethod
    def _axis_slices(cur, tgt):
        if cur >= tgt:
            lo = (cur - tgt) // 2
            return slice(lo, lo + tgt), slice(0, tgt)
        lo = (tgt - cur) // 2
        return slice(0, cur), slice(lo, lo + cur)

    def forward(self, x, train_mode=False, rng=None):
        self._in_shape = x.shape
        sh, dh = self._axis_slices(x.shape[0], self.target[0])
        sw, dw = self._axis_slices(x.shape[1], self.target[1])
        self._src, self._dst = (sh, sw), (dh, dw)
        out = np.zeros(self.target)
        out[self._dst] = x[self._src]
        return out

    def backward(self, g):
        gx = np.zeros(self._in_shape)
        gx[self._src] = g[self._dst]
        return gx

    def param_items(self):
        return []


@dataclass(frozen=True)
class DeconvSpec:
    """One upsampling block: output channels, kernel, stride, padding."""

    channels: int
    kernel: tuple
    stride: tuple
    padding: tuple = (0, 0)

    def to_dict(self):
        return {"channels": self.channels, "kernel": list(self.kernel),
                "stride": list(self.stride), "padding": list(self.padding)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["channels"], tuple(d["kernel"]), tuple(d["stride"]),
                   tuple(d["padding"]))


@dataclass(frozen=True)
class GeneratorParams:
    """Architecture description; the weights are held by SpectrogramGenerator."""

    input_dim: int
    mlp_dims: tuple
    reshape: tuple  # (channels, height, width)
    deconv: tuple  # of DeconvSpec
    output: tuple  # (freq_bins, frames)
    dropout: float = 0.1

    def __post_init__(self):
        if not self.mlp_dims:
            raise ValueError("mlp_dims must be nonempty")
        c, h, w = self.reshape
        if c * h * w != self.mlp_dims[-1]:
            raise ValueError(
                f"reshape {self.reshape} holds {c * h * w} values but the last "
                f"mlp stage emits {self.mlp_dims[-1]}"
            )
        if self.output[0] < 1 or self.output[1] < 1:
            raise ValueError("output dims must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    @classmethod
    def full_scale(cls):
        """Production geometry: 2048-dim features to 1025x100 planes."""
        return cls(
            input_dim=2048,
            mlp_dims=(648, 1296, 2592, 5184),
            reshape=(64, 9, 9),
            deconv=(
                DeconvSpec(32, (7, 5), (5, 3), (1, 1)),
                DeconvSpec(16, (7, 5), (5, 3), (1, 1)),
                DeconvSpec(8, (7, 5), (5, 3), (1, 1)),
            ),
            output=(1025, 100),
        )

    @classmethod
    def toy(cls):
        """Small geometry for fast tests and training demos: 32 -> 33x10."""
        return cls(
            input_dim=32,
            mlp_dims=(24, 36),
            reshape=(4, 3, 3),
            deconv=(
                DeconvSpec(4, (4, 3), (3, 2)),
                DeconvSpec(2, (5, 3), (4, 2)),
            ),
            output=(33, 10),
        )

    @classmethod
    def micro(cls):
        """Tiny geometry for finite-difference audits: 8 -> 9x4 (pad path)."""
        return cls(
            input_dim=8,
            mlp_dims=(10, 12),
            reshape=(3, 2, 2),
            deconv=(DeconvSpec(2, (3, 2), (2, 1)),),
            output=(9, 4),
        )

    def to_dict(self):
        return {
            "input_dim": self.input_dim,
            "mlp_dims": list(self.mlp_dims),
            "reshape": list(self.reshape),
            "deconv": [d.to_dict() for d in self.deconv],
            "output": list(self.output),
            "dropout": self.dropout,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            input_dim=d["input_dim"],
            mlp_dims=tuple(d["mlp_dims"]),
            reshape=tuple(d["reshape"]),
            deconv=tuple(DeconvSpec.from_dict(b) for b in d["deconv"]),
            output=tuple(d["output"]),
            dropout=d.get("dropout", 0.1),
        )


class SpectrogramGenerator:
    """The network itself: owns weights, gradient buffers and the layer graph."""

    def __init__(self, params: GeneratorParams, seed: int = 0):
        self.params = params
        rng = np.random.default_rng(seed)
        self.mlp = []
        d_prev = params.input_dim
        for d in params.mlp_dims:
            self.mlp.extend([
                Linear(d_prev, d, rng),
                LayerNorm(d),
                LeakyReLU(0.01),
                Dropout(params.dropout),
            ])
            d_prev = d
        self.branches = {}
        for name in ("real", "imag"):
            layers = []
            c_prev = params.reshape[0]
            h, w = params.reshape[1], params.reshape[2]
            for spec in params.deconv:
                conv = ConvTranspose2d(c_prev, spec.channels, spec.kernel,
                                       spec.stride, spec.padding, rng, bias=False)
                h, w = conv.out_shape(h, w)
                if h < 1 or w < 1:
                    raise ValueError(f"deconv schedule collapses to {h}x{w}")
                layers.extend([conv, InstanceNorm2d(spec.channels), Relu(),
                               Dropout(params.dropout)])
                c_prev = spec.channels
            layers.append(ConvTranspose2d(c_prev, 1, (3, 3), (1, 1), (1, 1), rng))
            layers.append(CenterCropOrPad(params.output))
            self.branches[name] = layers
        self.natural_shape = (h, w)  # pre-crop plane size (same for both branches)
        self._forward_done = False

    def forward(self, phi, train_mode: bool = False, seed: int = 0):
        """Run the network; returns float64 (real, imag) planes of the target size.

        Dropout masks are drawn from a generator seeded with ``seed`` in a
        fixed layer order, so a (weights, phi, seed) triple fully determines
        the training-mode output.
        """
        phi = np.asarray(phi, dtype=np.float64).reshape(-1)
        if phi.shape[0] != self.params.input_dim:
            raise ValueError(
                f"feature vector has dim {phi.shape[0]}, expected {self.params.input_dim}"
            )
        rng = np.random.default_rng(seed) if train_mode else None
        x = phi
        for layer in self.mlp:
            x = layer.forward(x, train_mode, rng)
        volume = x.reshape(self.params.reshape)
        planes = []
        for name in ("real", "imag"):
            y = volume
            for layer in self.branches[name][:-1]:
                y = layer.forward(y, train_mode, rng)
            y = y[0]  # single output channel
            planes.append(self.branches[name][-1].forward(y))
        self._forward_done = True
        return planes[0], planes[1]

    def backward(self, g_real, g_imag):
        """Backpropagate plane gradients; accumulates parameter gradients.

        Returns the gradient with respect to the input feature vector (used
        when the classifier upstream is trained through this network).
        """
        if not self._forward_done:
            raise RuntimeError("backward called without a recorded forward pass")
        g_volume = None
        for name, g_plane in (("real", g_real), ("imag", g_imag)):
            layers = self.branches[name]
            g = layers[-1].backward(np.asarray(g_plane, dtype=np.float64))
            g = g[None, :, :]
            for layer in reversed(layers[:-1]):
                g = layer.backward(g)
            g_volume = g if g_volume is None else g_volume + g
        g = g_volume.reshape(-1)
        for layer in reversed(self.mlp):
            g = layer.backward(g)
        return g

    def parameters(self):
        """[(name, param array, grad array)] in a stable order."""
        out = []
        for i, layer in enumerate(self.mlp):
            for attr, p, g in layer.param_items():
                out.append((f"mlp{i}.{attr}", p, g))
        for name, layers in self.branches.items():
            for i, layer in enumerate(layers):
                for attr, p, g in layer.param_items():
                    out.append((f"{name}{i}.{attr}", p, g))
        return out

    def zero_grads(self):
        for _, _, g in self.parameters():
            g[...] = 0.0

    def set_all_weights(self, value: float):
        for _, p, _ in self.parameters():
            p[...] = value


def generate_spectrogram(gen: SpectrogramGenerator, phi, train_mode: bool = False,
                         seed: int = 0, sample_rate: int = 22050,
                         hop: int | None = None) -> ComplexSpectrogram:
    """Inference wrapper: run the generator and package the result.

    The frequency axis determines the transform size (bins = n_fft/2 + 1);
    hop defaults to n_fft/4, the overlap the synthesis side assumes.
    """
    real, imag = gen.forward(phi, train_mode=train_mode, seed=seed)
    n_fft = 2 * (gen.params.output[0] - 1)
    return ComplexSpectrogram(
        real.astype(np.float32), imag.astype(np.float32),
        sample_rate=sample_rate, n_fft=n_fft,
        hop=n_fft // 4 if hop is None else hop,
    )


def save_generator(gen: SpectrogramGenerator, directory) -> None:
    """Write weights as one ISVT tensor per parameter plus a JSON manifest."""
    os.makedirs(directory, exist_ok=True)
    names = []
    for name, p, _ in gen.parameters():
        tensor_write(p, os.path.join(directory, f"{name}.isvt"))
        names.append(name)
    manifest = {"architecture": gen.params.to_dict(), "tensors": names}
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)


def load_generator(directory) -> SpectrogramGenerator:
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = json.load(fh)
    gen = SpectrogramGenerator(GeneratorParams.from_dict(manifest["architecture"]))
    stored = {name for name, _, _ in gen.parameters()}
    listed = set(manifest["tensors"])
    if stored != listed:
        raise ValueError(
            f"manifest tensors do not match architecture: missing "
            f"{sorted(stored - listed)}, unexpected {sorted(listed - stored)}"
        )
    for name, p, _ in gen.parameters():
        loaded = tensor_read(os.path.join(directory, f"{name}.isvt"))
        if loaded.shape != p.shape:
            raise ValueError(f"{name}: stored shape {loaded.shape} != expected {p.shape}")
        p[...] = loaded.astype(np.float64)
    return gen


@dataclass(frozen=True)
class LossWeights:
    """Weights of the composite spectrogram loss and the combined objective."""

    lambda_sc: float = 0.5
    lambda_mse: float = 0.0
    lambda_spec: float = 2.0
    l1_scale: float = 2.0

    def __post_init__(self):
        for name in ("lambda_sc", "lambda_mse", "lambda_spec", "l1_scale"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def spectral_convergence(m_true, m_pred) -> float:
    """Frobenius-relative magnitude error: ||M_true - M_pred||_F / ||M_true||_F."""
    m_true = np.asarray(m_true, dtype=np.float64)
    m_pred = np.asarray(m_pred, dtype=np.float64)
    if m_true.shape != m_pred.shape:
        raise ValueError(f"shape mismatch: {m_true.shape} vs {m_pred.shape}")
    ref = np.linalg.norm(m_true)
    if ref == 0.0:
        raise ValueError("reference magnitude has zero norm")
    return float(np.linalg.norm(m_true - m_pred) / ref)


def _planes_of(s):
    if isinstance(s, ComplexSpectrogram):
        return s.real.astype(np.float64), s.imag.astype(np.float64)
    r, i = s
    return np.asarray(r, dtype=np.float64), np.asarray(i, dtype=np.float64)


def _sc_with_grad(a_true, a_pred):
    """spectral convergence on two nonnegative planes + gradient wrt a_pred."""
    ref = np.linalg.norm(a_true)
    diff = a_pred - a_true
    dist = np.linalg.norm(diff)
    sc = dist / ref
    if dist == 0.0:
        return sc, np.zeros_like(a_pred)  # subgradient 0 at the kink
    return sc, diff / (dist * ref)


def complex_loss_with_grad(s_true, s_pred, weights: LossWeights = LossWeights()):
    """Composite loss, per-term breakdown, and gradients wrt the predicted planes.

    total = l1_scale*(L1_real + L1_imag + L1_mag)
          + lambda_sc*(SC_real + SC_imag)
          + lambda_mse*(MSE_real + MSE_imag)

    where the L1 terms are mean absolute errors, the magnitude is
    sqrt(r^2 + i^2 + smoothing), and spectral convergence is applied to the
    absolute values of each plane separately.
    """
    tr, ti = _planes_of(s_true)
    pr, pi = _planes_of(s_pred)
    if tr.shape != pr.shape:
        raise ValueError(f"shape mismatch: true {tr.shape} vs pred {pr.shape}")
    n = tr.size

    dr = pr - tr
    di = pi - ti
    l1_real = np.abs(dr).mean()
    l1_imag = np.abs(di).mean()
    g_l1_real = np.sign(dr) / n
    g_l1_imag = np.sign(di) / n

    mag_true = np.sqrt(tr**2 + ti**2 + MAG_SMOOTHING)
    mag_pred = np.sqrt(pr**2 + pi**2 + MAG_SMOOTHING)
    dmag = mag_pred - mag_true
    l1_mag = np.abs(dmag).mean()
    s = np.sign(dmag) / n
    g_mag_r = s * pr / mag_pred
    g_mag_i = s * pi / mag_pred

    sc_real, g_sc_ar = _sc_with_grad(np.abs(tr), np.abs(pr))
    sc_imag, g_sc_ai = _sc_with_grad(np.abs(ti), np.abs(pi))
    g_sc_r = g_sc_ar * np.sign(pr)
    g_sc_i = g_sc_ai * np.sign(pi)

    mse_real = (dr**2).mean()
    mse_imag = (di**2).mean()
    g_mse_r = 2.0 * dr / n
    g_mse_i = 2.0 * di / n

    w = weights
    terms = {
        "l1_real": float(l1_real), "l1_imag": float(l1_imag), "l1_mag": float(l1_mag),
        "sc_real": float(sc_real), "sc_imag": float(sc_imag),
        "mse_real": float(mse_real), "mse_imag": float(mse_imag),
    }
    total = (w.l1_scale * (l1_real + l1_imag + l1_mag)
             + w.lambda_sc * (sc_real + sc_imag)
             + w.lambda_mse * (mse_real + mse_imag))
    g_real = (w.l1_scale * (g_l1_real + g_mag_r)
              + w.lambda_sc * g_sc_r + w.lambda_mse * g_mse_r)
    g_imag = (w.l1_scale * (g_l1_imag + g_mag_i)
              + w.lambda_sc * g_sc_i + w.lambda_mse * g_mse_i)
    return float(total), terms, g_real, g_imag


def complex_spectrogram_loss(s_true, s_pred, weights: LossWeights = LossWeights()):
    """Composite spectrogram loss; returns (total, per-term breakdown)."""
    total, terms, _, _ = complex_loss_with_grad(s_true, s_pred, weights)
    return total, terms


def combined_loss(logits, label: int, s_true, s_pred,
                  weights: LossWeights = LossWeights()):
    """Classification cross-entropy plus lambda_spec times the spectrogram loss."""
    ce = cross_entropy(logits, label)
    spec_total, terms = complex_spectrogram_loss(s_true, s_pred, weights)
    breakdown = dict(terms)
    breakdown["cross_entropy"] = ce
    breakdown["spectrogram"] = spec_total
    return float(ce + weights.lambda_spec * spec_total), breakdown


def combined_loss_with_grad(logits, label: int, s_true, s_pred,
                            weights: LossWeights = LossWeights()):
    """Combined loss plus gradients wrt logits and the predicted planes."""
    ce = cross_entropy(logits, label)
    g_logits = cross_entropy_grad(logits, label)
    spec_total, terms, g_r, g_i = complex_loss_with_grad(s_true, s_pred, weights)
    breakdown = dict(terms)
    breakdown["cross_entropy"] = ce
    breakdown["spectrogram"] = spec_total
    total = float(ce + weights.lambda_spec * spec_total)
    return total, breakdown, g_logits, weights.lambda_spec * g_r, weights.lambda_spec * g_i
