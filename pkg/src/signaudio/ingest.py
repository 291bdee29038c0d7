"""Clip loading, preprocessing, and training-time augmentation.

Clips are stacks of RGB frames stored as binary PPM (P6) files, one file
per frame, named frame_%06d.ppm inside a clip directory.  Preprocessing
subsamples every clip to 64 frames, scales the short spatial side to 256
with bilinear interpolation, center-crops to 256x256, and maps pixels to
[-1, 1].  Augmentation jitters color, rotates, and drops frames, fully
determined by a (seed, version) pair.  Augmentation composes with
preprocessing in either order; the training recipe here applies it to raw
[0, 255] clips before preprocessing.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass

import numpy as np

TARGET_FRAMES = 64
TARGET_SIZE = 256

# NTSC RGB -> YIQ; hue jitter rotates the two chroma axes and leaves
# luminance fixed, a linear stand-in for an exact HSV hue shift
_RGB_TO_YIQ = np.array([
    [0.299, 0.587, 0.114],
    [0.595716, -0.274453, -0.321263],
    [0.211456, -0.522591, 0.311135],
])
_YIQ_TO_RGB = np.linalg.inv(_RGB_TO_YIQ)


@dataclass
class Clip:
    """RGB frame stack, axes (channel, frame, width, height), plus a frame rate.

    Pixel values are [0, 255] for raw clips and [-1, 1] once preprocessed.
    """

    frames: np.ndarray
    fps: float = 30.0

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 4:
            raise ValueError(f"clip needs 4 axes (c, t, w, h), got {self.frames.ndim}")
        if self.frames.shape[0] != 3:
            raise ValueError(f"clip needs 3 channels, got {self.frames.shape[0]}")
        if self.frames.shape[1] < 1:
            raise ValueError("clip needs at least one frame")
        if min(self.frames.shape[2], self.frames.shape[3]) < 1:
            raise ValueError("clip frames need at least one pixel per side")
        if self.fps <= 0:
            raise ValueError("fps must be positive")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    @property
    def height(self) -> int:
        return self.frames.shape[3]


class PpmError(ValueError):
    """Raised when a PPM file is malformed."""


def ppm_read(path) -> np.ndarray:
    """Read a binary 8-bit PPM (P6); returns uint8 array (height, width, 3)."""
    with open(path, "rb") as fh:
        data = fh.read()
    # header: magic, width, height, maxval as whitespace-separated tokens,
    # '#' comments allowed, a single whitespace byte ends the header
    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise PpmError(f"{path}: truncated header")
        ch = data[pos : pos + 1]
        if ch == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end == -1 else end + 1
        elif ch.isspace():
            pos += 1
        else:
            match = re.match(rb"[^\s#]+", data[pos:])
            tokens.append(match.group(0))
            pos += match.end()
    if tokens[0] != b"P6":
        raise PpmError(f"{path}: not a P6 file (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise PpmError(f"{path}: non-numeric header fields") from None
    if width < 1 or height < 1:
        raise PpmError(f"{path}: bad dimensions {width}x{height}")
    if maxval != 255:
        raise PpmError(f"{path}: only maxval 255 supported, got {maxval}")
    pos += 1  # the single whitespace byte after maxval
    need = width * height * 3
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise PpmError(f"{path}: payload holds {len(payload)} bytes, need {need}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)


def ppm_write(path, image: np.ndarray) -> None:
    """Write an (height, width, 3) uint8 array as binary PPM (P6)."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected (height, width, 3), got {image.shape}")
    if image.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {image.dtype}")
    height, width = image.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        fh.write(image.tobytes())


def clip_read(directory, fps: float = 30.0) -> Clip:
    """Load frame_*.ppm files from a directory in lexicographic name order."""
    names = sorted(n for n in os.listdir(directory)
                   if n.startswith("frame_") and n.endswith(".ppm"))
    if not names:
        raise FileNotFoundError(f"no frame_*.ppm files in {directory}")
    frames = []
    for name in names:
        image = ppm_read(os.path.join(directory, name))
        frames.append(image.astype(np.float32).transpose(2, 1, 0))  # (3, w, h)
    return Clip(np.stack(frames, axis=1), fps=fps)


def clip_write(directory, clip: Clip) -> None:
    """Write a raw-range clip as frame_%06d.ppm files (values clamped, rounded)."""
    os.makedirs(directory, exist_ok=True)
    for j in range(clip.num_frames):
        frame = np.clip(np.rint(clip.frames[:, j]), 0, 255).astype(np.uint8)
        ppm_write(os.path.join(directory, f"frame_{j:06d}.ppm"),
                  frame.transpose(2, 1, 0))


def bilinear_resize(frame: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Resize a 2-D array with bilinear interpolation, half-pixel centers.

    Output position i samples source coordinate (i + 0.5)*in/out - 0.5,
    clamped to the valid range, so up- and downscaling stay symmetric.
    """
    in_w, in_h = frame.shape

    def axis_coords(n_in, n_out):
        pos = np.clip((np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5, 0, n_in - 1)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    wl, wh, wf = axis_coords(in_w, out_w)
    hl, hh, hf = axis_coords(in_h, out_h)
    frame = np.asarray(frame, dtype=np.float64)
    return (frame[np.ix_(wl, hl)] * ((1 - wf)[:, None] * (1 - hf)[None, :])
            + frame[np.ix_(wh, hl)] * (wf[:, None] * (1 - hf)[None, :])
            + frame[np.ix_(wl, hh)] * ((1 - wf)[:, None] * hf[None, :])
            + frame[np.ix_(wh, hh)] * (wf[:, None] * hf[None, :]))


def rotate_frame(frame: np.ndarray, angle_degrees: float, fill: float) -> np.ndarray:
    """Rotate a 2-D array about its center, bilinear, exposed corners filled.

    Each output pixel inverse-maps into the source plane; neighbors falling
    outside contribute the fill value.
    """
    w, h = frame.shape
    cw, ch = (w - 1) / 2.0, (h - 1) / 2.0
    theta = math.radians(angle_degrees)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    du = np.arange(w, dtype=np.float64)[:, None] - cw
    dv = np.arange(h, dtype=np.float64)[None, :] - ch
    x = cos_t * du + sin_t * dv + cw
    y = -sin_t * du + cos_t * dv + ch
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx, fy = x - x0, y - y0
    frame = np.asarray(frame, dtype=np.float64)

    def gather(ix, iy):
        valid = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
        out = np.full(ix.shape, fill, dtype=np.float64)
        out[valid] = frame[ix[valid], iy[valid]]
        return out

    return (gather(x0, y0) * (1 - fx) * (1 - fy)
            + gather(x0 + 1, y0) * fx * (1 - fy)
            + gather(x0, y0 + 1) * (1 - fx) * fy
            + gather(x0 + 1, y0 + 1) * fx * fy)


def preprocess_clip(raw: Clip) -> Clip:
    """Normalize any clip to 3 x 64 x 256 x 256 with pixels in [-1, 1].

    Temporal: 64 frames at indices round(j*(t-1)/63); short clips repeat
    frames.  Spatial: bilinear scale so the short side is 256, center crop.
    Values: x -> x/127.5 - 1.
    """
    t = raw.num_frames
    indices = np.rint(np.arange(TARGET_FRAMES) * (t - 1) / (TARGET_FRAMES - 1))
    indices = indices.astype(np.int64)

    short = min(raw.width, raw.height)
    scale = TARGET_SIZE / short
    out_w = TARGET_SIZE if raw.width == short else int(round(raw.width * scale))
    out_h = TARGET_SIZE if raw.height == short else int(round(raw.height * scale))
    crop_w = (out_w - TARGET_SIZE) // 2
    crop_h = (out_h - TARGET_SIZE) // 2

    out = np.empty((3, TARGET_FRAMES, TARGET_SIZE, TARGET_SIZE), dtype=np.float32)
    for j, src in enumerate(indices):
        for c in range(3):
            scaled = bilinear_resize(raw.frames[c, src], out_w, out_h)
            cropped = scaled[crop_w : crop_w + TARGET_SIZE,
                             crop_h : crop_h + TARGET_SIZE]
            out[c, j] = cropped / 127.5 - 1.0
    return Clip(out, fps=raw.fps)


@dataclass(frozen=True)
class AugmentParams:
    """Jitter ranges for one augmentation family; seed pins all randomness."""

    brightness: float = 0.6
    contrast: float = 0.6
    saturation: float = 0.6
    hue: float = 0.2
    rotation_degrees: float = 15.0
    drop_fraction: float = 1.0 / 8.0
    versions: int = 5
    seed: int = 0

    def __post_init__(self):
        for name in ("brightness", "contrast", "saturation", "hue",
                     "rotation_degrees", "drop_fraction"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.drop_fraction > 1.0 / 8.0:
            raise ValueError("drop_fraction must be <= 1/8")
        if self.versions < 1:
            raise ValueError("versions must be >= 1")


def _luminance(frames: np.ndarray) -> np.ndarray:
    """Rec. 601 luma of an RGB volume (3, ...) -> (...)."""
    return (0.299 * frames[0] + 0.587 * frames[1] + 0.114 * frames[2])


def augment_clip(clip: Clip, params: AugmentParams, version: int,
                 value_range=(0.0, 255.0)) -> Clip:
    """One deterministic augmented variant of a clip.

    Parameter draws come from a generator seeded with (params.seed, version)
    in the fixed order brightness, contrast, saturation, hue, rotation,
    frame drop; an operation whose range is zero draws nothing and is
    skipped outright, so all-zero parameters reproduce the input exactly.
    Factors are uniform in [max(0, 1-f), 1+f], the hue shift in +/-hue
    turns (applied as a rotation of the YIQ chroma plane), the rotation
    angle in +/-rotation_degrees (bilinear, corners filled with the range
    minimum).  At most floor(t * drop_fraction) frames are removed.  Color
    results are clamped to value_range.
    """
    if not 0 <= version < params.versions:
        raise ValueError(f"version {version} out of range for {params.versions}")
    lo, hi = float(value_range[0]), float(value_range[1])
    rng = np.random.default_rng([params.seed, version])
    frames = clip.frames.astype(np.float64)
    color_touched = False

    if params.brightness > 0:
        factor = rng.uniform(max(0.0, 1.0 - params.brightness), 1.0 + params.brightness)
        frames = frames * factor
        color_touched = True
    if params.contrast > 0:
        factor = rng.uniform(max(0.0, 1.0 - params.contrast), 1.0 + params.contrast)
        gray_mean = _luminance(frames).mean(axis=(1, 2), keepdims=True)  # per frame
        frames = (frames - gray_mean) * factor + gray_mean
        color_touched = True
    if params.saturation > 0:
        factor = rng.uniform(max(0.0, 1.0 - params.saturation), 1.0 + params.saturation)
        gray = _luminance(frames)[None, ...]
        frames = (frames - gray) * factor + gray
        color_touched = True
    if params.hue > 0:
        shift = rng.uniform(-params.hue, params.hue)
        angle = 2.0 * math.pi * shift
        rot = np.array([
            [1.0, 0.0, 0.0],
            [0.0, math.cos(angle), -math.sin(angle)],
            [0.0, math.sin(angle), math.cos(angle)],
        ])
        matrix = _YIQ_TO_RGB @ rot @ _RGB_TO_YIQ
        frames = np.einsum("dc,ctwh->dtwh", matrix, frames)
        color_touched = True
    if color_touched:
        frames = np.clip(frames, lo, hi)

    if params.rotation_degrees > 0:
        angle = rng.uniform(-params.rotation_degrees, params.rotation_degrees)
        rotated = np.empty_like(frames)
        for j in range(frames.shape[1]):
            for c in range(3):
                rotated[c, j] = rotate_frame(frames[c, j], angle, fill=lo)
        frames = rotated

    if params.drop_fraction > 0:
        t = frames.shape[1]
        max_drop = int(t * params.drop_fraction)
        if max_drop > 0:
            count = int(rng.integers(0, max_drop + 1))
            if count > 0:
                drop = rng.choice(t, size=count, replace=False)
                keep = np.setdiff1d(np.arange(t), drop)
                frames = frames[:, keep]

    return Clip(frames.astype(np.float32), fps=clip.fps)
