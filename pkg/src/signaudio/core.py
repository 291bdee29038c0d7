"""Shared data types and binary I/O: ISVT tensor files, PCM WAV, run configuration.

All array data in this package is carried as plain ``numpy.ndarray`` of
float32 (float64 only inside gradient checks).  The ISVT file format is a
minimal container for such arrays:

    offset  size  field
    0       4     magic bytes ``ISVT``
    4       1     version byte (currently 1)
    5       7     reserved, zero
    12      4     rank, little-endian u32 (at most 8)
    16      4*r   dimension sizes, little-endian u32 each
    ...           payload: little-endian float32, row-major

so the fixed header is 16 bytes and the total file size is
``16 + 4*rank + 4*prod(shape)``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict

import numpy as np

ISVT_MAGIC = b"ISVT"
ISVT_VERSION = 1
ISVT_MAX_RANK = 8

WAV_SCALE = 32767.0  # symmetric: +-1.0 maps to +-32767


class TensorFileError(Exception):
    """Base class for ISVT read failures."""


class BadMagicError(TensorFileError):
    """File does not start with the ISVT magic bytes."""


class BadVersionError(TensorFileError):
    """Version byte is not a supported ISVT version."""


class RankError(TensorFileError):
    """Declared rank exceeds the supported maximum (or is implausible)."""


class TruncatedFileError(TensorFileError):
    """File ends before the declared payload is complete."""


def tensor_write(t: np.ndarray, path) -> None:
    """Write ``t`` to ``path`` in the ISVT format (float32, rank <= 8)."""
    arr = np.ascontiguousarray(t, dtype=np.float32)
    if arr.ndim > ISVT_MAX_RANK:
        raise RankError(f"rank {arr.ndim} exceeds maximum {ISVT_MAX_RANK}")
    if arr.ndim == 0:
        arr = arr.reshape(1)
    with open(path, "wb") as fh:
        fh.write(ISVT_MAGIC)
        fh.write(struct.pack("<B", ISVT_VERSION))
        fh.write(b"\x00" * 7)
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.astype("<f4", copy=False).tobytes())


def tensor_read(path) -> np.ndarray:
    """Read an ISVT file back into a float32 array.

    Raises :class:`BadMagicError`, :class:`BadVersionError`,
    :class:`RankError` or :class:`TruncatedFileError` on malformed input.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != ISVT_MAGIC:
        raise BadMagicError(f"{path}: not an ISVT file")
    if len(data) < 16:
        raise TruncatedFileError(f"{path}: header cut short")
    version = data[4]
    if version != ISVT_VERSION:
        raise BadVersionError(f"{path}: unsupported version {version}")
    (rank,) = struct.unpack_from("<I", data, 12)
    if rank > ISVT_MAX_RANK:
        raise RankError(f"{path}: rank {rank} exceeds maximum {ISVT_MAX_RANK}")
    if len(data) < 16 + 4 * rank:
        raise TruncatedFileError(f"{path}: dimension list cut short")
    shape = struct.unpack_from(f"<{rank}I", data, 16)
    count = int(np.prod(shape)) if rank else 1
    start = 16 + 4 * rank
    if len(data) < start + 4 * count:
        raise TruncatedFileError(
            f"{path}: payload has {len(data) - start} bytes, expected {4 * count}"
        )
    flat = np.frombuffer(data, dtype="<f4", count=count, offset=start)
    return flat.reshape(shape).astype(np.float32, copy=True)


@dataclass
class AudioBuffer:
    """Mono audio: float32 samples nominally in [-1, 1] plus a sample rate.

    Values outside [-1, 1] are tolerated and only clipped at WAV export.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32).reshape(-1)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def wav_write(audio: AudioBuffer, path) -> None:
    """Write canonical RIFF/WAVE, PCM, 16-bit, mono.

    Samples are clamped to [-1, 1], scaled by 32767 and rounded to nearest,
    so the byte layout is a pure function of the input buffer.
    """
    clamped = np.clip(audio.samples, -1.0, 1.0)
    pcm = np.rint(clamped.astype(np.float64) * WAV_SCALE).astype("<i2")
    data_bytes = pcm.tobytes()
    sr = int(audio.sample_rate)
    header = b"RIFF"
    header += struct.pack("<I", 36 + len(data_bytes))
    header += b"WAVE"
    header += b"fmt "
    header += struct.pack("<IHHIIHH", 16, 1, 1, sr, sr * 2, 2, 16)
    header += b"data"
    header += struct.pack("<I", len(data_bytes))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data_bytes)


def wav_read(path) -> AudioBuffer:
    """Read a PCM 16-bit mono WAV written by :func:`wav_write`.

    Integer samples are scaled by 1/32767, the inverse of the writer, so a
    write/read round trip is lossless for already quantized values.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise ValueError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    payload = None
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (chunk_len,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + chunk_len]
        if chunk_id == b"fmt ":
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            payload = body
        pos += 8 + chunk_len + (chunk_len & 1)
    if fmt is None or payload is None:
        raise ValueError(f"{path}: missing fmt or data chunk")
    audio_format, channels, sample_rate, _, _, bits = fmt
    if audio_format != 1 or channels != 1 or bits != 16:
        raise ValueError(f"{path}: expected PCM 16-bit mono, got format={audio_format} "
                         f"channels={channels} bits={bits}")
    pcm = np.frombuffer(payload, dtype="<i2")
    return AudioBuffer(pcm.astype(np.float32) / WAV_SCALE, sample_rate)


@dataclass
class ComplexSpectrogram:
    """Paired real/imaginary planes of shape (freq_bins, frames).

    ``freq_bins`` must equal ``n_fft // 2 + 1`` (one-sided spectrum).
    """

    real: np.ndarray
    imag: np.ndarray
    sample_rate: int
    n_fft: int
    hop: int

    def __post_init__(self):
        self.real = np.asarray(self.real, dtype=np.float32)
        self.imag = np.asarray(self.imag, dtype=np.float32)
        if self.real.shape != self.imag.shape:
            raise ValueError("real and imag planes must have the same shape")
        if self.real.ndim != 2:
            raise ValueError("spectrogram planes must be 2-D (freq x time)")
        if self.real.shape[0] != self.n_fft // 2 + 1:
            raise ValueError(
                f"freq dimension {self.real.shape[0]} inconsistent with "
                f"n_fft {self.n_fft} (expected {self.n_fft // 2 + 1})"
            )
        if self.hop < 1:
            raise ValueError("hop must be >= 1")

    @property
    def num_bins(self) -> int:
        return self.real.shape[0]

    @property
    def num_frames(self) -> int:
        return self.real.shape[1]

    def magnitude(self) -> np.ndarray:
        return np.sqrt(self.real.astype(np.float64) ** 2 + self.imag.astype(np.float64) ** 2)


def spectrogram_save(spec: ComplexSpectrogram, path) -> None:
    """Persist as a 2 x freq x time ISVT tensor plus a ``<path>.json`` sidecar."""
    tensor_write(np.stack([spec.real, spec.imag]), path)
    sidecar = {
        "n_fft": spec.n_fft,
        "hop": spec.hop,
        "sample_rate": spec.sample_rate,
    }
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2)


def spectrogram_load(path) -> ComplexSpectrogram:
    planes = tensor_read(path)
    if planes.ndim != 3 or planes.shape[0] != 2:
        raise ValueError(f"{path}: expected a 2 x freq x time tensor, got {planes.shape}")
    with open(str(path) + ".json") as fh:
        sidecar = json.load(fh)
    return ComplexSpectrogram(
        planes[0], planes[1],
        sample_rate=int(sidecar["sample_rate"]),
        n_fft=int(sidecar["n_fft"]),
        hop=int(sidecar["hop"]),
    )


class GlossVocab:
    """Ordered list of distinct gloss labels with index lookup."""

    def __init__(self, labels):
        labels = list(labels)
        if not labels:
            raise ValueError("vocabulary must contain at least one gloss")
        if len(set(labels)) != len(labels):
            raise ValueError("gloss labels must be distinct")
        self.labels = labels
        self._index = {g: i for i, g in enumerate(labels)}

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, gloss: str) -> int:
        return self._index[gloss]

    def gloss(self, index: int) -> str:
        return self.labels[index]

    @classmethod
    def from_file(cls, path) -> "GlossVocab":
        with open(path) as fh:
            labels = [line.strip() for line in fh if line.strip()]
        return cls(labels)


@dataclass
class PipelineConfig:
    """End-to-end run configuration.

    ``window_size``/``hop_length``/``overlap``/``confidence_threshold`` drive
    the temporal detector (hop_length counts window positions, overlap counts
    frames); ``n_fft``/``hop``/``sample_rate`` drive audio synthesis.
    """

    window_size: int = 50
    hop_length: int = 3
    overlap: int = 25
    confidence_threshold: float = 0.7
    n_fft: int = 2048
    hop: int = 512
    sample_rate: int = 22050
    feature_dim: int = 2048
    class_count: int = 100
    generator: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.overlap < self.window_size:
            raise ValueError("overlap must satisfy 0 < overlap < window_size")
        if self.hop_length < 1:
            raise ValueError("hop_length must be >= 1")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must be in [0, 1]")
        if self.feature_dim < 1 or self.class_count < 1:
            raise ValueError("feature_dim and class_count must be >= 1")

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        """Load from a JSON object; missing keys keep their defaults."""
        with open(path) as fh:
            raw = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2)
