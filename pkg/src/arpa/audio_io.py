"""WAV reading/writing and rate canonicalization.

Everything downstream works on mono float64 samples in [-1, 1]. The reader
accepts PCM 8/16/24/32-bit integer and 32-bit float RIFF/WAVE files with one
or two channels; the writer always emits 16-bit PCM mono.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ArpaError

CANONICAL_RATE_HZ = 16000


class NotWavError(ArpaError):
    """File is not a parseable RIFF/WAVE container."""


class UnsupportedEncodingError(ArpaError):
    """WAV container uses a codec or layout we do not handle."""


class EmptyAudioError(ArpaError):
    """WAV file contains zero sample frames."""


@dataclass
class AudioClip:
    """Mono PCM audio. Loaders guarantee samples in [-1, 1]; intermediate
    processing (e.g. pre-emphasis) may exceed that nominal range."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("AudioClip needs a non-empty 1-D sample array")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("AudioClip samples must be finite")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


_PCM = 1
_IEEE_FLOAT = 3


def _parse_chunks(data: bytes) -> dict[bytes, bytes]:
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise NotWavError("missing RIFF/WAVE magic")
    chunks = {}
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise NotWavError(f"truncated {cid!r} chunk")
        chunks.setdefault(cid, body)
        pos += 8 + size + (size & 1)  # chunks are word-aligned
    return chunks


def _decode_samples(raw: bytes, fmt: int, bits: int, n_values: int) -> np.ndarray:
    if fmt == _IEEE_FLOAT:
        if bits != 32:
            raise UnsupportedEncodingError(f"{bits}-bit float WAV not supported")
        return np.clip(np.frombuffer(raw, dtype="<f4", count=n_values), -1.0, 1.0).astype(np.float64)
    if fmt != _PCM:
        raise UnsupportedEncodingError(f"WAV format tag {fmt} not supported (PCM/float only)")
    if bits == 8:
        # 8-bit WAV is unsigned with a 128 offset
        x = np.frombuffer(raw, dtype=np.uint8, count=n_values).astype(np.float64)
        return (x - 128.0) / 128.0
    if bits == 16:
        return np.frombuffer(raw, dtype="<i2", count=n_values).astype(np.float64) / 32768.0
    if bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8, count=3 * n_values).reshape(-1, 3).astype(np.int64)
        x = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        x[x >= 1 << 23] -= 1 << 24
        return x.astype(np.float64) / float(1 << 23)
    if bits == 32:
        return np.frombuffer(raw, dtype="<i4", count=n_values).astype(np.float64) / float(1 << 31)
    raise UnsupportedEncodingError(f"{bits}-bit PCM not supported")


def load_wav(path) -> AudioClip:
    """Read a WAV file as a mono clip; stereo is downmixed by channel mean."""
    with open(path, "rb") as fh:
        return load_wav_bytes(fh.read())


def load_wav_bytes(data: bytes) -> AudioClip:
    chunks = _parse_chunks(data)
    if b"fmt " not in chunks or b"data" not in chunks:
        raise NotWavError("missing fmt or data chunk")
    fmt_body = chunks[b"fmt "]
    if len(fmt_body) < 16:
        raise NotWavError("fmt chunk too short")
    fmt, channels, rate, _byte_rate, block_align, bits = struct.unpack_from("<HHIIHH", fmt_body)
    if rate == 0 or block_align == 0:
        raise NotWavError("fmt chunk declares zero rate or block size")
    if channels not in (1, 2):
        raise UnsupportedEncodingError(f"{channels}-channel WAV not supported")
    body = chunks[b"data"]
    n_frames = len(body) // block_align
    if n_frames == 0:
        raise EmptyAudioError("no sample frames")
    samples = _decode_samples(body, fmt, bits, n_frames * channels)
    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    return AudioClip(samples, rate)


def save_wav(clip: AudioClip, path) -> None:
    """Write a clip as 16-bit PCM mono, clamping amplitudes to [-1, 1]."""
    pcm = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2")
    body = pcm.tobytes()
    rate = clip.sample_rate_hz
    header = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 36 + len(body)),
            b"WAVE",
            b"fmt ",
            struct.pack("<IHHIIHH", 16, _PCM, 1, rate, rate * 2, 2, 16),
            b"data",
            struct.pack("<I", len(body)),
        ]
    )
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header + body)
    os.replace(tmp, path)


def resample(clip: AudioClip, target_hz: int) -> AudioClip:
    """Linear-interpolation resampling; exact on constants, duration-preserving."""
    if target_hz <= 0:
        raise ValueError("target_hz must be positive")
    if target_hz == clip.sample_rate_hz:
        return AudioClip(clip.samples.copy(), target_hz)
    n_in = len(clip.samples)
    n_out = max(1, int(n_in * target_hz / clip.sample_rate_hz + 0.5))
    positions = np.arange(n_out) * (clip.sample_rate_hz / target_hz)
    out = np.interp(positions, np.arange(n_in), clip.samples)
    return AudioClip(out, target_hz)
