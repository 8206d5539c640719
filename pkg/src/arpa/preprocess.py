"""Gaussian smoothing and RMS-gated silence trimming.

Denoising is a unit-sum discrete Gaussian convolution, so DC level is
preserved and the operation is exactly linear. Silence is judged per frame
relative to the loudest frame of the clip, which makes trimming invariant
to overall gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .audio_io import AudioClip
from .errors import ArpaError


class SilenceOnlyError(ArpaError):
    """Every frame of the clip fell below the silence threshold."""


@dataclass
class PreprocessConfig:
    gaussian_sigma_samples: float = 2.0
    kernel_radius: int | None = None  # None -> ceil(3 * sigma)
    silence_threshold_db: float = -40.0  # relative to the loudest frame
    silence_frame_ms: float = 10.0

    def __post_init__(self):
        if self.gaussian_sigma_samples <= 0:
            raise ValueError("gaussian_sigma_samples must be positive")
        if self.kernel_radius is None:
            self.kernel_radius = math.ceil(3 * self.gaussian_sigma_samples)
        if self.kernel_radius < 1:
            raise ValueError("kernel_radius must be >= 1")
        if self.silence_frame_ms <= 0:
            raise ValueError("silence_frame_ms must be positive")


def gaussian_kernel(sigma: float, radius: int) -> np.ndarray:
    n = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(n**2) / (2.0 * sigma**2))
    return k / k.sum()


def _reflect_index(i: int, n: int) -> int:
    # numpy-style 'reflect': mirror about the edge samples, period 2(n-1)
    if n == 1:
        return 0
    period = 2 * (n - 1)
    j = i % period
    return period - j if j >= n else j


def gaussian_denoise(clip: AudioClip, cfg: PreprocessConfig | None = None) -> AudioClip:
    """Convolve with a unit-sum Gaussian kernel, reflect-padded at the edges."""
    cfg = cfg or PreprocessConfig()
    radius = cfg.kernel_radius
    kernel = gaussian_kernel(cfg.gaussian_sigma_samples, radius)
    x = clip.samples
    n = len(x)
    idx = np.fromiter(
        (_reflect_index(i, n) for i in range(-radius, n + radius)), dtype=np.int64, count=n + 2 * radius
    )
    out = np.convolve(x[idx], kernel, mode="valid")
    return AudioClip(out, clip.sample_rate_hz)


def frame_rms(samples: np.ndarray, frame_len: int) -> np.ndarray:
    """RMS of consecutive frames; a trailing partial frame counts as a frame."""
    n_frames = math.ceil(len(samples) / frame_len)
    rms = np.empty(n_frames)
    for f in range(n_frames):
        chunk = samples[f * frame_len : (f + 1) * frame_len]
        rms[f] = math.sqrt(float(np.mean(chunk**2)))
    return rms


def trim_silence(clip: AudioClip, cfg: PreprocessConfig | None = None) -> AudioClip:
    """Drop leading/trailing frames quieter than threshold dB below the peak frame."""
    cfg = cfg or PreprocessConfig()
    frame_len = max(1, int(cfg.silence_frame_ms * clip.sample_rate_hz / 1000.0 + 0.5))
    rms = frame_rms(clip.samples, frame_len)
    peak = rms.max()
    if peak == 0.0:
        raise SilenceOnlyError("clip is all zeros")
    with np.errstate(divide="ignore"):
        rel_db = 20.0 * np.log10(rms / peak)
    loud = rel_db >= cfg.silence_threshold_db
    if not loud.any():
        raise SilenceOnlyError("no frame above silence threshold")
    first = int(np.argmax(loud))
    last = int(len(loud) - 1 - np.argmax(loud[::-1]))
    out = clip.samples[first * frame_len : min((last + 1) * frame_len, len(clip.samples))]
    return AudioClip(out.copy(), clip.sample_rate_hz)
