"""Spectral feature extraction: pre-emphasis, framed Hamming windowing,
FFT magnitudes, mel filterbank, log-mel spectrogram, and MFCC via DCT-II.

Conventions (all are the usual speech-processing choices):
  * periodic Hamming window w(n) = 0.54 - 0.46 cos(2 pi n / N), n = 0..N-1
  * frames are zero-padded to the next power of two before the FFT; the
    padded length travels with the Spectrum and the filterbank is built
    against it
  * the filterbank sees the power spectrum |S|^2; log is natural with a
    1e-10 floor
  * DCT-II is orthonormal, so n_mfcc = n_mels round-trips exactly
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from .audio_io import AudioClip
from .errors import ArpaError
from .preprocess import gaussian_denoise, trim_silence

if TYPE_CHECKING:
    from .config import PipelineConfig

LOG_FLOOR = 1e-10


class ClipTooShortError(ArpaError):
    """Clip has fewer samples than one analysis frame."""


class TooManyFiltersError(ArpaError):
    """Adjacent mel filter centers collapsed onto the same FFT bin."""


class ShapeMismatchError(ArpaError):
    """Filterbank and spectrum disagree on the number of FFT bins."""


class NotMelInputError(ArpaError):
    """MFCC requires a mel-spectrogram FeatureMatrix."""


class FeatureFileError(ArpaError):
    """Feature file is corrupt or has an unsupported version."""


class FeatureKind(Enum):
    MEL_SPECTROGRAM = 0
    MFCC = 1


@dataclass
class FrameSpec:
    frame_ms: float = 25.0
    hop_ms: float = 10.0

    def __post_init__(self):
        if not 20.0 < self.frame_ms < 40.0:
            raise ValueError("frame_ms must lie strictly between 20 and 40 ms")
        if not 0.0 < self.hop_ms <= self.frame_ms:
            raise ValueError("hop_ms must be in (0, frame_ms]")

    def frame_samples(self, rate_hz: int) -> int:
        return int(self.frame_ms * rate_hz / 1000.0 + 0.5)

    def hop_samples(self, rate_hz: int) -> int:
        return max(1, int(self.hop_ms * rate_hz / 1000.0 + 0.5))


@dataclass
class WindowedFrames:
    frames: np.ndarray  # (F, N), already windowed
    window: np.ndarray  # (N,)
    sample_rate_hz: int
    hop: int


@dataclass
class Spectrum:
    magnitudes: np.ndarray  # (F, fft_length // 2 + 1)
    fft_length: int
    sample_rate_hz: int


@dataclass
class MelFilterbank:
    weights: np.ndarray  # (M, fft_length // 2 + 1)
    center_hz: np.ndarray  # (M,), strictly increasing
    low_hz: float
    high_hz: float
    fft_length: int
    sample_rate_hz: int


@dataclass
class FeatureMatrix:
    values: np.ndarray  # (F, C)
    kind: FeatureKind

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ValueError("FeatureMatrix must be a non-empty 2-D matrix")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("FeatureMatrix entries must be finite")


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def hamming_window(n: int) -> np.ndarray:
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(n) / n)


def next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


def pre_emphasize(clip: AudioClip, alpha: float = 0.97) -> AudioClip:
    """First-order high-pass: y[n] = x[n] - alpha * x[n-1], y[0] = x[0]."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must be in [0, 1)")
    x = clip.samples
    y = np.empty_like(x)
    y[0] = x[0]
    y[1:] = x[1:] - alpha * x[:-1]
    return AudioClip(y, clip.sample_rate_hz)


def frame_and_window(clip: AudioClip, spec: FrameSpec | None = None) -> WindowedFrames:
    spec = spec or FrameSpec()
    n = spec.frame_samples(clip.sample_rate_hz)
    hop = spec.hop_samples(clip.sample_rate_hz)
    t = len(clip.samples)
    if t < n:
        raise ClipTooShortError(f"{t} samples < one {n}-sample frame")
    n_frames = (t - n) // hop + 1
    window = hamming_window(n)
    starts = np.arange(n_frames) * hop
    frames = clip.samples[starts[:, None] + np.arange(n)] * window
    return WindowedFrames(frames, window, clip.sample_rate_hz, hop)


def magnitude_spectrum(frames: WindowedFrames) -> Spectrum:
    """Per-frame FFT magnitudes for bins 0..P/2, frames zero-padded to P = next pow2."""
    n = frames.frames.shape[1]
    p = next_pow2(n)
    mags = np.abs(np.fft.rfft(frames.frames, n=p, axis=1))
    return Spectrum(mags, p, frames.sample_rate_hz)


def build_mel_filterbank(
    n_filters: int,
    n_fft: int,
    rate_hz: int,
    low_hz: float = 0.0,
    high_hz: float | None = None,
) -> MelFilterbank:
    """Triangular filters with mel-equispaced centers, each peaking at 1.0."""
    if high_hz is None:
        high_hz = rate_hz / 2.0
    if not 0.0 <= low_hz < high_hz <= rate_hz / 2.0:
        raise ValueError("need 0 <= low_hz < high_hz <= rate/2")
    if n_filters < 1:
        raise ValueError("n_filters must be >= 1")
    pts_hz = mel_to_hz(np.linspace(hz_to_mel(low_hz), hz_to_mel(high_hz), n_filters + 2))
    bins = np.floor((n_fft + 1) * pts_hz / rate_hz).astype(int)
    if np.any(np.diff(bins) < 1):
        raise TooManyFiltersError(f"{n_filters} filters collapse on a {n_fft}-point FFT at {rate_hz} Hz")
    n_bins = n_fft // 2 + 1
    weights = np.zeros((n_filters, n_bins))
    for m in range(1, n_filters + 1):
        lo, center, hi = bins[m - 1], bins[m], bins[m + 1]
        for k in range(lo + 1, center):
            weights[m - 1, k] = (k - lo) / (center - lo)
        for k in range(center + 1, hi):
            weights[m - 1, k] = (hi - k) / (hi - center)
        weights[m - 1, center] = 1.0
    # realized centers: peak-bin frequencies after snapping to the FFT grid
    center_hz = bins[1:-1] * rate_hz / n_fft
    return MelFilterbank(weights, center_hz.astype(np.float64), low_hz, high_hz, n_fft, rate_hz)


def mel_spectrogram(spectrum: Spectrum, fb: MelFilterbank) -> FeatureMatrix:
    """Log of filterbank energies over the power spectrum, floored at 1e-10."""
    if fb.weights.shape[1] != spectrum.magnitudes.shape[1]:
        raise ShapeMismatchError(
            f"filterbank has {fb.weights.shape[1]} bins, spectrum has {spectrum.magnitudes.shape[1]}"
        )
    energies = spectrum.magnitudes**2 @ fb.weights.T
    return FeatureMatrix(np.log(energies + LOG_FLOOR), FeatureKind.MEL_SPECTROGRAM)


def dct_matrix(m: int) -> np.ndarray:
    """Orthonormal DCT-II matrix, (m, m); row k dotted with a frame gives coeff k."""
    k = np.arange(m)[:, None]
    j = np.arange(m)[None, :]
    d = np.sqrt(2.0 / m) * np.cos(np.pi * k * (2 * j + 1) / (2 * m))
    d[0] /= np.sqrt(2.0)
    return d


def mfcc(mel: FeatureMatrix, n_mfcc: int = 13) -> FeatureMatrix:
    """Keep the first n_mfcc orthonormal DCT-II coefficients of each log-mel frame."""
    if mel.kind is not FeatureKind.MEL_SPECTROGRAM:
        raise NotMelInputError("mfcc() expects a mel-spectrogram input")
    m = mel.values.shape[1]
    if not 1 <= n_mfcc <= m:
        raise ValueError("n_mfcc must be in [1, n_mels]")
    coeffs = mel.values @ dct_matrix(m).T
    return FeatureMatrix(coeffs[:, :n_mfcc], FeatureKind.MFCC)


def extract_features(clip: AudioClip, cfg: "PipelineConfig | None" = None) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Full deterministic pipeline: denoise -> trim -> pre-emphasis -> frames ->
    spectrum -> mel -> MFCC. Returns (mel, mfcc)."""
    if cfg is None:
        from .config import PipelineConfig

        cfg = PipelineConfig()
    pre = trim_silence(gaussian_denoise(clip, cfg.preprocess), cfg.preprocess)
    emphasized = pre_emphasize(pre, cfg.pre_emphasis_alpha)
    frames = frame_and_window(emphasized, cfg.frames)
    spectrum = magnitude_spectrum(frames)
    fb = build_mel_filterbank(
        cfg.n_mels, spectrum.fft_length, clip.sample_rate_hz, cfg.mel_low_hz, cfg.mel_high_hz
    )
    mel = mel_spectrogram(spectrum, fb)
    return mel, mfcc(mel, cfg.n_mfcc)


# --- feature file formats -------------------------------------------------

ARPF_MAGIC = b"ARPF"
ARPF_VERSION = 1


def write_feature_file(m: FeatureMatrix, path) -> None:
    """Self-describing binary: magic, version u16, kind u8, F u32, C u32,
    then row-major float64, all little-endian."""
    f, c = m.values.shape
    header = ARPF_MAGIC + struct.pack("<HBII", ARPF_VERSION, m.kind.value, f, c)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(m.values.astype("<f8").tobytes())
    os.replace(tmp, path)


def read_feature_file(path) -> FeatureMatrix:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != ARPF_MAGIC:
        raise FeatureFileError("bad magic")
    version, kind, f, c = struct.unpack_from("<HBII", data, 4)
    if version != ARPF_VERSION:
        raise FeatureFileError(f"unsupported version {version}")
    body = data[15:]
    if len(body) != 8 * f * c:
        raise FeatureFileError("payload size does not match header")
    values = np.frombuffer(body, dtype="<f8").reshape(f, c)
    return FeatureMatrix(values.copy(), FeatureKind(kind))


def write_feature_csv(m: FeatureMatrix, path) -> None:
    """Debug export: one comment line with shape/kind, then one row per frame."""
    f, c = m.values.shape
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(f"# kind={m.kind.name.lower()} frames={f} coeffs={c}\n")
        for row in m.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    os.replace(tmp, path)
