"""Pronunciation-analysis toolkit: audio in, features out, verdicts served."""

__version__ = "0.1.0"

from .audio_io import AudioClip, load_wav, resample, save_wav
from .errors import ArpaError

__all__ = ["AudioClip", "ArpaError", "load_wav", "resample", "save_wav", "__version__"]
