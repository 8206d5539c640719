import numpy as np
import pytest

from arpa.audio_io import AudioClip
from arpa.dataset import default_recipe, generate_synthetic_corpus


def make_tone(freq_hz, duration_s=1.0, rate_hz=16000, amp=0.5, phase=0.0):
    t = np.arange(int(duration_s * rate_hz)) / rate_hz
    return AudioClip(amp * np.sin(2 * np.pi * freq_hz * t + phase), rate_hz)


@pytest.fixture
def tone():
    return make_tone


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """3 letters x 2 labels x 12 clips; big enough for 4-fold CV in unit tests."""
    root = tmp_path_factory.mktemp("corpus")
    return generate_synthetic_corpus(default_recipe(), n_per_cell=12, seed=7, out_dir=root)
