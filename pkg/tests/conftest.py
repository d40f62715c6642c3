import numpy as np
import pytest

from emgkit.core import Recording, default_channel_ids


def make_recording(samples, fs=2000.0, label=None):
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    return Recording(fs, default_channel_ids(x.shape[0]), x, label)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Eight-per-class synthetic corpus shared by the CLI and pipeline tests."""
    from emgkit.synth import SynthSpec, generate_corpus
    out = tmp_path_factory.mktemp("corpus")
    return generate_corpus(SynthSpec(), 8, out, seed=7)
