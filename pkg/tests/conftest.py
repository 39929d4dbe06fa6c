import numpy as np
import pytest

from strokekit.model import CarrierSpec, ChannelLayout, PropagationParams, Recording
from strokekit.propagation import DEFAULT_AXES_SPLIT


def make_recording(scalars, sample_rate=2000.0, layout=None, split=None):
    """Recording whose channels carry the given scalar series on a fixed
    axis direction (one series per channel)."""
    split = np.asarray(DEFAULT_AXES_SPLIT if split is None else split)
    channels = np.stack([split[:, None] * np.asarray(s)[None, :] for s in scalars])
    layout = layout or ChannelLayout(
        positions=tuple(np.arange(len(scalars)) * 0.02)
    )
    return Recording(channels=channels, sample_rate=sample_rate, layout=layout)


def sine(freq, n, fs=2000.0, amp=1.0, phase=0.0):
    return amp * np.sin(2 * np.pi * freq * np.arange(n) / fs + phase)


@pytest.fixture(scope="session")
def default_params():
    return PropagationParams()


@pytest.fixture(scope="session")
def two_tone_carrier():
    return CarrierSpec(((125.0, 1.0), (250.0, 0.4)))
