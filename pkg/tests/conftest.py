import numpy as np
import pytest

from neurodyn.armsim import ReachScript, generate_reaches
from neurodyn.trialdata import ChannelKind, ChannelSpec, TrialSet


def series_set(x, name="x", rate=1.0):
    """Single-channel TrialSet from a 1-D series or a (trials, samples) array."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return TrialSet(x[:, :, None], [name], rate)


def logistic_map(n, r=3.9, x0=0.4):
    x = np.empty(n)
    x[0] = x0
    for i in range(1, n):
        x[i] = r * x[i - 1] * (1 - x[i - 1])
    return x


@pytest.fixture
def small_set():
    data = np.arange(2 * 3 * 2, dtype=float).reshape(2, 3, 2) / 7.0
    chans = [
        ChannelSpec("biceps", ChannelKind.EMG_ENVELOPE, "normalized"),
        ChannelSpec("triceps", ChannelKind.EMG_ENVELOPE, "normalized"),
    ]
    return TrialSet(data, chans, 200.0)


@pytest.fixture(scope="session")
def reaches():
    return generate_reaches(ReachScript(trials=46, seed=11))
