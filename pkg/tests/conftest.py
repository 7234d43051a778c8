import numpy as np
import pytest

from seqci import MUSEC_DATA, MUSEC_DESIGN, analyze_trial


@pytest.fixture(scope="session")
def musec_trial():
    return analyze_trial(MUSEC_DESIGN, MUSEC_DATA)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)


def make_rng(*key):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=1234, spawn_key=key)))
