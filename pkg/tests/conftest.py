import numpy as np
import pytest

from molscat.filterbank import MorletParams, build_morlet_bank


@pytest.fixture(scope="session")
def bank6():
    return build_morlet_bank(MorletParams(J=6, L=8))


@pytest.fixture(scope="session")
def bank7():
    return build_morlet_bank(MorletParams(J=7, L=16))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
