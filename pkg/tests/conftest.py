import numpy as np
import pytest

from otfs_lab.modem import generate_frame
from otfs_lab.params import OtfsParams, load_params


@pytest.fixture(scope="session")
def isi_params():
    return load_params("isi-regime")


@pytest.fixture(scope="session")
def ici_params():
    return load_params("ici-regime")


@pytest.fixture(scope="session")
def small_params():
    # N = M = 8 keeps dense-matrix oracles cheap; T_cp = 4 T allows ISI-range delays
    df = 1e6
    return OtfsParams(8, 8, df, 4 / df, 60e9)


@pytest.fixture
def isi_frame(isi_params):
    return generate_frame(isi_params, 1234)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
