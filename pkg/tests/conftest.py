import numpy as np
import pytest
from hypothesis import settings

from rbvf.rbvf import RbvfModel

settings.register_profile("default", deadline=None)
settings.load_profile("default")


def frozen_model(locations, values, beta, low, high):
    """RbvfModel with no hidden layers and zero weights, so the readout is
    the same for every state and equals the given locations and values."""
    locations = np.atleast_2d(np.asarray(locations, dtype=np.float64))
    values = np.asarray(values, dtype=np.float64)
    n, d = locations.shape
    model = RbvfModel(1, d, n, beta, low, high, value_hidden=(), centroid_hidden=())
    params = model.init_params(np.random.default_rng(0))
    params["value.W0"][...] = 0.0
    params["value.b0"][...] = values
    params["centroid.W0"][...] = 0.0
    params["centroid.b0"][...] = np.arctanh((locations - model.box_mid) / model.box_half).reshape(-1)
    return model, params


@pytest.fixture
def two_centroid_1d():
    # locations {0, 1}, values {0, 1}, beta 1 on the box [-1, 2]
    return frozen_model([[0.0], [1.0]], [0.0, 1.0], 1.0, [-1.0], [2.0])


ACCEPTANCE_LINES = []


def report(criterion: str, passed: bool, detail: str):
    line = f"{criterion} {'PASS' if passed else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
