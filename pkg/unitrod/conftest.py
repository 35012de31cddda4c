import os

import hypothesis
import numpy as np
import pytest

from unitrod.config import ToleranceConfig
from unitrod.graph_core import simple_graph
from unitrod.reduction import reduction_params

np.seterr(all="warn")

hypothesis.settings.register_profile("default", max_examples=25, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=100, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def tol():
    return ToleranceConfig()


@pytest.fixture(scope="session")
def params3():
    return reduction_params(3)


@pytest.fixture
def k3():
    return simple_graph(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def k4():
    return simple_graph(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
