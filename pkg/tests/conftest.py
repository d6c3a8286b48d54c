import os
import sys

import hypothesis
import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from reslab.background import build_background
from reslab.instances import instance_family, worked_instance
from reslab.states import all_states, direct_problem

hypothesis.settings.register_profile("default", max_examples=40, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=8, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def worked():
    return worked_instance()


@pytest.fixture(scope="session")
def worked_prob(worked):
    return direct_problem(worked.bg, worked.pert)


@pytest.fixture(scope="session")
def worked_states(worked_prob):
    return all_states(worked_prob)


@pytest.fixture(scope="session")
def family():
    """20 random instances with their direct problems and states."""
    out = []
    for inst in instance_family(20):
        prob = direct_problem(inst.bg, inst.pert)
        out.append((inst, prob, all_states(prob)))
    return out


@pytest.fixture(scope="session")
def free_bg():
    return build_background(2, (1.0, 1.0), (0.0, 0.0))


@pytest.fixture(scope="session")
def edge_dirichlet_bg():
    return build_background(2, (1.0, 1.0), (1.0, -1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
