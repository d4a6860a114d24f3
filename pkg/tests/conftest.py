import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from lib.lie_catalog import GroupSpec, build_representation, random_algebra_element  # noqa: E402
from lib.tensor_core import expm  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def rep_of(family, n=1):
    return build_representation(GroupSpec(family, n))


def random_element(rep, rng, scale=1.0):
    """exp of a random Lie-algebra element, in the defining realization."""
    return expm(random_algebra_element(rep, rng, scale)).data


def random_coeff(rep, rng):
    d = rep.dim
    return rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
