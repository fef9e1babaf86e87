import functools

import numpy as np
import pytest

from rtmg import multigrid as mg
from rtmg.mesh import build_hierarchy
from rtmg.norms import make_problem
from rtmg.spaces import DGSpace, RTSpace


@functools.lru_cache(maxsize=None)
def hierarchy(domain, max_level):
    return build_hierarchy(domain, max_level)


@functools.lru_cache(maxsize=None)
def spaces(domain, level):
    mesh = hierarchy(domain, level)[level]
    return RTSpace(mesh), DGSpace(mesh)


@functools.lru_cache(maxsize=None)
def mg_state(domain="square", problem="darcy", max_level=3, kind=None):
    return mg.setup(hierarchy(domain, max_level), make_problem(domain, problem), kind=kind)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
