import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from algmech.algebroid import GeneralizedLieAlgebroid, GHMorphism, SamplePlan
from algmech.catalog import build_builtin
from algmech.smoothfn import ConstantMap, ExprMap, IdentityMap
from algmech.specfile import so3_structure

settings.register_profile(
    "algmech", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("algmech")


@functools.lru_cache(maxsize=None)
def catalog(pid, params=()):
    return build_builtin(pid, list(params))


def algebroid(m, r, rho=None, lstruct=None, h=None, eta=None):
    """Algebroid from numpy constants or ready-made maps."""
    def as_map(v, shape):
        if v is None:
            return ConstantMap(np.zeros(shape), m)
        if isinstance(v, np.ndarray):
            return ConstantMap(v, m)
        return v
    return GeneralizedLieAlgebroid(
        m, r, as_map(rho, (m, r)), as_map(lstruct, (r, r, r)),
        h if h is not None else IdentityMap(m), eta if eta is not None else IdentityMap(m))


def tangent(m):
    return algebroid(m, m, rho=np.eye(m))


def so3_point_like():
    return algebroid(3, 3, rho=np.zeros((3, 3)), lstruct=so3_structure())


def exprs(src, m, r):
    return ExprMap.from_strings(src, m, r)


@pytest.fixture
def plan8():
    return SamplePlan(seed=3, count=8)


@pytest.fixture
def identity_gh():
    return GHMorphism.identity
