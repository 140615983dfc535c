from __future__ import annotations

import pytest

from radoncert import instances


@pytest.fixture(scope="session")
def bundled():
    """All ten bundled certification instances, built once."""
    out = {}
    for i in range(5):
        out[f"nondeg-{i}"] = instances.nondegenerate_instance(i)
    for i in range(3):
        out[f"flat-{i}"] = instances.flat_hessian_instance(i)
    for i in range(2):
        out[f"dup-{i}"] = instances.duplicated_columns_instance(i)
    return out


@pytest.fixture(scope="session")
def nondeg0(bundled):
    return bundled["nondeg-0"]


@pytest.fixture(scope="session")
def flat0(bundled):
    return bundled["flat-0"]


@pytest.fixture(scope="session")
def dup0(bundled):
    return bundled["dup-0"]
