from __future__ import annotations

import time

import pytest

from scl_regularity.exact import ExactSolution
from scl_regularity.staircase import BlowupParams, build_single_box


@pytest.fixture(scope="session")
def prop1_params():
    return BlowupParams(R=1.0, n_max=40)


@pytest.fixture(scope="session")
def prop1_solution(prop1_params):
    prof = build_single_box(prop1_params)
    return ExactSolution.from_profile(prof, prop1_params.flux(), prop1_params)


@pytest.fixture(scope="session")
def prop2_params():
    return BlowupParams(construction="prop2", R=1.0, n_max=40)


@pytest.fixture(scope="session")
def prop2_solution(prop2_params):
    prof = build_single_box(prop2_params)
    return ExactSolution.from_profile(prof, prop2_params.flux(), prop2_params)


@pytest.fixture(scope="session")
def besov_fits():
    """Three-truncation fits for eps = 1e-3; one scan per truncation serves every s."""
    from scl_regularity.seminorm import truncation_fit

    start = time.perf_counter()
    fits = truncation_fit(BlowupParams(eps=1e-3), [10**3, 10**4, 10**5], [0.4, 0.5, 0.6, 0.25])
    out = {f.s: f for f in fits}
    out["seconds"] = time.perf_counter() - start
    return out
