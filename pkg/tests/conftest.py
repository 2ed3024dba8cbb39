"""Shared fixtures: small problems assembled from the named benchmarks."""

from __future__ import annotations

import numpy as np
import pytest

from kwc_control.config import build_problem, spec_from_dict


@pytest.fixture(scope="session")
def smooth_problem():
    """Smooth eps = 0.1 benchmark: 32 cells, 32 steps, T = 0.2."""
    return build_problem(spec_from_dict({"benchmark": "smooth"}))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
