import numpy as np
import pytest

from epsteer import (
    LoopEigensystems,
    build_loop,
    default_loop_spec,
    orient,
    two_level_family,
)
from epsteer import _kernels


@pytest.fixture(scope="session")
def family():
    return two_level_family()


@pytest.fixture(scope="session")
def loop():
    return build_loop(default_loop_spec())


@pytest.fixture(scope="session")
def cache_ccw(loop, family):
    return LoopEigensystems.build(orient(loop, "ccw"), family)


@pytest.fixture(scope="session")
def cache_cw(loop, family):
    return LoopEigensystems.build(orient(loop, "cw"), family)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels(cache_ccw):
    # trigger JIT compilation outside any timed section
    dwells = np.zeros(cache_ccw.n_intervals)
    c0 = np.array([1.0 + 0.0j, 0.0j])
    _kernels.propagate_coeffs(
        cache_ccw.transfer, cache_ccw.omegas, cache_ccw.right, dwells, c0
    )
    _kernels.propagate_end_batch(
        cache_ccw.transfer, cache_ccw.omegas, dwells[None, :], c0
    )
