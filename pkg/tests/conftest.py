import numpy as np
import pytest

from ehmm.core.model import ObsSeq, make_finite_model
from ehmm.core.rng import RngStream
from ehmm.models import TanhModelParams
from ehmm.services.pools import make_finite_kernel


@pytest.fixture
def toy_model():
    """Three hidden labels, two observation symbols, every entry positive."""
    return make_finite_model(
        init_probs=[0.5, 0.3, 0.2],
        trans_probs=[[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.3, 0.3, 0.4]],
        emit_probs=[[0.7, 0.3], [0.4, 0.6], [0.1, 0.9]],
        name="toy3",
    )


@pytest.fixture
def binary_model():
    """Two labels, two symbols."""
    return make_finite_model(
        init_probs=[0.6, 0.4],
        trans_probs=[[0.7, 0.3], [0.4, 0.6]],
        emit_probs=[[0.8, 0.2], [0.25, 0.75]],
        name="toy2",
    )


@pytest.fixture
def metropolis_kernel():
    """Reversible kernel leaving rho = (0.2, 0.5, 0.3) invariant."""
    rho = [0.2, 0.5, 0.3]
    r = [
        [0.0, 0.5, 0.5],
        [0.2, 0.5, 0.3],
        [1.0 / 3.0, 0.5, 1.0 / 6.0],
    ]
    return make_finite_kernel(rho, r, name="mh3")


@pytest.fixture
def cyclic_kernel():
    """Non-reversible kernel with uniform rho: mostly steps 0 -> 1 -> 2 -> 0."""
    rho = [1.0 / 3.0] * 3
    r = [
        [0.1, 0.9, 0.0],
        [0.0, 0.1, 0.9],
        [0.9, 0.0, 0.1],
    ]
    return make_finite_kernel(rho, r, name="cycle3")


@pytest.fixture
def binary_kernel():
    """Reversible two-label kernel with rho = (0.4, 0.6)."""
    return make_finite_kernel([0.4, 0.6], [[0.25, 0.75], [0.5, 0.5]], name="flip2")


@pytest.fixture
def obs_short():
    return ObsSeq(np.array([0, 1, 1], dtype=np.int64))


@pytest.fixture
def demo_params():
    return TanhModelParams(sigma=2.5, eta=2.5, tau=0.4)


@pytest.fixture
def rng():
    return RngStream(12345)
