import math

import numpy as np
import pytest

from percroute.lattice import SQRT2
from percroute.routing import Corridor


def make_corridor(length: float, width: float, c: float, origin=(0.0, 0.0), angle: float = 0.0) -> Corridor:
    """Corridor with an explicit frame, independent of any network scale."""
    axis = np.array([math.cos(angle), math.sin(angle)])
    perp = np.array([-axis[1], axis[0]])
    n = (0.5 * length) ** 2
    return Corridor(-1, -1, np.asarray(origin, dtype=float), axis, perp, length, width, c, 1.0, n)


def poisson_rectangle(rng, length: float, width: float, corridor: Corridor | None = None) -> np.ndarray:
    """Unit-intensity Poisson points on the corridor rectangle."""
    count = rng.poisson(length * width)
    u = rng.random(count) * length
    v = rng.random(count) * width
    if corridor is None:
        return np.column_stack((u, v))
    return corridor.origin + u[:, None] * corridor.axis + v[:, None] * corridor.perp


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


__all__ = ["make_corridor", "poisson_rectangle", "SQRT2"]
