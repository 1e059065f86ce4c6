"""Counter-based random streams.

All stochastic code in the package draws from Philox streams keyed by
(seed, stream index). Streams are independent of each other and of
execution order, so trial i sees the same draws whether trials run
sequentially or on a worker pool.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Return the generator for stream `index` under master `seed`."""
    return np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, index & 0xFFFFFFFFFFFFFFFF]))


def unit_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Draw a point uniformly on the unit sphere in `dim` dimensions."""
    v = rng.normal(size=dim)
    n = np.linalg.norm(v)
    while n < 1e-12:  # astronomically rare, but keep the loop total
        v = rng.normal(size=dim)
        n = np.linalg.norm(v)
    return v / n
