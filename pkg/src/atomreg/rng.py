"""Deterministic random streams for experiments.

Reproducibility contract: every randomized run is a pure function of
(root seed, stream index).  Streams are built on the Philox counter-based
bit generator, keyed by the pair, so stream ``i`` of seed ``s`` yields the
same draws no matter how many other streams were consumed, in which order,
or on how many workers.

Normal variates are produced by an explicit Box-Muller transform on the
uniform stream rather than the generator's native method, so the sequence
is pinned to the uniform bits and does not depend on the numpy version's
ziggurat tables.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream", "normals", "uniforms"]


def stream(root_seed: int, stream_index: int = 0) -> np.random.Generator:
    """Independent replayable generator for one (seed, stream) pair."""
    if root_seed < 0 or stream_index < 0:
        raise ValueError("seed and stream index must be non-negative")
    key = np.array([root_seed, stream_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def uniforms(gen: np.random.Generator, low: float, high: float, n: int) -> np.ndarray:
    """n uniforms on [low, high)."""
    return gen.uniform(low, high, size=n)


def normals(gen: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    """n zero-mean normals with standard deviation ``scale`` via Box-Muller.

    Consumes exactly 2*ceil(n/2) uniforms.  log1p(-u) keeps the argument
    strictly negative for u in [0, 1), so no draw can produce log(0).
    """
    m = (n + 1) // 2
    u1 = gen.random(m)
    u2 = gen.random(m)
    r = np.sqrt(-2.0 * np.log1p(-u1))
    theta = (2.0 * np.pi) * u2
    z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
    return scale * z
