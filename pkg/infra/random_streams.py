# infra/random_streams.py
"""
Counter-based random streams.

Every stream is a Philox generator keyed by (global seed, *keys). The same key
always yields the same sequence, whatever order streams are created in, so row
selection and data generation are reproducible and scheduling-independent.

Normal and logistic variates are produced by inverse CDF of Philox uniforms
(scipy.special.ndtri / logit), not by numpy's ziggurat sampler.
"""
from typing import Union

import numpy as np
from scipy.special import logit, ndtri

Key = Union[int, str]

# Uniforms are kept strictly inside (0, 1) so the inverse CDFs stay finite.
_U_FLOOR = 2.0 ** -54


def _as_int(key: Key) -> int:
    if isinstance(key, str):
        # Stable across processes, unlike hash().
        return int.from_bytes(key.encode("utf-8"), "little") % (2 ** 63)
    return int(key)


def stream(seed: int, *keys: Key) -> np.random.Generator:
    """Philox generator for the (seed, *keys) counter space."""
    entropy = [_as_int(seed)] + [_as_int(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def uniforms(gen: np.random.Generator, size) -> np.ndarray:
    return np.clip(gen.random(size), _U_FLOOR, 1.0 - _U_FLOOR)


def normals(gen: np.random.Generator, size) -> np.ndarray:
    """Standard normal variates by inverse CDF."""
    return ndtri(uniforms(gen, size))


def logistics(gen: np.random.Generator, size) -> np.ndarray:
    """Standard logistic variates by inverse CDF."""
    return logit(uniforms(gen, size))
