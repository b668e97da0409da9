"""Reproducible per-realization random streams.

The stream for realization ``i`` is keyed by ``(master seed, i, path)``,
where ``path`` names the sub-stream (for example ``("potential",)`` or
``("level", 3)``). Keys are folded together with the splitmix64 finalizer
and the result seeds a ``numpy.random.Generator``. Two runs with the same
master seed therefore see identical draws for every realization no matter
how realizations are distributed over workers.
"""

import numpy as np

_MASK = (1 << 64) - 1


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def _path_key(part):
    if isinstance(part, int):
        return part & _MASK

    key = 0
    for byte in str(part).encode("utf-8"):
        key = _splitmix64(key ^ byte)
    return key


def stream_key(seed, index, *path):
    key = _splitmix64(seed & _MASK)
    key = _splitmix64(key ^ (index & _MASK))
    for part in path:
        key = _splitmix64(key ^ _path_key(part))

    return key


def generator(seed, index=0, *path):
    return np.random.default_rng(stream_key(seed, index, *path))
