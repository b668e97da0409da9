"""Dyadic hierarchy on the sites ``0 .. 2**n - 1``.

The level-``r`` blocks are the contiguous runs of ``2**r`` sites, so the
block containing ``x`` is ``x >> r`` and the hierarchical distance between
two sites is the bit length of their XOR.
"""

import functools
from typing import List

import numpy as np

from .hierops import ArgumentError


class HierarchySpec(object):
    def __init__(self, n: int):
        if n < 0:
            raise ArgumentError("The hierarchy depth must be nonnegative, got {}".format(n))

        self.n = int(n)

    @property
    def volume(self):
        return 1 << self.n

    def check_site(self, x):
        if not 0 <= x < self.volume:
            raise ArgumentError(
                "Site {} is outside the volume 0..{}".format(x, self.volume - 1)
            )

    def check_level(self, r):
        if not 0 <= r <= self.n:
            raise ArgumentError("Level {} is outside 0..{}".format(r, self.n))

    def block_id(self, x, r):
        self.check_site(x)
        self.check_level(r)

        return x >> r

    def block_members(self, r, b):
        self.check_level(r)
        if not 0 <= b < 1 << (self.n - r):
            raise ArgumentError(
                "Block {} does not exist at level {} of depth {}".format(b, r, self.n)
            )

        return range(b << r, (b + 1) << r)

    def block_count(self, r):
        self.check_level(r)

        return 1 << (self.n - r)

    def ball(self, x, r):
        """B_r(x), the level-r block containing x."""
        return self.block_members(r, self.block_id(x, r))

    def hierarchical_distance(self, j, k):
        self.check_site(j)
        self.check_site(k)

        return (j ^ k).bit_length()

    def spine_decomposition(self, x):
        self.check_site(x)

        blocks = [range(x, x + 1)]
        for r in range(1, self.n + 1):
            sibling = self.block_id(x, r - 1) ^ 1
            blocks.append(self.block_members(r - 1, sibling))

        return SpineDecomposition(x, blocks)

    def __eq__(self, other):
        return isinstance(other, HierarchySpec) and self.n == other.n

    def __repr__(self):
        return "HierarchySpec(n={})".format(self.n)


class SpineDecomposition(object):
    """The sets X_0 = {x}, X_r = B_r(x) minus B_{r-1}(x) peeled off around x."""

    def __init__(self, center: int, blocks: List[range]):
        self.center = center
        self.blocks = blocks

    def label(self):
        labels = np.empty(sum(len(b) for b in self.blocks), dtype=int)
        for r, block in enumerate(self.blocks):
            labels[block.start : block.stop] = r

        return labels

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __getitem__(self, r):
        return self.blocks[r]


def block_id(x, r, n=None):
    if n is None:
        n = max(r, int(x).bit_length())

    return HierarchySpec(n).block_id(x, r)


def hierarchical_distance(j, k, n):
    return HierarchySpec(n).hierarchical_distance(j, k)


def block_members(r, b, n):
    return HierarchySpec(n).block_members(r, b)


def spine_decomposition(spec, x):
    return spec.spine_decomposition(x)


@functools.lru_cache(maxsize=16)
def _distance_matrix(n):
    sites = np.arange(1 << n)
    d = np.zeros((1 << n, 1 << n), dtype=np.int64)
    for r in range(n):
        d += (sites[:, None] >> r) != (sites[None, :] >> r)
    d.setflags(write=False)

    return d


def distance_matrix(n):
    """Read-only matrix of d(j, k) over the whole volume."""
    if n < 0:
        raise ArgumentError("The hierarchy depth must be nonnegative, got {}".format(n))

    return _distance_matrix(n)
