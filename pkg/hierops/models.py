import logging
import math
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg

from . import constants
from .hierarchy import HierarchySpec, distance_matrix
from .hierops import ArgumentError, CapacityError, ConfigurationError, ModelFamily
from .potentials import PotentialSpec

logger = logging.getLogger("hierops")


class LaplacianSpec(object):
    """Couplings of the hierarchical Laplacian.

    By default ``p_r = eps * 2**(-c*r)`` for ``1 <= r <= n``. An explicit
    ``couplings`` sequence ``p_1 .. p_n`` overrides the formula, and
    ``levels`` truncates the operator by zeroing every coupling above it.
    """

    def __init__(
        self,
        n: int,
        eps: float = 1.0,
        c: float = 1.0,
        couplings: Optional[Sequence[float]] = None,
        levels: Optional[int] = None,
    ):
        self.hierarchy = HierarchySpec(n)
        self.eps = eps
        self.c = c

        if couplings is not None and len(couplings) != n:
            raise ConfigurationError(
                "Expected {} couplings p_1..p_{}, got {}".format(n, n, len(couplings))
            )
        if levels is not None and not 0 <= levels <= n:
            raise ConfigurationError(
                "The truncation level must lie in 0..{}, got {}".format(n, levels)
            )

        self.couplings = None if couplings is None else [float(p) for p in couplings]
        self.levels = levels

    @property
    def n(self):
        return self.hierarchy.n

    def coupling(self, r):
        if r < 1 or r > self.n or (self.levels is not None and r > self.levels):
            return 0.0
        if self.couplings is not None:
            return self.couplings[r - 1]

        return self.eps * 2.0 ** (-self.c * r)

    def coupling_array(self):
        return np.array([self.coupling(r) for r in range(1, self.n + 1)])

    def __repr__(self):
        return "LaplacianSpec(n={}, eps={}, c={}, couplings={}, levels={})".format(
            self.n, self.eps, self.c, self.couplings, self.levels
        )


class ModelSpec(object):
    def __init__(
        self,
        family: ModelFamily,
        laplacian: Optional[LaplacianSpec] = None,
        potential: Optional[PotentialSpec] = None,
        n: Optional[int] = None,
        c: Optional[float] = None,
        N: Optional[int] = None,
        dense_cap: int = constants.OPTION_DEFAULTS["dense-cap"],
    ):
        self.family = family
        self.laplacian = laplacian
        self.potential = potential
        self.c = c
        self.N = N
        self.dense_cap = dense_cap

        if family in (ModelFamily.LAPLACIAN, ModelFamily.ANDERSON):
            if laplacian is None:
                raise ConfigurationError("The {} model needs couplings.".format(family.value))
            self.n = laplacian.n
            self.c = laplacian.c
        elif family is ModelFamily.ULTRAMETRIC:
            if n is None or n < 0 or c is None:
                raise ConfigurationError("The ultrametric model needs n >= 0 and c.")
            self.n = n
        else:
            if N is None or N < 1 or c is None:
                raise ConfigurationError("The Rosenzweig-Porter model needs N >= 1 and c.")
            self.n = int(N - 1).bit_length() if N > 1 else 0

        if family in (ModelFamily.ANDERSON, ModelFamily.ROSENZWEIG_PORTER) and potential is None:
            raise ConfigurationError("The {} model needs a potential.".format(family.value))

    @classmethod
    def laplacian_model(cls, spec, **kwargs):
        return cls(ModelFamily.LAPLACIAN, laplacian=spec, **kwargs)

    @classmethod
    def anderson(cls, spec, potential, **kwargs):
        return cls(ModelFamily.ANDERSON, laplacian=spec, potential=potential, **kwargs)

    @classmethod
    def ultrametric(cls, n, c, **kwargs):
        return cls(ModelFamily.ULTRAMETRIC, n=n, c=c, **kwargs)

    @classmethod
    def rosenzweig_porter(cls, N, c, potential, **kwargs):
        return cls(ModelFamily.ROSENZWEIG_PORTER, N=N, c=c, potential=potential, **kwargs)

    @property
    def dimension(self):
        if self.family is ModelFamily.ROSENZWEIG_PORTER:
            return self.N

        return 1 << self.n

    @property
    def hierarchy(self):
        if self.family is ModelFamily.ROSENZWEIG_PORTER and self.N != 1 << self.n:
            raise ArgumentError(
                "The Rosenzweig-Porter model has no hierarchy for N={}, "
                "which is not a power of two".format(self.N)
            )

        return HierarchySpec(self.n)

    def check_capacity(self):
        if self.dimension > 1 << self.dense_cap:
            raise CapacityError(
                "Refusing to build a dense {0}x{0} matrix; the cap is 2^{1}".format(
                    self.dimension, self.dense_cap
                )
            )

    def sample_blocks(self, rng=None):
        self.check_capacity()

        if self.family is ModelFamily.LAPLACIAN:
            return laplacian_blocks(self.laplacian)
        if self.family is ModelFamily.ANDERSON:
            return anderson_blocks(self.laplacian, self.potential, rng)
        if self.family is ModelFamily.ULTRAMETRIC:
            return ultrametric_blocks(self.n, self.c, rng)

        return rosenzweig_porter_blocks(self.N, self.c, self.potential, rng)

    def build(self, rng=None):
        return assemble(self.sample_blocks(rng))

    def describe(self):
        if self.family in (ModelFamily.LAPLACIAN, ModelFamily.ANDERSON):
            desc = "{} n={} eps={} c={}".format(
                self.family.value, self.n, self.laplacian.eps, self.laplacian.c
            )
        elif self.family is ModelFamily.ULTRAMETRIC:
            desc = "ultrametric n={} c={}".format(self.n, self.c)
        else:
            desc = "rosenzweig-porter N={} c={}".format(self.N, self.c)

        if self.potential is not None:
            desc += " potential={}".format(self.potential.kind)

        return desc


class Realization(object):
    """The level terms H(B) of one sampled operator.

    ``levels`` holds one ``(level, blocks)`` pair per nonzero level, with
    ``blocks`` of shape ``(count, size, size)``. A count of one against more
    than one block position means the same block sits at every position.
    """

    def __init__(self, dimension: int, levels: List):
        self.dimension = dimension
        self.levels = levels

    def block_size(self, r):
        return self.blocks_at(r).shape[1]

    def blocks_at(self, r):
        for level, blocks in self.levels:
            if level == r:
                return blocks

        return None


def _place(target, blocks, positions=None):
    size = blocks.shape[1]
    count = target.shape[0] // size
    view = target.reshape(count, size, count, size)
    idx = np.arange(count) if positions is None else np.asarray(positions)
    if len(idx) == 0:
        return

    if blocks.shape[0] == 1:
        view[idx, :, idx, :] += blocks
    else:
        view[idx, :, idx, :] += blocks[idx]


def assemble(realization: Realization):
    H = np.zeros((realization.dimension, realization.dimension))
    for _, blocks in realization.levels:
        _place(H, blocks)

    return H


def block_operator(realization: Realization, r, b):
    """H(B) for the b-th level-r block, as a size x size matrix."""
    blocks = realization.blocks_at(r)
    size = 1 << r if blocks is None else blocks.shape[1]
    count = realization.dimension // size
    if not 0 <= b < count:
        raise ArgumentError("Block {} does not exist at level {}".format(b, r))
    if blocks is None:
        return np.zeros((size, size))

    return blocks[0 if blocks.shape[0] == 1 else b].copy()


def laplacian_blocks(spec: LaplacianSpec):
    levels = []
    for r in range(1, spec.n + 1):
        p = spec.coupling(r)
        if p != 0:
            size = 1 << r
            levels.append((r, np.full((1, size, size), p / size)))

    return Realization(spec.hierarchy.volume, levels)


def anderson_blocks(spec: LaplacianSpec, potential: PotentialSpec, rng):
    volume = spec.hierarchy.volume
    V = sample_potential(potential, volume, rng)
    realization = laplacian_blocks(spec)
    realization.levels.insert(0, (0, V.reshape(volume, 1, 1)))

    return realization


def goe_blocks(count, size, rng):
    """``count`` independent real symmetric Gaussian blocks.

    Diagonal entries have variance 2 and off-diagonal entries variance 1.
    """
    A = rng.standard_normal((count, size, size))

    return (A + A.transpose(0, 2, 1)) / math.sqrt(2)


def ultrametric_level_scale(r, c):
    return math.sqrt(2.0 ** (-r)) * 2.0 ** (-(1 + c) * r / 2)


def ultrametric_blocks(n, c, rng):
    levels = []
    for r in range(n + 1):
        size = 1 << r
        blocks = goe_blocks(1 << (n - r), size, rng) * ultrametric_level_scale(r, c)
        levels.append((r, blocks))

    return Realization(1 << n, levels)


def rosenzweig_porter_blocks(N, c, potential: PotentialSpec, rng):
    t = N ** (-(1 + c))
    V = sample_potential(potential, N, rng)
    phi = goe_blocks(1, N, rng) * math.sqrt(t / N)
    top = int(N - 1).bit_length() if N > 1 else 0

    levels = [(0, V.reshape(N, 1, 1))]
    if N == 1:
        levels = [(0, V.reshape(1, 1, 1) + phi)]
    else:
        levels.append((top, phi))

    return Realization(N, levels)


def laplacian_entry(spec: LaplacianSpec, j, k):
    d = spec.hierarchy.hierarchical_distance(j, k)

    return sum(spec.coupling(r) * 2.0 ** (-r) for r in range(max(d, 1), spec.n + 1))


def laplacian_spectrum(spec: LaplacianSpec):
    """Closed-form eigenvalues E_0..E_n of the Laplacian and their multiplicities."""
    n = spec.n
    if n == 0:
        return np.zeros(1), np.ones(1, dtype=int)

    values = np.concatenate([[0.0], np.cumsum(spec.coupling_array())])
    multiplicities = np.array([1 << (n - 1)] + [1 << (n - r - 1) for r in range(1, n)] + [1])

    return values, multiplicities


def build_laplacian(spec: LaplacianSpec, dense_cap=constants.OPTION_DEFAULTS["dense-cap"]):
    return ModelSpec.laplacian_model(spec, dense_cap=dense_cap).build()


def sample_potential(spec: PotentialSpec, count, rng):
    return spec.sample(count, rng)


def build_anderson(
    spec: LaplacianSpec,
    potential: PotentialSpec,
    rng,
    dense_cap=constants.OPTION_DEFAULTS["dense-cap"],
):
    return ModelSpec.anderson(spec, potential, dense_cap=dense_cap).build(rng)


def build_ultrametric(n, c, rng, dense_cap=constants.OPTION_DEFAULTS["dense-cap"]):
    return ModelSpec.ultrametric(n, c, dense_cap=dense_cap).build(rng)


def build_rosenzweig_porter(
    N, c, potential: PotentialSpec, rng, dense_cap=constants.OPTION_DEFAULTS["dense-cap"]
):
    return ModelSpec.rosenzweig_porter(N, c, potential, dense_cap=dense_cap).build(rng)


def ultrametric_entry_variance(n, c, dist):
    if not 0 <= dist <= n:
        raise ArgumentError("Distance {} is outside 0..{}".format(dist, n))

    q = 2.0 ** (-(2 + c))
    total = sum(q**r for r in range(dist, n + 1))

    return 2 * total if dist == 0 else total


def ultrametric_variance_matrix(n, c):
    variances = np.array([ultrametric_entry_variance(n, c, d) for d in range(n + 1)])

    return variances[distance_matrix(n)]


def scale_diagnostics(n, c):
    """Z, the expected norm of a column of H_n, and M, the inverse largest entry variance."""
    var0 = ultrametric_entry_variance(n, c, 0)
    z_squared = var0 + sum(
        (1 << (d - 1)) * ultrametric_entry_variance(n, c, d) for d in range(1, n + 1)
    )

    return math.sqrt(z_squared), 1 / var0


def rescaled_ultrametric(H, n, c):
    Z, _ = scale_diagnostics(n, c)

    return H / Z


def ultrametric_block_trace_bounds(r, c):
    """Upper bounds on the mean trace norm of a level-r ultrametric block term.

    Returns ``(|B|**((1-c)/2), sqrt(|B| * E tr H(B)**2))``. The second is the
    exact Cauchy-Schwarz and Jensen bound for the block normalization used
    here; the first drops the ``(|B|+1)/|B|`` factor.
    """
    size = 2.0**r

    return size ** ((1 - c) / 2), math.sqrt(size * size ** (-(1 + c)) * (size + 1))


def trace_norm(A):
    return float(np.sum(np.abs(scipy.linalg.eigvalsh(A))))


def spine_operator(spec: ModelSpec, x, realization: Realization):
    """Split H into S, built from the blocks containing x, and F = H - S.

    F is assembled from the remaining blocks only, so entries of F joining
    two different spine sets are never written.
    """
    hierarchy = spec.hierarchy
    hierarchy.check_site(x)

    S = np.zeros((realization.dimension, realization.dimension))
    F = np.zeros_like(S)
    for _, blocks in realization.levels:
        size = blocks.shape[1]
        count = realization.dimension // size
        own = x // size

        _place(S, blocks, [own])
        _place(F, blocks, [b for b in range(count) if b != own])

    return S, F


def model_from_dict(model, dense_cap=constants.OPTION_DEFAULTS["dense-cap"]):
    """Build a ModelSpec from the ``model`` section of a run configuration."""
    family = ModelFamily.values_dict().get(model.get("family"))
    if family is None:
        raise ConfigurationError(
            "Unknown model family {!r}; expected one of {}".format(
                model.get("family"), ", ".join(ModelFamily.all_values())
            )
        )

    potential = model.get("potential")
    if isinstance(potential, dict):
        potential = PotentialSpec(potential["name"], potential.get("options"))
    elif isinstance(potential, str):
        potential = PotentialSpec.parse(potential)

    if family in (ModelFamily.LAPLACIAN, ModelFamily.ANDERSON):
        spec = LaplacianSpec(
            _required(model, "n", family),
            eps=model.get("eps", 1.0),
            c=model.get("c", 1.0),
            couplings=model.get("couplings"),
            levels=model.get("levels"),
        )
        if family is ModelFamily.LAPLACIAN:
            return ModelSpec.laplacian_model(spec, dense_cap=dense_cap)

        return ModelSpec.anderson(spec, potential or PotentialSpec(), dense_cap=dense_cap)

    if family is ModelFamily.ULTRAMETRIC:
        return ModelSpec.ultrametric(
            _required(model, "n", family), _required(model, "c", family), dense_cap=dense_cap
        )

    return ModelSpec.rosenzweig_porter(
        _required(model, "N", family),
        _required(model, "c", family),
        potential or PotentialSpec(),
        dense_cap=dense_cap,
    )


def _required(model, key, family):
    if model.get(key) is None:
        raise ConfigurationError("The {} model needs {}.".format(family.value, key))

    return model[key]
