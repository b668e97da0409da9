import hashlib
import logging
import math
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.stats

from . import constants
from .hierops import ConfigurationError, SolverError, StatisticsError
from .models import laplacian_spectrum
from .rgflow import DensityGrid

logger = logging.getLogger("hierops")

POISSON_GAP_RATIO = constants.POISSON_GAP_RATIO
GOE_GAP_RATIO = constants.GOE_GAP_RATIO


def poisson_ratio_density(r):
    return 2 / (1 + np.asarray(r)) ** 2


def fingerprint(A):
    A = np.ascontiguousarray(A, dtype=float)
    digest = hashlib.sha256(A.tobytes())
    digest.update(str(A.shape).encode("ascii"))

    return digest.hexdigest()[:16]


class SpectralData(object):
    def __init__(self, eigenvalues, eigenvectors, residual_bound):
        self.eigenvalues = eigenvalues
        self.eigenvectors = eigenvectors
        self.residual_bound = residual_bound

    @property
    def dimension(self):
        return len(self.eigenvalues)

    def weights(self, site=None):
        if site is None:
            return np.full(self.dimension, 1.0 / self.dimension)

        return self.eigenvectors[site, :] ** 2


class PointProcessSample(object):
    def __init__(self, points, window):
        self.points = points
        self.window = window

    def __len__(self):
        return len(self.points)


def eigh(A, tolerance=1e-8):
    A = np.asarray(A, dtype=float)
    try:
        values, vectors = scipy.linalg.eigh(A)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise SolverError(
            "Eigensolver failed on matrix {}: {}".format(fingerprint(A), e)
        )

    scale = max(1.0, float(np.max(np.abs(values))) if len(values) else 0.0)
    residual = float(np.max(np.linalg.norm(A @ vectors - vectors * values, axis=0), initial=0.0))
    gram = float(np.max(np.abs(vectors.T @ vectors - np.eye(len(values))), initial=0.0))
    logger.debug(
        "eigh dim=%d residual=%.3e gram=%.3e", len(values), residual, gram
    )

    if residual > tolerance * scale or gram > tolerance:
        raise SolverError(
            "Residual certificate failed on matrix {} (residual {:.3e}, gram {:.3e})".format(
                fingerprint(A), residual, gram
            )
        )

    return SpectralData(values, vectors, residual)


def eigvals(A):
    A = np.asarray(A, dtype=float)
    try:
        return scipy.linalg.eigvalsh(A)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise SolverError(
            "Eigensolver failed on matrix {}: {}".format(fingerprint(A), e)
        )


def rescale_points(eigs, E, n, window_halfwidth):
    points = (2.0**n) * (np.sort(np.asarray(eigs, dtype=float)) - E)

    return PointProcessSample(
        points[np.abs(points) <= window_halfwidth],
        (-window_halfwidth, window_halfwidth),
    )


def local_window(eigs, E, count):
    """The ``count`` eigenvalues nearest E, in ascending order."""
    eigs = np.sort(np.asarray(eigs, dtype=float))
    count = min(max(int(count), 0), len(eigs))
    nearest = np.argsort(np.abs(eigs - E), kind="stable")[:count]

    return eigs[np.sort(nearest)]


def default_window_count(n):
    return max(3, int(round(2 ** (n / 2))))


def gap_ratios(eigs, quantile_window: Sequence[float] = (0.0, 1.0)):
    eigs = np.sort(np.asarray(eigs, dtype=float))
    lo, hi = quantile_window
    if not 0 <= lo < hi <= 1:
        raise ConfigurationError(
            "The quantile window must satisfy 0 <= lo < hi <= 1, got {}".format(
                quantile_window
            )
        )

    dim = len(eigs)
    window = eigs[math.floor(lo * dim) : math.ceil(hi * dim)]
    if len(window) < 3:
        raise StatisticsError(
            "Gap ratios need at least 3 eigenvalues, the window holds {}".format(
                len(window)
            )
        )

    gaps = np.diff(window)
    smaller = np.minimum(gaps[:-1], gaps[1:])
    larger = np.maximum(gaps[:-1], gaps[1:])
    keep = larger > 0
    if not np.any(keep):
        raise StatisticsError("Every spacing in the window is zero.")

    return smaller[keep] / larger[keep]


def gap_ratio_mean(eigs, quantile_window: Sequence[float] = (0.375, 0.625)):
    return float(np.mean(gap_ratios(eigs, quantile_window)))


def empirical_dos(realizations, site, bandwidth):
    """Gaussian-kernel estimate of the density of states at ``site``.

    Each eigenvalue is weighted by ``|psi(site)|**2``, or by ``1/N`` when
    ``site`` is None, and realizations are averaged. The grid spans eight
    bandwidths past the extreme eigenvalues; the kernel mass falling outside
    it is returned as tail mass.
    """
    if bandwidth <= 0:
        raise ConfigurationError("The bandwidth must be positive, got {}".format(bandwidth))
    if not realizations:
        raise StatisticsError("The density of states needs at least one realization.")

    lo = min(float(sd.eigenvalues[0]) for sd in realizations) - 8 * bandwidth
    hi = max(float(sd.eigenvalues[-1]) for sd in realizations) + 8 * bandwidth
    count = int(math.ceil((hi - lo) / (bandwidth / 10))) + 1
    grid = np.linspace(lo, hi, count)

    values = np.zeros(count)
    tail = 0.0
    for sd in realizations:
        weights = sd.weights(site)
        for chunk in range(0, len(weights), 256):
            lam = sd.eigenvalues[chunk : chunk + 256]
            w = weights[chunk : chunk + 256]
            values += scipy.stats.norm.pdf(grid[:, None], loc=lam, scale=bandwidth) @ w
            inside = scipy.stats.norm.cdf((hi - lam) / bandwidth) - scipy.stats.norm.cdf(
                (lo - lam) / bandwidth
            )
            tail += float(np.sum(w * (1 - inside)))

    return DensityGrid(grid, values / len(realizations), tail / len(realizations))


def dos_maximum(realizations, bandwidth, site=None):
    """Energy at which the empirical density of states peaks."""
    dos = empirical_dos(realizations, site, bandwidth)

    return float(dos.grid[np.argmax(dos.values)])


def semicircle_density(E):
    E = np.asarray(E, dtype=float)

    return np.sqrt(np.maximum(0.0, 4 - E**2)) / (2 * np.pi)


def semicircle_cdf(E):
    E = np.clip(np.asarray(E, dtype=float), -2.0, 2.0)

    return 0.5 + E * np.sqrt(4 - E**2) / (4 * np.pi) + np.arcsin(E / 2) / np.pi


def ks_statistic(a, b):
    return float(scipy.stats.ks_2samp(a, b).statistic)


class SpectralDimensionFit(object):
    def __init__(self, estimate, intercept, stderr, r_squared, grid, mass):
        self.estimate = estimate
        self.intercept = intercept
        self.stderr = stderr
        self.r_squared = r_squared
        self.grid = grid
        self.mass = mass


def band_edge_measure(spec, infinite_volume=True, levels=None):
    """Distances below the top of the spectrum and spectral weights at a site.

    In infinite volume the weight at ``E_r`` is ``2**(-r-1)`` (``1/2`` at
    ``E_0``); ``levels`` bounds how many terms are listed. In finite volume
    the weights are the closed-form multiplicities over the volume.
    """
    if infinite_volume:
        if spec.couplings is not None or spec.levels is not None or spec.c <= 0:
            raise ConfigurationError(
                "The infinite-volume measure needs p_r = eps * 2**(-c r) with c > 0."
            )
        q = 2.0 ** (-spec.c)
        levels = levels or 200
        r = np.arange(levels)
        gaps = spec.eps * q ** (r + 1) / (1 - q)
        weights = np.where(r == 0, 0.5, 2.0 ** (-r - 1.0))

        return gaps, weights

    values, multiplicities = laplacian_spectrum(spec)

    return values[-1] - values, multiplicities / multiplicities.sum()


def _infinite_volume_mass(spec, lam):
    q = 2.0 ** (-spec.c)
    top = spec.eps * q / (1 - q)
    level = np.ceil(-np.log2(lam * (1 - q) / spec.eps) / spec.c - 1 - 1e-12)
    mass = 2.0 ** (-np.maximum(level, 1))

    return np.where(lam >= top, 1.0, mass)


def _finite_volume_mass(spec, lam):
    gaps, weights = band_edge_measure(spec, infinite_volume=False)

    return np.array([weights[gaps <= x].sum() for x in lam])


def default_lambda_grid(spec, infinite_volume=True, periods=60, per_period=10):
    gaps, _ = band_edge_measure(spec, infinite_volume, levels=periods + 2)
    gaps = np.sort(gaps[gaps > 0])[::-1]
    if infinite_volume:
        hi, lo = gaps[1], gaps[1 + periods]
        count = periods * per_period
    else:
        if len(gaps) < 3:
            raise ConfigurationError(
                "The finite-volume measure needs at least n = 3 to fit a slope."
            )
        hi, lo = gaps[1], gaps[-1]
        count = (len(gaps) - 2) * per_period

    return np.exp(np.linspace(math.log(hi), math.log(lo), count, endpoint=False))


def spectral_dimension(spec, lambda_grid: Optional[Sequence[float]] = None, infinite_volume=None):
    """Fit ln(mass near the band top) against ln(sqrt(lambda)).

    The slope estimates the spectral dimension, which equals 2/c for the
    default couplings. Explicit couplings or truncations use the
    finite-volume measure.
    """
    if infinite_volume is None:
        infinite_volume = spec.couplings is None and spec.levels is None

    if lambda_grid is None:
        lambda_grid = default_lambda_grid(spec, infinite_volume)

    lam = np.asarray(lambda_grid, dtype=float)
    if infinite_volume:
        top = spec.eps * 2.0 ** (-spec.c) / (1 - 2.0 ** (-spec.c))
    else:
        gaps, _ = band_edge_measure(spec, infinite_volume=False)
        top = gaps.max()

    if len(np.unique(lam)) < 2 or np.any(lam <= 0) or np.any(lam >= top):
        raise ConfigurationError(
            "The lambda grid needs at least two distinct values in (0, {}).".format(top)
        )

    if infinite_volume:
        mass = _infinite_volume_mass(spec, lam)
    else:
        mass = _finite_volume_mass(spec, lam)

    if np.any(mass <= 0):
        raise ConfigurationError("The lambda grid reaches below the smallest spectral gap.")

    fit = scipy.stats.linregress(0.5 * np.log(lam), np.log(mass))
    logger.debug(
        "spectral dimension fit over %d points: slope %.6f r^2 %.6f",
        len(lam),
        fit.slope,
        fit.rvalue**2,
    )

    return (
        float(fit.slope),
        SpectralDimensionFit(
            float(fit.slope),
            float(fit.intercept),
            float(fit.stderr),
            float(fit.rvalue**2),
            lam,
            mass,
        ),
    )


def bootstrap_ci(statistic, count, resamples=1000, seed=0, level=0.95):
    """Percentile interval of ``statistic(indices)`` over resampled realizations.

    ``statistic`` receives an index array drawn with replacement from
    ``range(count)``. Undefined (NaN) resampled values are dropped with a
    warning; infinite values are kept and the interval ends are order
    statistics, so an end may be infinite.
    """
    if count < 1:
        raise StatisticsError("A bootstrap interval needs at least one realization.")

    rng = np.random.default_rng(int(seed))
    idx = rng.integers(0, count, size=(int(resamples), count))
    samples = np.array([statistic(row) for row in idx], dtype=float)
    undefined = np.isnan(samples)
    if np.any(undefined):
        logger.warning(
            "Bootstrap statistic undefined on %d of %d resamples", undefined.sum(), len(samples)
        )
    samples = np.sort(samples[~undefined])
    if len(samples) == 0:
        return float("nan"), float("nan")

    # order statistics keep infinite values in their place
    tail = (1 - level) / 2
    last = len(samples) - 1
    return (
        float(samples[int(math.floor(tail * last))]),
        float(samples[int(math.ceil((1 - tail) * last))]),
    )
