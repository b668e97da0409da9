import logging
import math

import numpy as np
import scipy.stats

from . import constants
from .hierarchy import HierarchySpec, distance_matrix
from .hierops import ArgumentError, ConfigurationError, StatisticsError
from .spectra import bootstrap_ci

logger = logging.getLogger("hierops")

DEGENERACY_TOLERANCE = 1e-10


class EnergyWindow(object):
    def __init__(self, lo, hi):
        if lo > hi:
            raise ArgumentError("Energy window [{}, {}] is empty".format(lo, hi))

        self.lo = lo
        self.hi = hi

    @classmethod
    def everything(cls):
        return cls(-math.inf, math.inf)

    @classmethod
    def around(cls, E, halfwidth):
        return cls(E - halfwidth, E + halfwidth)

    def contains(self, eigenvalues):
        eigenvalues = np.asarray(eigenvalues)
        return (eigenvalues >= self.lo) & (eigenvalues <= self.hi)

    def __contains__(self, E):
        return self.lo <= E <= self.hi

    def __repr__(self):
        return "EnergyWindow({}, {})".format(self.lo, self.hi)


def _group_starts(eigenvalues):
    """Start offsets of runs of numerically equal eigenvalues."""
    if len(eigenvalues) == 0:
        return np.zeros(0, dtype=int)

    scale = np.maximum(1.0, np.abs(eigenvalues[1:]))
    split = np.diff(eigenvalues) > DEGENERACY_TOLERANCE * scale

    return np.concatenate([[0], np.nonzero(split)[0] + 1])


def _projector_columns(sd, j, I):
    """Entries P_g(k, j) of the spectral projectors of each eigenvalue group in I."""
    inside = np.nonzero(I.contains(sd.eigenvalues))[0]
    if len(inside) == 0:
        return np.zeros((sd.dimension, 0))

    vectors = sd.eigenvectors[:, inside]
    overlap = vectors * vectors[j, :]

    return np.add.reduceat(overlap, _group_starts(sd.eigenvalues[inside]), axis=1)


def correlator_row(sd, j, I: EnergyWindow):
    """Q(j, k; I) for every site k.

    The supremum over ``f`` supported in I with ``|f| <= 1`` is attained by
    taking the sign of each spectral projector entry, so it equals the sum
    over eigenvalue groups of ``|P_g(j, k)|``.
    """
    if not 0 <= j < sd.dimension:
        raise ArgumentError("Site {} is outside the volume".format(j))

    return np.sum(np.abs(_projector_columns(sd, j, I)), axis=1)


def eigenfunction_correlator(sd, j, k, I: EnergyWindow):
    if not 0 <= k < sd.dimension:
        raise ArgumentError("Site {} is outside the volume".format(k))

    return float(correlator_row(sd, j, I)[k])


def escape_probability(sd, j, R, I: EnergyWindow):
    """Long-time average probability of reaching distance R or more from j.

    Only the part of the state with energy in I is followed, and the time
    average of ``|<k, 1_I(H) exp(itH) j>|**2`` is ``sum_g |P_g(k, j)|**2``.
    """
    n = _depth(sd.dimension)
    far = distance_matrix(n)[j] >= R
    columns = _projector_columns(sd, j, I)

    return float(np.sum(columns[far, :] ** 2))


def outside_ball_mass(sd, x, m, W: EnergyWindow):
    """Correlator mass outside B_m(x), as a sum over y of Q(x, y; W)."""
    n = _depth(sd.dimension)
    HierarchySpec(n).check_level(m)
    outside = distance_matrix(n)[x] > m

    return float(np.sum(correlator_row(sd, x, W)[outside]))


def outside_ball_curve(sd, x, W: EnergyWindow):
    n = _depth(sd.dimension)
    row = correlator_row(sd, x, W)
    d = distance_matrix(n)[x]

    return np.array([np.sum(row[d > m]) for m in range(n + 1)])


def _depth(dimension):
    n = int(dimension).bit_length() - 1
    if dimension < 1 or 1 << n != dimension:
        raise ArgumentError("Volume {} is not a power of two".format(dimension))

    return n


def _check_unit(psi):
    norm = float(np.linalg.norm(psi))
    if abs(norm - 1) > 1e-8:
        raise ArgumentError("Expected a unit vector, got norm {}".format(norm))


def ipr(psi, q=4):
    psi = np.asarray(psi, dtype=float)
    _check_unit(psi)

    return float(np.sum(np.abs(psi) ** q))


def decay_moment(psi, c, origin):
    psi = np.asarray(psi, dtype=float)
    _check_unit(psi)
    n = _depth(len(psi))
    HierarchySpec(n).check_site(origin)

    return float(np.sum(2.0 ** ((c / 4) * distance_matrix(n)[origin]) * psi**2))


def sup_norm(psi):
    return float(np.max(np.abs(psi)))


def localization_center(psi):
    return int(np.argmax(np.abs(psi)))


class CorrelatorProfile(object):
    def __init__(self, means, class_sizes, rate, intercept, residual, rate_ci, realizations):
        self.means = means
        self.class_sizes = class_sizes
        self.rate = rate
        self.intercept = intercept
        self.residual = residual
        self.rate_ci = rate_ci
        self.realizations = realizations

    @property
    def distances(self):
        return list(range(len(self.means)))


def _fit_rate(means):
    """Decay rate from a least-squares fit of log2(mean) against distance.

    Distances with zero mean are left out. Without any positive mean beyond
    d = 0 the correlator does not spread at all and the rate is infinite.
    """
    d = np.arange(len(means))
    positive = means > 0
    if not np.any(positive[1:]):
        return math.inf, math.nan, 0.0

    fit = scipy.stats.linregress(d[positive], np.log2(means[positive]))
    predicted = fit.intercept + fit.slope * d[positive]
    residual = float(np.sqrt(np.mean((np.log2(means[positive]) - predicted) ** 2)))

    return float(-fit.slope), float(fit.intercept), residual


def class_means(row, j, n):
    d = distance_matrix(n)[j]
    sizes = np.bincount(d, minlength=n + 1)

    return np.bincount(d, weights=row, minlength=n + 1) / sizes, sizes


def correlator_profile(
    realizations,
    I: EnergyWindow,
    j,
    min_realizations=20,
    resamples=constants.OPTION_DEFAULTS["bootstrap-resamples"],
    seed=0,
):
    """Disorder average of Q(j, k; I) by hierarchical distance, with a decay fit."""
    if len(realizations) < min_realizations:
        raise StatisticsError(
            "The correlator profile needs at least {} realizations, got {}".format(
                min_realizations, len(realizations)
            )
        )

    n = _depth(realizations[0].dimension)
    if not any(np.any(I.contains(sd.eigenvalues)) for sd in realizations):
        raise StatisticsError("No eigenvalue of any realization lies in {}".format(I))

    per_realization = np.array(
        [class_means(correlator_row(sd, j, I), j, n)[0] for sd in realizations]
    )

    return profile_from_class_means(
        per_realization, np.bincount(distance_matrix(n)[j], minlength=n + 1), resamples, seed
    )


def profile_from_class_means(
    per_realization,
    sizes,
    resamples=constants.OPTION_DEFAULTS["bootstrap-resamples"],
    seed=0,
):
    """Fit and bootstrap a profile from per-realization class means (one row each)."""
    per_realization = np.asarray(per_realization, dtype=float)
    means = per_realization.mean(axis=0)
    rate, intercept, residual = _fit_rate(means)

    rate_ci = bootstrap_ci(
        lambda idx: _fit_rate(per_realization[idx].mean(axis=0))[0],
        len(per_realization),
        resamples=resamples,
        seed=seed,
    )
    logger.debug("correlator profile: rate %.4g CI %s", rate, rate_ci)

    return CorrelatorProfile(
        means, sizes, rate, intercept, residual, rate_ci, len(per_realization)
    )


def triangular_kernel(x, bandwidth):
    return np.maximum(0.0, 1 - np.abs(x) / bandwidth) / bandwidth


def ipr_kernel_sums(sd, E, bandwidth):
    """The numerator and denominator of the kernel-averaged IPR for one realization."""
    if bandwidth <= 0:
        raise ConfigurationError("The bandwidth must be positive, got {}".format(bandwidth))

    weights = triangular_kernel(E - sd.eigenvalues, bandwidth)
    iprs = np.sum(sd.eigenvectors**4, axis=0)

    return float(np.sum(iprs * weights)), float(np.sum(weights))


def ipr_spectral_average(realizations, E, bandwidth):
    sums = np.array([ipr_kernel_sums(sd, E, bandwidth) for sd in realizations])
    if len(sums) == 0 or sums[:, 1].sum() <= 0:
        raise StatisticsError("No kernel mass at E={} with bandwidth {}".format(E, bandwidth))

    return float(sums[:, 0].mean() / sums[:, 1].mean())
