"""The renormalization map on single-site potential densities.

``apply_T(rho, p)`` returns the density of ``(1/(2V) + 1/(2V'))**-1 + p`` for
independent ``V, V'`` with density ``rho``. The map is evaluated in four
pushforward steps on adaptive grids:

1. ``Y = 1/(2V)`` by change of variables, with ``|V| < eta`` excised;
2. ``S = Y + Y'`` by direct quadrature of the self-convolution;
3. ``W = 1/S`` by change of variables;
4. a shift of the grid by ``p``.

Every grid has a uniform core around the median and geometric tails out to
the reach, so heavy ``1/w**2`` tails are resolved instead of truncated. The
mass left outside the output grid is carried as ``tail_mass``.
"""

import logging
import math

import numpy as np
import scipy.integrate
import scipy.ndimage
import scipy.stats

from . import constants, seeding
from .hierops import ArgumentError, FlowAborted, NumericalError

logger = logging.getLogger("hierops")

SINGULAR_MASS = 1e-4
MAX_WIDENINGS = 3
DEFAULT_REACH = 1e6
CORE_NODES = 4001
TAIL_NODES = 1000
PRELIMINARY_NODES = 20001
PRELIMINARY_RESOLUTION = 1e-6
CHUNK = 256
ABORT_TAIL_MASS = 1e-2
GAUSSIAN_KERNEL_ROUGHNESS = 1 / (2 * math.sqrt(math.pi))


def _trapezoid(values, grid):
    return float(scipy.integrate.trapezoid(values, grid))


class DensityGrid(object):
    def __init__(self, grid, values, tail_mass=0.0):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)

        if grid.ndim != 1 or grid.shape != values.shape or len(grid) < 2:
            raise ArgumentError("A density needs matching 1-d node and value arrays.")
        if np.any(np.diff(grid) <= 0):
            raise ArgumentError("Density nodes must be strictly increasing.")
        if np.any(values < 0):
            raise ArgumentError("Density values must be nonnegative.")

        self.grid = grid
        self.values = values
        self.tail_mass = float(tail_mass)
        self.diagnostics = None

    @classmethod
    def from_potential(cls, spec, reach=DEFAULT_REACH):
        """Tabulate a potential distribution on an adaptive grid out to ``reach``."""
        center = float(spec.quantile(0.5))
        q10, q90 = (float(q) for q in spec.quantile(np.array([0.1, 0.9])))
        grid = adaptive_grid(center, 1.5 * (q90 - q10), center - reach, center + reach)

        values = np.asarray(spec.pdf(grid), dtype=float)
        tail = float(spec.cdf(grid[0]) + 1 - spec.cdf(grid[-1]))
        values *= (1 - tail) / _trapezoid(values, grid)

        return cls(grid, values, tail)

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as f:
            header = f.readline()
            if not header.startswith("#") or "tail_mass" not in header:
                raise ArgumentError(
                    "{} does not start with a '# tail_mass = <value>' header".format(path)
                )
            tail = float(header.split("=", 1)[1])
            data = np.loadtxt(f, ndmin=2)

        return cls(data[:, 0], data[:, 1], tail)

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("# tail_mass = {!r}\n".format(self.tail_mass))
            for node, value in zip(self.grid, self.values):
                f.write("{!r} {!r}\n".format(float(node), float(value)))

    def integral(self):
        return _trapezoid(self.values, self.grid)

    def mass(self):
        return self.integral() + self.tail_mass

    def pdf(self, x):
        return np.interp(x, self.grid, self.values, left=0.0, right=0.0)

    def sup_norm(self):
        return float(np.max(self.values))

    def window_max(self, interval):
        lo, hi = interval
        inside = (self.grid >= lo) & (self.grid <= hi)
        edges = self.pdf(np.array([lo, hi]))

        return float(max(np.max(self.values[inside], initial=0.0), np.max(edges)))

    def mass_between(self, lo, hi):
        inside = self.grid[(self.grid > lo) & (self.grid < hi)]
        nodes = np.concatenate([[lo], inside, [hi]])

        return _trapezoid(self.pdf(nodes), nodes)

    def cdf_nodes(self):
        cdf = scipy.integrate.cumulative_trapezoid(self.values, self.grid, initial=0)
        return cdf / cdf[-1]

    def quantile(self, q):
        return np.interp(q, self.cdf_nodes(), self.grid)

    def sample(self, count, rng):
        return self.quantile(rng.random(count))

    def shifted(self, p):
        shifted = DensityGrid(self.grid + p, self.values, self.tail_mass)
        shifted.diagnostics = self.diagnostics
        return shifted


class TransportDiagnostics(object):
    def __init__(
        self, excision, excised_mass, widenings, clamp_mass, renormalization, tail_mass, mass
    ):
        self.excision = excision
        self.excised_mass = excised_mass
        self.widenings = widenings
        self.clamp_mass = clamp_mass
        self.renormalization = renormalization
        self.tail_mass = tail_mass
        self.mass = mass

    def to_dict(self):
        return dict(vars(self))


def adaptive_grid(center, half_width, lo, hi, core_nodes=CORE_NODES, tail_nodes=TAIL_NODES):
    """Uniform nodes on ``center +- half_width`` and geometric tails out to [lo, hi]."""
    if half_width <= 0:
        half_width = max(abs(center), 1.0) * 1e-6

    a, b = max(center - half_width, lo), min(center + half_width, hi)
    parts = [np.linspace(a, b, core_nodes)]
    if hi > b:
        parts.append(center + np.geomspace(b - center, hi - center, tail_nodes + 1)[1:])
    if lo < a:
        parts.insert(0, center - np.geomspace(center - a, center - lo, tail_nodes + 1)[1:][::-1])

    return np.unique(np.concatenate(parts))


def _sinh_grid(lo, hi, nodes=PRELIMINARY_NODES, resolution=PRELIMINARY_RESOLUTION):
    top = math.asinh(max(abs(lo), abs(hi)) / resolution)
    grid = resolution * np.sinh(np.linspace(-top, top, nodes))

    return np.unique(np.concatenate([[lo], grid[(grid > lo) & (grid < hi)], [hi]]))


def _quantile_grid(density, lo, hi):
    """An adaptive grid on [lo, hi] placed by the quantiles of ``density``."""
    prelim = _sinh_grid(lo, hi)
    cdf = scipy.integrate.cumulative_trapezoid(density(prelim), prelim, initial=0)
    if cdf[-1] <= 0:
        raise NumericalError("The transported density has no mass on its grid.")

    q10, q50, q90 = np.interp([0.1, 0.5, 0.9], cdf / cdf[-1], prelim)

    return adaptive_grid(q50, 1.5 * (q90 - q10), lo, hi), q50, 1.5 * (q90 - q10)


def _reciprocal_pushforward(grid, values, scale):
    """Density of ``scale / X`` given the tabulated density of X.

    Beyond the image of the outermost nodes the density is continued by its
    ``1/x**2`` asymptote, which is flat in the reciprocal variable.
    """
    x_lo, x_hi = grid[0], grid[-1]
    right = values[-1] * x_hi**2 / scale if x_hi > 0 else 0.0
    left = values[0] * x_lo**2 / scale if x_lo < 0 else 0.0

    def density(y):
        y = np.asarray(y, dtype=float)
        out = np.full(y.shape, 0.5 * (left + right))
        nonzero = y != 0
        yn = y[nonzero]
        x = scale / yn
        inner = np.interp(x, grid, values, left=0.0, right=0.0) * scale / yn**2
        inner = np.where((yn > 0) & (x > x_hi), right, inner)
        inner = np.where((yn < 0) & (x < x_lo), left, inner)
        out[nonzero] = inner

        return out

    return density


def _half_convolution(y, gy, s, center):
    """Self-convolution of g at the nodes s.

    By symmetry ``(g*g)(s) = 2 * integral of g(y) g(s-y) over y <= s/2``;
    the reflected half is used for ``s < 2 * center`` so the integration
    range always contains the bulk of g. The split point s/2 enters the
    trapezoid rule exactly.
    """
    ny = len(y)
    dy = np.diff(y)
    idx = np.arange(ny - 1)
    out = np.empty(len(s))

    def g(x):
        return np.interp(x, y, gy, left=0.0, right=0.0)

    for start in range(0, len(s), CHUNK):
        sc = s[start : start + CHUNK]
        rows = np.arange(len(sc))
        prod = gy[None, :] * g(sc[:, None] - y[None, :])
        intervals = 0.5 * (prod[:, :-1] + prod[:, 1:]) * dy
        half = sc / 2
        middle = g(half) ** 2

        k = np.searchsorted(y, half, side="right") - 1
        lower = np.where(idx[None, :] < k[:, None], intervals, 0.0).sum(axis=1)
        inside = (k >= 0) & (k < ny - 1)
        kc = np.clip(k, 0, ny - 1)
        lower += np.where(inside, 0.5 * (prod[rows, kc] + middle) * (half - y[kc]), 0.0)

        k2 = np.searchsorted(y, half, side="left")
        upper = np.where(idx[None, :] >= k2[:, None], intervals, 0.0).sum(axis=1)
        inside = (k2 > 0) & (k2 < ny)
        k2c = np.clip(k2, 0, ny - 1)
        upper += np.where(inside, 0.5 * (prod[rows, k2c] + middle) * (y[k2c] - half), 0.0)

        out[start : start + CHUNK] = 2 * np.where(sc >= 2 * center, lower, upper)

    return out


def apply_T(rho: DensityGrid, p: float, excision=constants.OPTION_DEFAULTS["excision"], reach=None):
    if reach is None:
        reach = max(abs(rho.grid[0]), abs(rho.grid[-1]))

    eta = excision
    widenings = 0
    excised = rho.mass_between(-eta, eta)
    while excised > SINGULAR_MASS and widenings < MAX_WIDENINGS:
        logger.warning(
            "Density carries mass %.3g within %.1e of zero; narrowing the excision",
            excised,
            eta,
        )
        eta /= 100
        widenings += 1
        excised = rho.mass_between(-eta, eta)

    if excised > SINGULAR_MASS:
        logger.warning(
            "Density remains singular at zero after %d widenings (mass %.3g)",
            widenings,
            excised,
        )

    y_reach = 1 / (2 * eta)
    g = _reciprocal_pushforward(rho.grid, rho.values, 0.5)
    y, y_center, y_half = _quantile_grid(g, -y_reach, y_reach)
    gy = g(y)

    s = adaptive_grid(2 * y_center, 2 * y_half, -2 * y_reach, 2 * y_reach)
    g2 = _half_convolution(y, gy, s, y_center)

    # g2 is exact only where no truncated Y contributes; beyond that it is
    # continued by its 1/s**2 asymptote, which is flat near w = 0
    resolved = np.abs(s) <= y_reach / 2
    h = _reciprocal_pushforward(s[resolved], g2[resolved], 1.0)
    w, _, _ = _quantile_grid(h, -reach, reach)
    values = h(w)

    clamp_mass = -_trapezoid(np.minimum(values, 0.0), w)
    values = np.maximum(values, 0.0)

    near_zero = np.linspace(-1 / reach, 1 / reach, 5)
    outside = _trapezoid(np.interp(near_zero, s, g2), near_zero)
    tail = outside + 2 * excised
    integral = _trapezoid(values, w)
    mass = integral + tail
    if integral <= 0:
        raise NumericalError("The transported density integrates to zero.")

    renormalization = (1 - tail) / integral
    values *= renormalization

    logger.debug(
        "apply_T p=%.6g: %d/%d/%d nodes, excised %.3g, tail %.3g, renormalized by %.9f",
        p,
        len(y),
        len(s),
        len(w),
        excised,
        tail,
        renormalization,
    )

    out = DensityGrid(w + p, values, tail)
    out.diagnostics = TransportDiagnostics(
        eta, excised, widenings, clamp_mass, renormalization, tail, mass
    )

    return out


class MonteCarloDensity(DensityGrid):
    def __init__(self, grid, values, tail_mass, stderr, bandwidth, count):
        super().__init__(grid, values, tail_mass)
        self.stderr = stderr
        self.bandwidth = bandwidth
        self.count = count


def _draw(sampler, count, rng):
    if callable(sampler):
        return np.asarray(sampler(count, rng), dtype=float)

    return np.asarray(sampler.sample(count, rng), dtype=float)


def silverman_bandwidth(samples):
    q25, q75 = np.quantile(samples, [0.25, 0.75])
    spread = min(float(np.std(samples)), (q75 - q25) / 1.34)

    return 0.9 * spread * len(samples) ** (-0.2)


def mc_apply_T(sampler, p, count, bandwidth=None, seed=0, chunk_size=100000):
    """Kernel density estimate of ``2 V V' / (V + V') + p`` from ``count`` pairs.

    ``sampler`` is a ``PotentialSpec``, a ``DensityGrid`` or a callable
    ``(count, rng) -> samples``. Chunk ``i`` draws from its own stream keyed
    by ``(seed, i)``.
    """
    if count < 10**4:
        raise ArgumentError("The Monte Carlo map needs at least 10^4 pairs, got {}".format(count))

    draws = []
    for i, start in enumerate(range(0, count, chunk_size)):
        m = min(chunk_size, count - start)
        rng = seeding.generator(seed, i, "mc-apply-T")
        V = _draw(sampler, 2 * m, rng)
        with np.errstate(divide="ignore", invalid="ignore"):
            draws.append(2 * V[:m] * V[m:] / (V[:m] + V[m:]) + p)

    W = np.concatenate(draws)
    finite = W[np.isfinite(W)]
    h = bandwidth or silverman_bandwidth(finite)
    if h <= 0:
        raise ArgumentError("The kernel bandwidth must be positive, got {}".format(h))

    q_lo, q_hi = np.quantile(finite, [0.001, 0.999])
    lo, hi = q_lo - 5 * h, q_hi + 5 * h
    width = h / 10
    bins = int(math.ceil((hi - lo) / width))
    counts, edges = np.histogram(finite, bins=bins, range=(lo, lo + bins * width))

    density = counts / (len(W) * width)
    smoothed = scipy.ndimage.gaussian_filter1d(density, sigma=h / width, mode="constant")
    centers = 0.5 * (edges[:-1] + edges[1:])

    curvature = np.abs(np.gradient(np.gradient(smoothed, centers), centers))
    stderr = np.sqrt(smoothed * GAUSSIAN_KERNEL_ROUGHNESS / (len(W) * h)) + 0.5 * h**2 * curvature

    tail = 1 - _trapezoid(smoothed, centers)
    logger.debug("mc_apply_T: %d pairs, bandwidth %.4g, %d bins", len(W), h, bins)

    return MonteCarloDensity(centers, smoothed, tail, stderr, h, len(W))


class FlowReport(object):
    def __init__(self, c, interval):
        self.c = c
        self.interval = tuple(interval)
        self.steps = []
        self.shifts = []
        self.sup_norms = []
        self.global_sup_norms = []
        self.tail_masses = []
        self.masses = []
        self.diagnostics = []
        self.exponent = float("nan")
        self.intercept = float("nan")
        self.delta_hat = float("nan")
        self.aborted = False
        self.density = None

    def record(self, step, shift, rho):
        self.steps.append(step)
        self.shifts.append(shift)
        self.sup_norms.append(rho.window_max(self.interval))
        self.global_sup_norms.append(rho.sup_norm())
        self.tail_masses.append(rho.tail_mass)
        self.masses.append(rho.diagnostics.mass if rho.diagnostics else rho.mass())
        self.diagnostics.append(rho.diagnostics)
        self.density = rho

    def fit(self):
        if len(self.steps) >= 2:
            fit = scipy.stats.linregress(self.steps, np.log2(self.sup_norms))
            self.exponent = float(fit.slope)
            self.intercept = float(fit.intercept)
            self.delta_hat = self.c - self.exponent

    def summary(self):
        return {
            "exponent": self.exponent,
            "intercept": self.intercept,
            "delta-hat": self.delta_hat,
            "aborted": self.aborted,
            "interval": list(self.interval),
        }


def flow(
    rho0,
    eps,
    c,
    steps,
    interval=constants.OPTION_DEFAULTS["interval"],
    excision=constants.OPTION_DEFAULTS["excision"],
    couplings=None,
    abort_tail_mass=ABORT_TAIL_MASS,
    raise_on_abort=False,
):
    """Iterate ``apply_T`` along the shifts ``p_r = eps * 2**(-c r)``.

    Each step records the density maximum over ``interval``; the fitted slope
    of its log2 against the step is the growth exponent. A step whose tail
    mass exceeds ``abort_tail_mass`` stops the flow with a partial report.
    """
    if steps < 1:
        raise ArgumentError("The flow needs at least one step.")

    rho = rho0 if isinstance(rho0, DensityGrid) else DensityGrid.from_potential(rho0)
    report = FlowReport(c, interval)

    for r in range(1, steps + 1):
        p = couplings[r - 1] if couplings is not None else eps * 2.0 ** (-c * r)
        rho = apply_T(rho, p, excision)
        report.record(r, p, rho)
        logger.info(
            "flow step %d: p=%.6g window max %.6g tail %.3g",
            r,
            p,
            report.sup_norms[-1],
            rho.tail_mass,
        )

        if rho.tail_mass > abort_tail_mass:
            report.aborted = True
            logger.warning(
                "Flow aborted at step %d: tail mass %.3g exceeds %.3g",
                r,
                rho.tail_mass,
                abort_tail_mass,
            )
            break

    report.fit()
    if report.aborted and raise_on_abort:
        raise FlowAborted("The flow left its grid at step {}".format(report.steps[-1]), report)

    return report
