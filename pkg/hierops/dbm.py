"""Dyson Brownian motion for real symmetric matrices.

Running the matrix flow for time ``t`` from ``A`` adds a Gaussian symmetric
matrix with entry variance ``(1 + delta_kl) t / N``. By orthogonal invariance
the spectrum at time ``t`` depends on ``A`` only through its spectrum, so
``evolve_exact`` resamples ``diag(particles) + G``. ``evolve_sde`` integrates
the eigenvalue SDE directly and serves as a cross-check.
"""

import logging
import math

import numpy as np
import scipy.stats

from .hierops import ArgumentError, CollisionError
from .models import goe_blocks
from .spectra import eigvals, ks_statistic

logger = logging.getLogger("hierops")

MAX_HALVINGS = 40


class DBMState(object):
    def __init__(self, particles, elapsed=0.0):
        particles = np.asarray(particles, dtype=float)
        if particles.ndim != 1 or np.any(np.diff(particles) < 0):
            raise ArgumentError("Particles must be a 1-d ascending array.")

        self.particles = particles
        self.elapsed = elapsed

    @property
    def N(self):
        return len(self.particles)


class RecursionTrace(object):
    def __init__(self, n, c):
        self.sizes = [1 << k for k in range(n + 1)]
        self.durations = [recursion_duration(k, c) for k in range(1, n + 1)]


def recursion_duration(k, c):
    return 2.0 ** (-(1 + c) * k)


def evolve_exact(state: DBMState, duration, rng):
    if duration < 0:
        raise ArgumentError("The duration must be nonnegative, got {}".format(duration))
    if duration == 0:
        return DBMState(state.particles.copy(), state.elapsed)

    N = state.N
    G = goe_blocks(1, N, rng)[0] * math.sqrt(duration / N)

    return DBMState(eigvals(np.diag(state.particles) + G), state.elapsed + duration)


def _drift(particles):
    N = len(particles)
    if N == 1:
        return np.zeros(1)

    diff = particles[:, None] - particles[None, :]
    np.fill_diagonal(diff, np.inf)

    return np.sum(1 / diff, axis=1) / N


def evolve_sde(state: DBMState, duration, step, rng, noise=True, max_halvings=MAX_HALVINGS):
    """Euler-Maruyama integration of the eigenvalue SDE.

    A step that would reorder particles is split in two, with the Brownian
    midpoint drawn from the bridge between the endpoints, so the driving
    path is unchanged by the refinement.
    """
    if step <= 0:
        raise ArgumentError("The step must be positive, got {}".format(step))
    if duration < 0:
        raise ArgumentError("The duration must be nonnegative, got {}".format(duration))
    if state.N > 1 and np.any(np.diff(state.particles) <= 0):
        raise ArgumentError("The SDE needs strictly distinct particles.")

    N = state.N
    sigma = math.sqrt(2 / N)
    refinements = 0

    def advance(particles, dt, dB, depth):
        nonlocal refinements

        proposal = particles + _drift(particles) * dt + sigma * dB
        if N == 1 or np.all(np.diff(proposal) > 0):
            return proposal
        if depth >= max_halvings:
            raise CollisionError(
                "Particles collided after {} step halvings at t={}".format(
                    depth, state.elapsed
                )
            )

        refinements += 1
        if noise:
            mid = dB / 2 + math.sqrt(dt / 4) * rng.standard_normal(N)
        else:
            mid = dB / 2
        particles = advance(particles, dt / 2, mid, depth + 1)

        return advance(particles, dt / 2, dB - mid, depth + 1)

    particles = state.particles.copy()
    t = 0.0
    while t < duration:
        dt = min(step, duration - t)
        dB = math.sqrt(dt) * rng.standard_normal(N) if noise else np.zeros(N)
        particles = advance(particles, dt, dB, 0)
        t += dt

    if refinements:
        logger.debug("evolve_sde refined %d steps near collisions", refinements)

    return DBMState(particles, state.elapsed + duration)


def recursive_spectrum(n, c, rng, initial_variance=2.0):
    """Spectrum of an ultrametric matrix built by merging and evolving.

    Level 0 holds ``2**n`` independent Gaussian values of variance
    ``initial_variance``. Level k merges neighbouring pairs of level-(k-1)
    spectra and evolves each merged spectrum for ``2**(-(1+c) k)``.
    """
    if n < 0:
        raise ArgumentError("The depth must be nonnegative, got {}".format(n))

    spectra = math.sqrt(initial_variance) * rng.standard_normal((1 << n, 1))
    for k in range(1, n + 1):
        merged = np.sort(spectra.reshape(1 << (n - k), 1 << k), axis=1)
        duration = recursion_duration(k, c)
        spectra = np.array(
            [evolve_exact(DBMState(row), duration, rng).particles for row in merged]
        )

    return spectra[0], RecursionTrace(n, c)


def invariance_check(A, duration, runs, rng):
    """KS statistic between the spectra of diag(spec A) + G and Q A Q^T + G."""
    A = np.asarray(A, dtype=float)
    N = A.shape[0]
    Q = scipy.stats.ortho_group.rvs(N, random_state=rng) if N > 1 else np.ones((1, 1))
    rotated = Q @ A @ Q.T
    rotated = (rotated + rotated.T) / 2
    diagonal = np.diag(eigvals(A))
    scale = math.sqrt(duration / N)

    direct, conjugated = [], []
    for _ in range(runs):
        direct.append(eigvals(diagonal + goe_blocks(1, N, rng)[0] * scale))
        conjugated.append(eigvals(rotated + goe_blocks(1, N, rng)[0] * scale))

    return ks_statistic(np.concatenate(direct), np.concatenate(conjugated))
