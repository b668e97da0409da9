import unittest

import numpy as np

from hierops import ArgumentError, CollisionError
from hierops import dbm
from hierops.dbm import DBMState
from hierops.models import build_ultrametric, ultrametric_entry_variance
from hierops.seeding import generator
from hierops.spectra import eigvals, ks_statistic


class FixedNoise(object):
    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)

    def standard_normal(self, size):
        return self.values.copy()


class test_DBMState(unittest.TestCase):
    def test_rejects_unsorted_particles(self):
        with self.assertRaises(ArgumentError):
            DBMState([1.0, 0.0])

    def test_N(self):
        self.assertEqual(3, DBMState([0.0, 1.0, 2.0]).N)


class test_evolve_exact(unittest.TestCase):
    def test_zero_duration_is_identity(self):
        state = DBMState([0.0, 1.0], elapsed=2.0)
        out = dbm.evolve_exact(state, 0.0, generator(0))

        np.testing.assert_array_equal(state.particles, out.particles)
        self.assertEqual(2.0, out.elapsed)
        self.assertIsNot(state.particles, out.particles)

    def test_negative_duration(self):
        with self.assertRaises(ArgumentError):
            dbm.evolve_exact(DBMState([0.0]), -1.0, generator(0))

    def test_output_is_sorted_and_timed(self):
        out = dbm.evolve_exact(DBMState(np.zeros(8)), 0.5, generator(1))

        self.assertTrue(np.all(np.diff(out.particles) >= 0))
        self.assertEqual(0.5, out.elapsed)

    def test_single_particle_variance(self):
        rng = generator(2)
        samples = [dbm.evolve_exact(DBMState([0.0]), 0.25, rng).particles[0] for _ in range(4000)]

        self.assertAlmostEqual(0.5, float(np.var(samples)), delta=0.05)


class test_evolve_sde(unittest.TestCase):
    def test_drift_preserves_the_mean(self):
        state = DBMState([-1.0, 0.0, 0.5, 2.0])
        out = dbm.evolve_sde(state, 0.1, 1e-3, generator(0), noise=False)

        self.assertAlmostEqual(float(np.mean(state.particles)), float(np.mean(out.particles)))
        self.assertTrue(np.all(np.diff(out.particles) > 0))
        self.assertGreater(out.particles[-1] - out.particles[0], 3.0)
        self.assertAlmostEqual(0.1, out.elapsed)

    def test_collision(self):
        with self.assertRaises(CollisionError):
            dbm.evolve_sde(DBMState([0.0, 1.0]), 1.0, 1.0, FixedNoise([10.0, -10.0]), max_halvings=0)

    def test_step_refinement_avoids_collision(self):
        out = dbm.evolve_sde(DBMState([0.0, 1.0]), 1.0, 1.0, generator(5))

        self.assertTrue(np.all(np.diff(out.particles) > 0))

    def test_agrees_with_the_exact_evolution(self):
        start = DBMState([-1.0, -0.3, 0.4, 1.2])
        rng_sde, rng_exact = generator(7), generator(8)
        sde = [dbm.evolve_sde(start, 0.25, 2e-3, rng_sde).particles for _ in range(300)]
        exact = [dbm.evolve_exact(start, 0.25, rng_exact).particles for _ in range(300)]

        self.assertLess(ks_statistic(np.concatenate(sde), np.concatenate(exact)), 0.1)
        np.testing.assert_allclose(np.mean(exact, axis=0), np.mean(sde, axis=0), atol=0.12)

    def test_invalid_arguments(self):
        with self.assertRaises(ArgumentError):
            dbm.evolve_sde(DBMState([0.0, 1.0]), 1.0, 0.0, generator(0))
        with self.assertRaises(ArgumentError):
            dbm.evolve_sde(DBMState([0.0, 0.0]), 1.0, 0.1, generator(0))


class test_recursive_spectrum(unittest.TestCase):
    def test_shape_and_trace(self):
        eigs, trace = dbm.recursive_spectrum(3, 1.0, generator(0))

        self.assertEqual(8, len(eigs))
        self.assertTrue(np.all(np.diff(eigs) >= 0))
        self.assertEqual([1, 2, 4, 8], trace.sizes)
        np.testing.assert_allclose([0.25, 0.0625, 0.015625], trace.durations)

    def test_depth_zero(self):
        eigs, _ = dbm.recursive_spectrum(0, 1.0, generator(0))

        self.assertEqual(1, len(eigs))

    def test_level_zero_variance(self):
        # the default level-0 variance is that of an ultrametric diagonal entry
        # at depth zero; initial_variance=1 gives a standard normal value
        rng = generator(6)
        default = [dbm.recursive_spectrum(0, 1.0, rng)[0][0] for _ in range(4000)]
        standard = [
            dbm.recursive_spectrum(0, 1.0, rng, initial_variance=1.0)[0][0] for _ in range(4000)
        ]

        self.assertEqual(2.0, ultrametric_entry_variance(0, 1.0, 0))
        self.assertAlmostEqual(2.0, float(np.var(default)), delta=0.2)
        self.assertAlmostEqual(1.0, float(np.var(standard)), delta=0.1)

    def test_matches_direct_construction(self):
        n, c, runs = 4, 1.0, 200
        rng_a, rng_b = generator(1), generator(2)
        recursive = np.concatenate([dbm.recursive_spectrum(n, c, rng_a)[0] for _ in range(runs)])
        direct = np.concatenate([eigvals(build_ultrametric(n, c, rng_b)) for _ in range(runs)])

        self.assertLess(ks_statistic(recursive, direct), 0.08)


class test_invariance_check(unittest.TestCase):
    def test_conjugation_does_not_change_the_spectrum_law(self):
        A = np.diag(np.linspace(-1.0, 1.0, 8))

        self.assertLess(dbm.invariance_check(A, 0.5, 100, generator(3)), 0.15)
