import math
import unittest

import numpy as np

from hierops import ArgumentError, CapacityError, ConfigurationError, ModelFamily
from hierops import models
from hierops.hierarchy import distance_matrix
from hierops.models import LaplacianSpec, ModelSpec
from hierops.potentials import PotentialSpec
from hierops.seeding import generator


class test_LaplacianSpec(unittest.TestCase):
    def test_default_couplings(self):
        spec = LaplacianSpec(3, eps=1.0, c=1.0)

        self.assertEqual([0.5, 0.25, 0.125], list(spec.coupling_array()))
        self.assertEqual(0.0, spec.coupling(0))
        self.assertEqual(0.0, spec.coupling(4))

    def test_explicit_couplings(self):
        spec = LaplacianSpec(2, couplings=[3, 4])

        self.assertEqual([3.0, 4.0], list(spec.coupling_array()))

    def test_coupling_length_mismatch(self):
        with self.assertRaises(ConfigurationError):
            LaplacianSpec(3, couplings=[1, 2])

    def test_truncation(self):
        spec = LaplacianSpec(3, levels=1)

        self.assertEqual([0.5, 0.0, 0.0], list(spec.coupling_array()))

    def test_truncation_out_of_range(self):
        with self.assertRaises(ConfigurationError):
            LaplacianSpec(3, levels=4)


class test_Laplacian(unittest.TestCase):
    def test_n2_matrix(self):
        H = models.build_laplacian(LaplacianSpec(2, eps=1.0, c=1.0))

        np.testing.assert_allclose(
            [0.3125, 0.3125, 0.0625, 0.0625], H[0], rtol=0, atol=1e-15
        )
        np.testing.assert_allclose(H, H.T)

    def test_entries_match_closed_form(self):
        spec = LaplacianSpec(3, eps=2.0, c=0.5)
        H = models.build_laplacian(spec)
        for j in range(8):
            for k in range(8):
                self.assertAlmostEqual(models.laplacian_entry(spec, j, k), H[j, k], places=12)

    def test_n2_spectrum(self):
        H = models.build_laplacian(LaplacianSpec(2, eps=1.0, c=1.0))

        np.testing.assert_allclose(
            [0.0, 0.0, 0.5, 0.75], np.linalg.eigvalsh(H), rtol=0, atol=1e-12
        )

    def test_closed_form_spectrum(self):
        values, multiplicities = models.laplacian_spectrum(LaplacianSpec(3))

        np.testing.assert_allclose([0.0, 0.5, 0.75, 0.875], values)
        self.assertEqual([4, 2, 1, 1], list(multiplicities))

    def test_closed_form_spectrum_depth_zero(self):
        values, multiplicities = models.laplacian_spectrum(LaplacianSpec(0))

        self.assertEqual([0.0], list(values))
        self.assertEqual([1], list(multiplicities))

    def test_zero_coupling_is_zero_matrix(self):
        H = models.build_laplacian(LaplacianSpec(2, eps=0.0))

        self.assertFalse(np.any(H))

    def test_capacity(self):
        with self.assertRaises(CapacityError):
            models.build_laplacian(LaplacianSpec(4), dense_cap=3)


class test_Anderson(unittest.TestCase):
    def test_zero_potential_reduces_to_laplacian(self):
        spec = LaplacianSpec(3)
        H = models.build_anderson(
            spec, PotentialSpec("gaussian", {"sigma": 0}), generator(0)
        )

        np.testing.assert_allclose(models.build_laplacian(spec), H)

    def test_diagonal_potential(self):
        spec = LaplacianSpec(3, eps=0.0)
        potential = PotentialSpec("uniform", {"a": 2, "b": 3})
        H = models.build_anderson(spec, potential, generator(1))
        V = np.diag(H)

        self.assertTrue(np.all((V >= 2) & (V <= 3)))
        np.testing.assert_allclose(np.diag(V), H)

    def test_same_stream_same_matrix(self):
        spec = LaplacianSpec(3)
        a = models.build_anderson(spec, PotentialSpec(), generator(7, 2))
        b = models.build_anderson(spec, PotentialSpec(), generator(7, 2))

        np.testing.assert_array_equal(a, b)


class test_sample_potential(unittest.TestCase):
    def test_degenerate_gaussian(self):
        samples = models.sample_potential(
            PotentialSpec("gaussian", {"sigma": 0}), 5, generator(0)
        )

        np.testing.assert_array_equal(np.zeros(5), samples)

    def test_gaussian_variance(self):
        samples = models.sample_potential(PotentialSpec("gaussian"), 10**6, generator(1))

        self.assertAlmostEqual(1.0, float(np.var(samples)), delta=0.01)

    def test_cauchy_median(self):
        samples = models.sample_potential(PotentialSpec("cauchy"), 10**6, generator(2))

        self.assertAlmostEqual(0.0, float(np.median(samples)), delta=0.01)

    def test_negative_count(self):
        with self.assertRaises(ConfigurationError):
            models.sample_potential(PotentialSpec(), -1, generator(0))


class test_Ultrametric(unittest.TestCase):
    def test_symmetric(self):
        H = models.build_ultrametric(4, 1.0, generator(0))

        np.testing.assert_array_equal(H, H.T)
        self.assertEqual((16, 16), H.shape)

    def test_entry_variance(self):
        self.assertAlmostEqual(2.0, models.ultrametric_entry_variance(0, 1.0, 0))
        self.assertAlmostEqual(
            2 * (1 + 0.125), models.ultrametric_entry_variance(1, 1.0, 0)
        )
        self.assertAlmostEqual(0.125, models.ultrametric_entry_variance(1, 1.0, 1))

    def test_entry_variance_rejects_bad_distance(self):
        with self.assertRaises(ArgumentError):
            models.ultrametric_entry_variance(2, 1.0, 3)

    def test_variance_profile(self):
        n, c, runs = 3, 0.0, 3000
        rng = generator(11)
        samples = np.array([models.build_ultrametric(n, c, rng) for _ in range(runs)])
        expected = models.ultrametric_variance_matrix(n, c)
        observed = samples.var(axis=0)
        d = distance_matrix(n)

        for dist in range(n + 1):
            mask = d == dist
            # sample variance of a Gaussian has relative stderr sqrt(2/runs)
            tolerance = 6 * math.sqrt(2 / (runs * mask.sum())) * expected[mask][0]
            self.assertAlmostEqual(
                expected[mask][0], observed[mask].mean(), delta=tolerance
            )

    def test_scale_diagnostics(self):
        Z, M = models.scale_diagnostics(0, 1.0)

        self.assertAlmostEqual(math.sqrt(2.0), Z)
        self.assertAlmostEqual(0.5, M)

    def test_rescaled(self):
        H = np.eye(2)
        Z, _ = models.scale_diagnostics(1, 1.0)

        np.testing.assert_allclose(H / Z, models.rescaled_ultrametric(H, 1, 1.0))

    def test_trace_bounds(self):
        power, jensen = models.ultrametric_block_trace_bounds(2, 1.0)

        self.assertAlmostEqual(1.0, power)
        self.assertAlmostEqual(math.sqrt(4 * 4**-2 * 5), jensen)

    def test_trace_norm(self):
        self.assertAlmostEqual(3.0, models.trace_norm(np.diag([1.0, -2.0])))


class test_RosenzweigPorter(unittest.TestCase):
    def test_single_site(self):
        H = models.build_rosenzweig_porter(1, 1.0, PotentialSpec(), generator(0))

        self.assertEqual((1, 1), H.shape)

    def test_diagonal_dominates_for_large_c(self):
        N = 64
        H = models.build_rosenzweig_porter(
            N, 4.0, PotentialSpec("uniform", {"a": 0, "b": 1}), generator(3)
        )
        off = H - np.diag(np.diag(H))

        self.assertLess(np.max(np.abs(off)), 1e-3)

    def test_hierarchy_needs_power_of_two(self):
        model = ModelSpec.rosenzweig_porter(6, 1.0, PotentialSpec())

        with self.assertRaises(ArgumentError):
            model.hierarchy
        self.assertEqual(3, ModelSpec.rosenzweig_porter(8, 1.0, PotentialSpec()).hierarchy.n)


class test_Realization(unittest.TestCase):
    def test_builders_share_blocks(self):
        model = ModelSpec.ultrametric(3, 0.5)
        realization = model.sample_blocks(generator(4))

        np.testing.assert_array_equal(
            models.assemble(realization), model.build(generator(4))
        )

    def test_block_operator(self):
        realization = models.laplacian_blocks(LaplacianSpec(2))

        np.testing.assert_allclose(np.full((2, 2), 0.25), models.block_operator(realization, 1, 1))
        np.testing.assert_array_equal(np.zeros((1, 1)), models.block_operator(realization, 0, 3))

    def test_block_operator_rejects_missing_block(self):
        realization = models.laplacian_blocks(LaplacianSpec(2))

        with self.assertRaises(ArgumentError):
            models.block_operator(realization, 1, 2)


class test_spine_operator(unittest.TestCase):
    def test_decomposition(self):
        model = ModelSpec.ultrametric(4, 1.0)
        realization = model.sample_blocks(generator(5))
        H = models.assemble(realization)
        spec = model.hierarchy

        for x in range(spec.volume):
            S, F = models.spine_operator(model, x, realization)
            labels = spec.spine_decomposition(x).label()

            np.testing.assert_allclose(H, S + F, atol=1e-12)
            self.assertFalse(np.any(F[labels[:, None] != labels[None, :]]))

    def test_rejects_outside_center(self):
        model = ModelSpec.ultrametric(2, 1.0)

        with self.assertRaises(ArgumentError):
            models.spine_operator(model, 4, model.sample_blocks(generator(0)))


class test_model_from_dict(unittest.TestCase):
    def test_anderson_with_string_potential(self):
        model = models.model_from_dict(
            {"family": "anderson", "n": 3, "potential": "cauchy:scale=2"}
        )

        self.assertEqual(ModelFamily.ANDERSON, model.family)
        self.assertEqual("cauchy", model.potential.kind)
        self.assertEqual(2.0, model.potential.options["scale"])
        self.assertEqual(8, model.dimension)

    def test_rosenzweig_porter(self):
        model = models.model_from_dict({"family": "rosenzweig-porter", "N": 5, "c": 0.5})

        self.assertEqual(5, model.dimension)
        self.assertEqual("gaussian", model.potential.kind)

    def test_unknown_family(self):
        with self.assertRaises(ConfigurationError):
            models.model_from_dict({"family": "bogus"})

    def test_missing_parameter(self):
        with self.assertRaises(ConfigurationError):
            models.model_from_dict({"family": "ultrametric", "n": 3})

    def test_describe(self):
        model = models.model_from_dict({"family": "ultrametric", "n": 3, "c": 1})

        self.assertEqual("ultrametric n=3 c=1", model.describe())
