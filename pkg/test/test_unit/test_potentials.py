import unittest

import numpy as np

from hierops import ConfigurationError
from hierops.potentials import PotentialSpec, get_all_potentials
from hierops.seeding import generator


class test_PotentialSpec(unittest.TestCase):
    def test_registry(self):
        self.assertEqual(
            {"gaussian", "cauchy", "uniform", "mixture"}, set(get_all_potentials())
        )

    def test_defaults(self):
        spec = PotentialSpec()

        self.assertEqual("gaussian", spec.kind)
        self.assertEqual({"sigma": 1.0, "mean": 0.0}, spec.options)

    def test_unknown_distribution(self):
        with self.assertRaises(ConfigurationError):
            PotentialSpec("bogus")

    def test_negative_sigma(self):
        with self.assertRaises(ConfigurationError):
            PotentialSpec("gaussian", {"sigma": -1})

    def test_nonpositive_cauchy_scale(self):
        with self.assertRaises(ConfigurationError):
            PotentialSpec("cauchy", {"scale": 0})

    def test_empty_uniform_support(self):
        with self.assertRaises(ConfigurationError):
            PotentialSpec("uniform", {"a": 1, "b": 1})

    def test_parse(self):
        spec = PotentialSpec.parse("cauchy:median=0.5,scale=2")

        self.assertEqual(PotentialSpec("cauchy", {"median": 0.5, "scale": 2.0}), spec)

    def test_parse_without_parameters(self):
        self.assertEqual(PotentialSpec("uniform"), PotentialSpec.parse("uniform"))

    def test_parse_rejects_malformed_parameters(self):
        with self.assertRaises(ConfigurationError):
            PotentialSpec.parse("gaussian:sigma")
        with self.assertRaises(ConfigurationError):
            PotentialSpec.parse("gaussian:sigma=wide")

    def test_degenerate_gaussian(self):
        spec = PotentialSpec("gaussian", {"sigma": 0, "mean": 2})

        self.assertTrue(spec.degenerate)
        np.testing.assert_array_equal([2.0, 2.0, 2.0], spec.sample(3, generator(0)))
        with self.assertRaises(ConfigurationError):
            spec.pdf(0.0)

    def test_sample_count(self):
        with self.assertRaises(ConfigurationError):
            PotentialSpec().sample(-1, generator(0))
        self.assertEqual((0,), PotentialSpec().sample(0, generator(0)).shape)

    def test_uniform_quantile(self):
        spec = PotentialSpec("uniform", {"a": 0, "b": 4})

        self.assertAlmostEqual(1.0, float(spec.quantile(0.25)))
        self.assertAlmostEqual(0.25, float(spec.pdf(2.0)))

    def test_to_dict(self):
        self.assertEqual(
            {"name": "cauchy", "options": {"median": 0.0, "scale": 1.0}},
            PotentialSpec("cauchy").to_dict(),
        )


class test_MixtureDistribution(unittest.TestCase):
    def setUp(self):
        self.spec = PotentialSpec(
            "mixture",
            {
                "components": [
                    {"weight": 0.5, "name": "uniform", "options": {"a": 0, "b": 1}},
                    {"weight": 0.5, "name": "uniform", "options": {"a": 2, "b": 3}},
                ]
            },
        )

    def test_weights_must_sum_to_one(self):
        with self.assertRaises(ConfigurationError):
            PotentialSpec(
                "mixture",
                {"components": [{"weight": 0.4, "name": "gaussian", "options": {}}]},
            )

    def test_pdf_and_cdf(self):
        self.assertAlmostEqual(0.5, float(self.spec.pdf(0.5)))
        self.assertAlmostEqual(0.0, float(self.spec.pdf(1.5)))
        self.assertAlmostEqual(0.5, float(self.spec.cdf(1.5)))

    def test_quantile(self):
        self.assertAlmostEqual(2.5, float(self.spec.quantile(0.75)), places=6)

    def test_sample(self):
        samples = self.spec.sample(10000, generator(3))

        self.assertFalse(np.any((samples > 1) & (samples < 2)))
        self.assertAlmostEqual(0.5, np.mean(samples < 1.5), delta=0.03)
