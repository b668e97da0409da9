import os
import unittest

from hierops import ModelFamily, constants
from hierops.experiments import (
    AndersonStatisticsExperiment,
    CorrelatorProfileExperiment,
    LaplacianExactExperiment,
)
from hierops.loader import RunConfigLoader, load_file


def load(**document):
    document.setdefault("version", 1)
    loader = RunConfigLoader(document)
    loader.load()

    return loader


class test_RunConfigLoader(unittest.TestCase):
    def test_defaults(self):
        loader = load(experiment="laplacian-exact")

        self.assertEqual([], loader.errors)
        self.assertIsInstance(loader.result, LaplacianExactExperiment)
        config = loader.result.config
        self.assertEqual(ModelFamily.LAPLACIAN, config.model.family)
        self.assertEqual(2, config.model.n)
        self.assertEqual(1, config.realizations)
        self.assertEqual(0, config.seed)
        self.assertEqual("laplacian-exact.csv", config.output)
        self.assertEqual(
            constants.OPTION_DEFAULTS["dense-cap"], config.get_option("dense-cap")
        )

    def test_model_overrides_merge_with_preset_defaults(self):
        loader = load(experiment="laplacian-exact", model={"n": 4, "c": 0.5})

        self.assertEqual([], loader.errors)
        spec = loader.result.config.model.laplacian
        self.assertEqual(4, spec.n)
        self.assertEqual(0.5, spec.c)
        self.assertEqual(1.0, spec.eps)

    def test_family_switch_drops_preset_defaults(self):
        loader = load(
            experiment="anderson-stats", model={"family": "laplacian", "n": 3}
        )

        self.assertEqual([], loader.errors)
        self.assertIsInstance(loader.result, AndersonStatisticsExperiment)
        self.assertEqual(
            {"family": "laplacian", "n": 3}, loader.result.config.model_options
        )
        self.assertIsNone(loader.result.config.model.potential)

    def test_potential_string_is_parsed(self):
        loader = load(
            experiment="anderson-stats", model={"potential": "cauchy:scale=2"}
        )

        self.assertEqual([], loader.errors)
        potential = loader.result.config.model.potential
        self.assertEqual("cauchy", potential.kind)
        self.assertEqual(2.0, potential.options["scale"])

    def test_unknown_potential(self):
        loader = load(experiment="anderson-stats", model={"potential": "bogus"})

        self.assertIsNone(loader.result)
        self.assertEqual(1, len(loader.errors))
        self.assertTrue(loader.errors[0].startswith("model:"))

    def test_unknown_experiment(self):
        loader = load(experiment="bogus")

        self.assertIsNone(loader.result)
        self.assertTrue(loader.errors[0].startswith("experiment:"))

    def test_couplings_length(self):
        loader = load(
            experiment="laplacian-exact", model={"n": 3, "couplings": [1.0, 1.0]}
        )

        self.assertEqual(["model: expected 3 couplings, got 2"], loader.errors)
        self.assertIsNone(loader.result)

    def test_capacity(self):
        loader = load(
            experiment="laplacian-exact", model={"n": 5}, options={"dense-cap": 4}
        )

        self.assertIsNone(loader.result)
        self.assertEqual(1, len(loader.errors))
        self.assertTrue(loader.errors[0].startswith("model: Refusing to build"))

    def test_sizes_above_the_cap(self):
        loader = load(
            experiment="laplacian-exact", options={"sizes": [2, 9], "dense-cap": 8}
        )

        self.assertEqual(
            ["options: sizes [9] exceed the dense cap 2^8"], loader.errors
        )

    def test_wrong_family_for_preset(self):
        loader = load(
            experiment="laplacian-exact",
            model={"family": "ultrametric", "n": 2, "c": 1.0},
        )

        self.assertEqual(
            ["experiment laplacian-exact: the model family must be one of laplacian"],
            loader.errors,
        )

    def test_correlator_profile_needs_realizations(self):
        loader = load(experiment="correlator-profile", realizations=5)

        self.assertEqual(
            ["realizations: correlator-profile needs at least 20, got 5"],
            loader.errors,
        )

        loader = load(experiment="correlator-profile", realizations=20)

        self.assertEqual([], loader.errors)
        self.assertIsInstance(loader.result, CorrelatorProfileExperiment)

    def test_spine_check_rejects_non_dyadic_rosenzweig_porter(self):
        loader = load(
            experiment="spine-check",
            model={"family": "rosenzweig-porter", "N": 12, "c": 1.0},
        )

        self.assertEqual(
            ["model: spine-check needs N to be a power of two, got 12"],
            loader.errors,
        )

    def test_schema_errors(self):
        loader = load(experiment="laplacian-exact", realizations=0, window=-1.0)

        self.assertIsNone(loader.result)
        self.assertEqual(2, len(loader.errors))

    def test_config_is_echoed(self):
        loader = load(experiment="laplacian-exact", seed=42)

        self.assertEqual(42, loader.result.config.echo["seed"])
        self.assertEqual("laplacian-exact", loader.result.config.echo["experiment"])


class test_example_configurations(unittest.TestCase):
    def test_examples_are_valid(self):
        directory = os.path.join(
            os.path.dirname(__file__), "..", "..", "assets", "configs"
        )
        names = [
            name for name in sorted(os.listdir(directory)) if not name.endswith(".md")
        ]
        self.assertEqual(5, len(names))

        for name in names:
            with open(os.path.join(directory, name), "r", encoding="utf-8") as f:
                loader = RunConfigLoader(load_file(f))
            loader.load()

            self.assertEqual([], loader.errors, name)
