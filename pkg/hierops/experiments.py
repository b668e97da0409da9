"""Preset experiments run by the harness.

Each preset is an ``Experiment`` subclass registered by its
``experiment_name``. A preset turns realization indices into per-realization
results (possibly on worker processes) and folds them, in index order, into
the rows of its result table.
"""

import math
import os

import numpy as np
import scipy.stats

from . import constants, models
from .hierarchy import distance_matrix
from .hierops import (
    Column,
    ConfigurationError,
    Experiment,
    FlowAborted,
    ModelFamily,
    NumericalError,
    RealizationFailure,
)
from .localization import (
    EnergyWindow,
    class_means,
    correlator_row,
    decay_moment,
    ipr_kernel_sums,
    localization_center,
    outside_ball_curve,
    profile_from_class_means,
)
from .rgflow import DensityGrid, flow
from .spectra import (
    bootstrap_ci,
    SpectralData,
    default_window_count,
    dos_maximum,
    eigh,
    eigvals,
    gap_ratio_mean,
    ks_statistic,
    local_window,
    rescale_points,
    semicircle_cdf,
    spectral_dimension,
)
from .dbm import recursive_spectrum

_all_experiments = None

GAUSSIAN_POTENTIAL = {"name": "gaussian", "options": {"sigma": 1.0}}


def get_all_experiments():
    global _all_experiments

    def get_subclasses(cls):
        classes = []
        for subclass in cls.__subclasses__():
            classes.append(subclass)
            classes.extend(get_subclasses(subclass))

        return classes

    if _all_experiments is None:
        _all_experiments = {
            cls.experiment_name: cls
            for cls in get_subclasses(Experiment)
            if cls.experiment_name
        }

    return _all_experiments


def get_experiment(name):
    experiments = get_all_experiments()
    if name not in experiments:
        raise ConfigurationError(
            "The experiment {} does not exist. Available: {}".format(
                name, ", ".join(sorted(experiments))
            )
        )

    return experiments[name]


def run_experiment(config):
    """Run the preset named by ``config`` and return its result table.

    Per-realization failures are counted in the table metadata; a run that
    could not produce a table at all raises ``NumericalError``.
    """
    experiment = get_experiment(config.experiment)(config)
    status = experiment.run()
    if experiment.table is None:
        raise NumericalError(
            "Experiment {} did not complete (exit code {})".format(config.experiment, status)
        )

    experiment.table.metadata["exit-code"] = status
    return experiment.table


def _stderr(values):
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return math.nan

    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def _family_is(document, model, *families):
    if model.family not in families:
        return [
            "experiment {}: the model family must be one of {}".format(
                document["experiment"], ", ".join(f.value for f in families)
            )
        ]

    return []


class PresetExperiment(Experiment):
    """Shared plumbing for presets that sweep a parameter list."""

    def model_with(self, **overrides):
        """The configured model with some of its parameters replaced."""
        options = dict(self.config.model_options)
        if "n" in overrides and overrides["n"] != options.get("n"):
            options.pop("couplings", None)
        options.update(overrides)

        return models.model_from_dict(options, self.get_option("dense-cap"))

    def sizes(self):
        return self.get_option("sizes") or [self.config.model.n]

    def c_values(self):
        return self.get_option("c-values") or [self.config.model.c]

    def split_index(self, index):
        """(parameter index, realization index) for a flattened sweep index."""
        return divmod(index, self.config.realizations)

    @classmethod
    def check_sizes(cls, document):
        cap = document["options"].get("dense-cap", constants.OPTION_DEFAULTS["dense-cap"])
        too_large = [n for n in document["options"].get("sizes") or [] if n > cap]
        if too_large:
            return [
                "options: sizes {} exceed the dense cap 2^{}".format(too_large, cap)
            ]

        return []


class LaplacianExactExperiment(PresetExperiment):
    experiment_name = "laplacian-exact"
    default_model = {"family": "laplacian", "n": 2, "eps": 1.0, "c": 1.0}
    columns = [
        Column("n"),
        Column("c"),
        Column("eps", constants.ENERGY),
        Column("max_abs_deviation", constants.ENERGY),
        Column("max_rel_deviation"),
        Column("multiplicity_ok"),
    ]

    @classmethod
    def validate_config(cls, document, model):
        return _family_is(document, model, ModelFamily.LAPLACIAN) + cls.check_sizes(
            document
        )

    def realization_count(self):
        return len(self.sizes()) * len(self.c_values())

    def realize(self, index):
        n_index, c_index = divmod(index, len(self.c_values()))
        n, c = self.sizes()[n_index], self.c_values()[c_index]
        if self.get_option("sizes") or self.get_option("c-values"):
            model = self.model_with(n=n, c=c)
        else:
            model = self.config.model

        spec = model.laplacian
        values, multiplicities = models.laplacian_spectrum(spec)
        expected = np.sort(np.repeat(values, multiplicities))
        computed = eigvals(model.build())

        deviation = np.abs(computed - expected)
        relative = deviation / np.maximum(1.0, np.abs(expected))
        tolerance = 1e-9 * max(1.0, float(np.max(np.abs(expected))))

        return {
            "n": n,
            "c": c,
            "eps": spec.eps,
            "max_abs_deviation": float(np.max(deviation)),
            "max_rel_deviation": float(np.max(relative)),
            "multiplicity_ok": bool(np.max(deviation) <= tolerance),
        }

    def summarize(self, results):
        rows = [row for _, row in results]
        self.summary = {
            "max-rel-deviation": max(row["max_rel_deviation"] for row in rows),
            "all-multiplicities-ok": all(row["multiplicity_ok"] for row in rows),
        }

        return rows


class SpectralDimensionExperiment(PresetExperiment):
    experiment_name = "specdim"
    default_model = {"family": "laplacian", "n": 10, "eps": 1.0, "c": 1.0}
    columns = [
        Column("c"),
        Column("estimate"),
        Column("expected"),
        Column("slope_stderr"),
        Column("r_squared"),
        Column("finite_volume_estimate"),
    ]
    finite_volume_depth = 24

    @classmethod
    def validate_config(cls, document, model):
        return _family_is(document, model, ModelFamily.LAPLACIAN)

    def realization_count(self):
        return len(self.c_values())

    def realize(self, index):
        c = self.c_values()[index]
        eps = self.config.model.laplacian.eps
        if c <= 0:
            raise ConfigurationError("The spectral dimension needs c > 0, got {}".format(c))

        estimate, fit = spectral_dimension(
            models.LaplacianSpec(self.config.model.n, eps=eps, c=c), infinite_volume=True
        )
        finite, _ = spectral_dimension(
            models.LaplacianSpec(
                max(self.config.model.n, self.finite_volume_depth), eps=eps, c=c
            ),
            infinite_volume=False,
        )

        return {
            "c": c,
            "estimate": estimate,
            "expected": 2 / c,
            "slope_stderr": fit.stderr,
            "r_squared": fit.r_squared,
            "finite_volume_estimate": finite,
        }

    def summarize(self, results):
        rows = [row for _, row in results]
        self.summary = {
            "max-relative-error": max(
                abs(row["estimate"] - row["expected"]) / row["expected"] for row in rows
            )
        }

        return rows


class AndersonStatisticsExperiment(PresetExperiment):
    experiment_name = "anderson-stats"
    default_model = {
        "family": "anderson",
        "n": 10,
        "eps": 1.0,
        "c": 1.0,
        "potential": GAUSSIAN_POTENTIAL,
    }
    columns = [
        Column("realization"),
        Column("gap_ratio_mean"),
        Column("points_in_window"),
        Column("energy", constants.ENERGY),
    ]

    def realize(self, index):
        model = self.config.model
        eigs = eigvals(model.build(self.generator(index, self.experiment_name)))

        if self.config.energy is None:
            E = dos_maximum(
                [SpectralData(eigs, None, 0.0)], self.get_option("kernel-bandwidth")
            )
        else:
            E = self.config.energy
        window = local_window(eigs, E, default_window_count(model.n))
        ratio = gap_ratio_mean(window, (0.0, 1.0))

        points = rescale_points(eigs, E, model.n, self.config.window)

        return {
            "realization": index,
            "gap_ratio_mean": ratio,
            "points_in_window": len(points),
            "energy": E,
        }

    def summarize(self, results):
        rows = [row for _, row in results]
        ratios = [row["gap_ratio_mean"] for row in rows]
        self.summary = {
            "mean-energy": float(np.mean([row["energy"] for row in rows])),
            "gap-ratio-mean": float(np.mean(ratios)),
            "gap-ratio-stderr": _stderr(ratios),
            "poisson-reference": constants.POISSON_GAP_RATIO,
            "goe-reference": constants.GOE_GAP_RATIO,
        }

        return rows


class GapRatioSweepExperiment(PresetExperiment):
    """Gap-ratio means over a list of c values, one row per (c, realization)."""

    columns = [
        Column("c"),
        Column("realization"),
        Column("gap_ratio_mean"),
    ]

    def realization_count(self):
        return len(self.c_values()) * self.config.realizations

    def model_for(self, c):
        return self.model_with(c=c)

    def realize(self, index):
        c_index, realization = self.split_index(index)
        c = self.c_values()[c_index]
        model = self.model_for(c)
        eigs = eigvals(model.build(self.generator(realization, self.experiment_name, c_index)))

        row = {
            "c": c,
            "realization": realization,
            "gap_ratio_mean": gap_ratio_mean(eigs, self.get_option("quantile-window")),
        }
        distance = self.semicircle_distance(model, eigs)
        if distance is not None:
            row["semicircle_ks"] = distance

        return row

    def semicircle_distance(self, model, eigs):
        return None

    def summarize(self, results):
        rows = [row for _, row in results]
        self.summary = {"per-c": []}
        for c in self.c_values():
            selected = [row for row in rows if row["c"] == c]
            ratios = [row["gap_ratio_mean"] for row in selected]
            if not ratios:
                continue

            entry = {
                "c": c,
                "gap-ratio-mean": float(np.mean(ratios)),
                "gap-ratio-stderr": _stderr(ratios),
            }
            if "semicircle_ks" in selected[0]:
                entry["semicircle-ks"] = float(
                    np.mean([row["semicircle_ks"] for row in selected])
                )
            self.summary["per-c"].append(entry)

        return rows


class UltrametricSweepExperiment(GapRatioSweepExperiment):
    experiment_name = "ultrametric-sweep"
    default_model = {"family": "ultrametric", "n": 8, "c": 1.0}

    @classmethod
    def validate_config(cls, document, model):
        return _family_is(document, model, ModelFamily.ULTRAMETRIC)

    def semicircle_distance(self, model, eigs):
        rescaled = models.rescaled_ultrametric(eigs, model.n, model.c)

        return float(scipy.stats.kstest(rescaled, semicircle_cdf).statistic)


class RosenzweigPorterExperiment(GapRatioSweepExperiment):
    experiment_name = "rp-transition"
    default_model = {
        "family": "rosenzweig-porter",
        "N": 256,
        "c": 0.5,
        "potential": GAUSSIAN_POTENTIAL,
    }

    @classmethod
    def validate_config(cls, document, model):
        return _family_is(document, model, ModelFamily.ROSENZWEIG_PORTER)


class FlowExperiment(PresetExperiment):
    experiment_name = "rgflow"
    default_model = {
        "family": "anderson",
        "n": 8,
        "eps": 1.0,
        "c": 1.0,
        "potential": {"name": "cauchy", "options": {"median": 0.0, "scale": 1.0}},
    }
    columns = [
        Column("step"),
        Column("shift", constants.ENERGY),
        Column("window_max"),
        Column("sup_norm"),
        Column("tail_mass"),
        Column("mass"),
    ]

    @classmethod
    def validate_config(cls, document, model):
        return _family_is(document, model, ModelFamily.ANDERSON)

    def initialize(self):
        self.report = None

    def realization_count(self):
        return 1

    def initial_density(self):
        path = self.get_option("initial-density")
        if path is not None:
            self.logger.info("Reading the initial density from %s", path)
            return DensityGrid.load(path)

        return DensityGrid.from_potential(self.config.model.potential)

    def realize(self, index):
        spec = self.config.model.laplacian
        steps = self.get_option("steps")
        couplings = None
        if spec.couplings is not None or spec.levels is not None:
            couplings = [spec.coupling(r) for r in range(1, steps + 1)]

        try:
            return flow(
                self.initial_density(),
                spec.eps,
                spec.c,
                steps,
                interval=self.get_option("interval"),
                excision=self.get_option("excision"),
                couplings=couplings,
            )
        except FlowAborted as e:
            return e.report

    def summarize(self, results):
        _, report = results[0]
        report.fit()
        self.report = report
        self.summary = report.summary()
        if report.aborted:
            self.failures.append(
                RealizationFailure(0, "The flow aborted after {} steps".format(len(report.steps)))
            )

        return [
            {
                "step": step,
                "shift": shift,
                "window_max": window_max,
                "sup_norm": sup_norm,
                "tail_mass": tail,
                "mass": mass,
            }
            for step, shift, window_max, sup_norm, tail, mass in zip(
                report.steps,
                report.shifts,
                report.sup_norms,
                report.global_sup_norms,
                report.tail_masses,
                report.masses,
            )
        ]

    def density_path(self):
        return os.path.splitext(self.config.output)[0] + ".density.txt"

    def write_artifacts(self):
        if self.report is not None and self.report.density is not None:
            self.report.density.save(self.density_path())
            self.logger.info("Wrote the final density to %s", self.density_path())


class RecursionCheckExperiment(PresetExperiment):
    experiment_name = "dbm-check"
    default_model = {"family": "ultrametric", "n": 6, "c": 1.0}
    columns = [
        Column("realization"),
        Column("recursive_gap_ratio"),
        Column("direct_gap_ratio"),
    ]

    @classmethod
    def validate_config(cls, document, model):
        return _family_is(document, model, ModelFamily.ULTRAMETRIC)

    def realize(self, index):
        model = self.config.model
        recursive, _ = recursive_spectrum(
            model.n, model.c, self.generator(index, self.experiment_name, "recursive")
        )
        direct = eigvals(model.build(self.generator(index, self.experiment_name, "direct")))
        window = self.get_option("quantile-window")
        row = {
            "realization": index,
            "recursive_gap_ratio": gap_ratio_mean(recursive, window),
            "direct_gap_ratio": gap_ratio_mean(direct, window),
        }

        return row, recursive, direct

    def summarize(self, results):
        rows = [row for _, (row, _, _) in results]
        recursive_means = [row["recursive_gap_ratio"] for row in rows]
        direct_means = [row["direct_gap_ratio"] for row in rows]
        self.summary = {
            "pooled-ks": ks_statistic(
                np.concatenate([r for _, (_, r, _) in results]),
                np.concatenate([d for _, (_, _, d) in results]),
            ),
            "recursive-gap-ratio-mean": float(np.mean(recursive_means)),
            "direct-gap-ratio-mean": float(np.mean(direct_means)),
        }

        return rows


class SpineCheckExperiment(PresetExperiment):
    experiment_name = "spine-check"
    default_model = {"family": "ultrametric", "n": 6, "c": 1.0}
    columns = [
        Column("realization"),
        Column("max_cross_block", constants.ENERGY),
        Column("max_rank_excess"),
    ]

    @classmethod
    def validate_config(cls, document, model):
        N = model.N
        if model.family is ModelFamily.ROSENZWEIG_PORTER and N & (N - 1):
            return ["model: spine-check needs N to be a power of two, got {}".format(N)]

        return []

    def realize(self, index):
        model = self.config.model
        hierarchy = model.hierarchy
        realization = model.sample_blocks(self.generator(index, self.experiment_name))

        max_cross = 0.0
        max_excess = -math.inf
        for x in range(hierarchy.volume):
            S, F = models.spine_operator(model, x, realization)
            labels = hierarchy.spine_decomposition(x).label()
            cross = labels[:, None] != labels[None, :]
            max_cross = max(max_cross, float(np.max(np.abs(F[cross]), initial=0.0)))

            bound = sum(
                np.linalg.matrix_rank(
                    models.block_operator(realization, r, hierarchy.block_id(x, r))
                )
                for r in range(hierarchy.n + 1)
            )
            max_excess = max(max_excess, int(np.linalg.matrix_rank(S)) - int(bound))

        return {
            "realization": index,
            "max_cross_block": max_cross,
            "max_rank_excess": max_excess,
        }

    def summarize(self, results):
        rows = [row for _, row in results]
        self.summary = {
            "max-cross-block": max(row["max_cross_block"] for row in rows),
            "max-rank-excess": max(row["max_rank_excess"] for row in rows),
        }

        return rows


class TraceNormExperiment(PresetExperiment):
    experiment_name = "trace-norm-check"
    default_model = {"family": "ultrametric", "n": 10, "c": 2.0}
    columns = [
        Column("level"),
        Column("block_size"),
        Column("mean_trace_norm", constants.ENERGY),
        Column("stderr", constants.ENERGY),
        Column("power_bound", constants.ENERGY),
        Column("jensen_bound", constants.ENERGY),
    ]

    @classmethod
    def validate_config(cls, document, model):
        return _family_is(document, model, ModelFamily.ULTRAMETRIC)

    def realize(self, index):
        model = self.config.model
        realization = model.sample_blocks(self.generator(index, self.experiment_name))

        return np.array(
            [
                models.trace_norm(models.block_operator(realization, r, 0))
                for r in range(1, model.n + 1)
            ]
        )

    def summarize(self, results):
        norms = np.array([value for _, value in results])
        rows = []
        for r in range(1, self.config.model.n + 1):
            power, jensen = models.ultrametric_block_trace_bounds(r, self.config.model.c)
            rows.append(
                {
                    "level": r,
                    "block_size": 1 << r,
                    "mean_trace_norm": float(np.mean(norms[:, r - 1])),
                    "stderr": _stderr(norms[:, r - 1]),
                    "power_bound": power,
                    "jensen_bound": jensen,
                }
            )

        self.summary = {
            "within-power-bound": all(
                row["mean_trace_norm"]
                <= row["power_bound"] + 3 * np.nan_to_num(row["stderr"])
                for row in rows
            ),
            "within-jensen-bound": all(
                row["mean_trace_norm"]
                <= row["jensen_bound"] + 3 * np.nan_to_num(row["stderr"])
                for row in rows
            ),
        }

        return rows


class IprProfileExperiment(PresetExperiment):
    experiment_name = "ipr-profile"
    default_model = {
        "family": "anderson",
        "n": 8,
        "eps": 1.0,
        "c": 0.8,
        "potential": {"name": "gaussian", "options": {"sigma": 0.5}},
    }
    columns = [
        Column("n"),
        Column("bandwidth", constants.ENERGY),
        Column("ipr_average"),
        Column("ci_lo"),
        Column("ci_hi"),
    ]

    @classmethod
    def validate_config(cls, document, model):
        return _family_is(document, model, ModelFamily.ANDERSON) + cls.check_sizes(document)

    def realization_count(self):
        return len(self.sizes()) * self.config.realizations

    def energy(self, model):
        if self.config.energy is not None:
            return self.config.energy

        values, _ = models.laplacian_spectrum(model.laplacian)
        return float(values[-1])

    def realize(self, index):
        n_index, realization = self.split_index(index)
        n = self.sizes()[n_index]
        model = self.model_with(n=n)
        sd = eigh(model.build(self.generator(realization, self.experiment_name, n_index)))
        E = self.energy(model)

        return n, np.array(
            [ipr_kernel_sums(sd, E, bandwidth) for bandwidth in self.get_option("bandwidths")]
        )

    def summarize(self, results):
        rows = []
        self.summary = {"energy": {}}
        for n_index, n in enumerate(self.sizes()):
            sums = np.array([value for _, (size, value) in results if size == n])
            if len(sums) == 0:
                continue
            self.summary["energy"][str(n)] = self.energy(self.model_with(n=n))

            for b, bandwidth in enumerate(self.get_option("bandwidths")):
                numerators, denominators = sums[:, b, 0], sums[:, b, 1]
                if denominators.sum() <= 0:
                    self.logger.warning(
                        "ipr-profile: no kernel mass at n=%d with bandwidth %g", n, bandwidth
                    )
                    average, lo, hi = math.nan, math.nan, math.nan
                else:
                    average = float(numerators.mean() / denominators.mean())
                    lo, hi = bootstrap_ci(
                        lambda idx: numerators[idx].sum() / denominators[idx].sum()
                        if denominators[idx].sum() > 0
                        else math.nan,
                        len(sums),
                        resamples=self.get_option("bootstrap-resamples"),
                        seed=self.config.seed,
                    )

                rows.append(
                    {
                        "n": n,
                        "bandwidth": bandwidth,
                        "ipr_average": average,
                        "ci_lo": lo,
                        "ci_hi": hi,
                    }
                )

        return rows


class CorrelatorProfileExperiment(PresetExperiment):
    experiment_name = "correlator-profile"
    default_model = {
        "family": "anderson",
        "n": 6,
        "eps": 1.0,
        "c": 1.0,
        "potential": GAUSSIAN_POTENTIAL,
    }
    columns = [
        Column("n"),
        Column("distance"),
        Column("mean_correlator"),
        Column("class_size"),
    ]
    minimum_realizations = 20
    half_width = 0.5

    @classmethod
    def validate_config(cls, document, model):
        errors = cls.check_sizes(document)
        if model.family is ModelFamily.ROSENZWEIG_PORTER:
            errors.append("model: correlator-profile needs a hierarchical model")
        if document["realizations"] < cls.minimum_realizations:
            errors.append(
                "realizations: correlator-profile needs at least {}, got {}".format(
                    cls.minimum_realizations, document["realizations"]
                )
            )

        return errors

    def realization_count(self):
        return len(self.sizes()) * self.config.realizations

    def window(self, model):
        interval = self.config.options.get("interval")
        if interval is not None:
            return EnergyWindow(*interval)

        if self.config.energy is not None:
            E = self.config.energy
        elif model.laplacian is not None:
            values, _ = models.laplacian_spectrum(model.laplacian)
            E = float(values[-1]) / 2
        else:
            E = 0.0

        return EnergyWindow.around(E, self.half_width)

    def realize(self, index):
        n_index, realization = self.split_index(index)
        n = self.sizes()[n_index]
        model = self.model_with(n=n)
        sd = eigh(model.build(self.generator(realization, self.experiment_name, n_index)))
        I = self.window(model)

        means, _ = class_means(correlator_row(sd, 0, I), 0, n)
        inside = np.nonzero(I.contains(sd.eigenvalues))[0]
        moments = [
            decay_moment(sd.eigenvectors[:, i], model.c, localization_center(sd.eigenvectors[:, i]))
            for i in inside
        ]

        return n, means, moments, outside_ball_curve(sd, 0, I)

    def summarize(self, results):
        rows = []
        self.summary = {"per-n": []}
        for n in self.sizes():
            selected = [
                (means, moments, curve)
                for _, (size, means, moments, curve) in results
                if size == n
            ]
            if not selected:
                continue

            sizes = np.bincount(distance_matrix(n)[0], minlength=n + 1)
            profile = profile_from_class_means(
                [means for means, _, _ in selected],
                sizes,
                resamples=self.get_option("bootstrap-resamples"),
                seed=self.config.seed,
            )
            moments = [m for _, per_realization, _ in selected for m in per_realization]
            curve = np.mean([curve for _, _, curve in selected], axis=0)
            if not moments:
                self.logger.warning("correlator-profile: no eigenvalue in the window at n=%d", n)

            self.summary["per-n"].append(
                {
                    "n": n,
                    "rate": profile.rate,
                    "rate-ci": list(profile.rate_ci),
                    "intercept": profile.intercept,
                    "residual": profile.residual,
                    "median-decay-moment": float(np.median(moments)) if moments else math.nan,
                    "outside-ball-mass": [float(v) for v in curve],
                    "realizations": profile.realizations,
                }
            )
            for d in profile.distances:
                rows.append(
                    {
                        "n": n,
                        "distance": d,
                        "mean_correlator": float(profile.means[d]),
                        "class_size": int(profile.class_sizes[d]),
                    }
                )

        return rows
