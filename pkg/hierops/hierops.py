import abc
import csv
import datetime
import functools
import json
import logging
import math
import os
import time
from enum import Enum, unique

import numpy as np

from . import constants, seeding
from .api import BatchIterator, RealizationPool


@unique
class StringEnum(Enum):
    @classmethod
    def all_values(cls):
        return [m.value for m in cls]

    @classmethod
    def values_dict(cls):
        return {m.value: m for m in cls}


class ModelFamily(StringEnum):
    LAPLACIAN = "laplacian"
    ANDERSON = "anderson"
    ULTRAMETRIC = "ultrametric"
    ROSENZWEIG_PORTER = "rosenzweig-porter"


class HieropsException(Exception):
    pass


class ArgumentError(HieropsException, ValueError):
    pass


class ConfigurationError(HieropsException):
    pass


class CapacityError(ConfigurationError):
    pass


class NumericalError(HieropsException):
    pass


class SolverError(NumericalError):
    pass


class CollisionError(NumericalError):
    pass


class StatisticsError(HieropsException):
    pass


class FlowAborted(NumericalError):
    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


class RunConfig(object):
    """Inputs of one harness run.

    Every preset reads its model, realization count and seed from here;
    preset-specific settings live in ``options`` and fall back to
    ``constants.OPTION_DEFAULTS``.
    """

    def __init__(
        self,
        experiment,
        model,
        model_options=None,
        realizations=1,
        seed=0,
        energy=None,
        window=constants.OPTION_DEFAULTS["window"],
        output=None,
        workers=1,
        options=None,
        echo=None,
    ):
        if realizations < 1:
            raise ConfigurationError("The realization count must be at least 1.")

        self.experiment = experiment
        self.model = model
        self.model_options = model_options or {}
        self.realizations = realizations
        self.seed = seed
        self.energy = energy
        self.window = window
        self.output = output
        self.workers = workers
        self.options = options or {}
        self.echo = echo or {}

    def get_option(self, opt, default=None):
        value = self.options.get(opt)
        if value is not None:
            return value

        return constants.OPTION_DEFAULTS.get(opt, default)


class Column(object):
    def __init__(self, name, unit=constants.DIMENSIONLESS):
        self.name = name
        self.unit = unit

    def __eq__(self, other):
        return (
            isinstance(other, Column)
            and self.name == other.name
            and self.unit == other.unit
        )

    def __repr__(self):
        return "Column({!r}, {!r})".format(self.name, self.unit)


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)

    return value


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer, np.floating, np.bool_)):
        return value.item()
    if isinstance(value, Enum):
        return value.value

    raise TypeError("Object of type {} is not serializable".format(type(value)))


def _finite_or_null(value):
    """Replace NaN and infinities, which JSON cannot express, by None."""
    if isinstance(value, dict):
        return {k: _finite_or_null(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (list, tuple)):
        return [_finite_or_null(v) for v in value]
    if isinstance(value, (float, np.floating)) and not math.isfinite(value):
        return None

    return value


class ResultTable(object):
    def __init__(self, columns, rows=None, metadata=None):
        self.columns = list(columns)
        self.rows = []
        self.metadata = metadata or {}

        for row in rows or []:
            self.add_row(row)

    @property
    def fieldnames(self):
        return [c.name for c in self.columns]

    def add_row(self, row):
        missing = set(self.fieldnames) - set(row)
        if missing:
            raise ArgumentError(
                "Row is missing columns: {}".format(", ".join(sorted(missing)))
            )

        self.rows.append({k: _cell(row[k]) for k in self.fieldnames})

    def column(self, name):
        return [row[name] for row in self.rows]

    def write_csv(self, handle):
        writer = csv.DictWriter(
            handle, fieldnames=self.fieldnames, extrasaction="ignore", lineterminator="\n"
        )
        writer.writeheader()
        for row in self.rows:
            writer.writerow(row)

    def metadata_document(self):
        document = dict(self.metadata)
        document["schema"] = [{"name": c.name, "unit": c.unit} for c in self.columns]
        document["row-count"] = len(self.rows)

        return json.dumps(
            _finite_or_null(document),
            indent=2,
            sort_keys=True,
            allow_nan=False,
            default=_json_default,
        )


class ResultStore(object):
    def __init__(self):
        self.store = {}

    def open_file(self, path):
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)

        self.store[path] = open(path, "w", newline="", encoding="utf-8")
        return self.store[path]

    def write_table(self, path, table):
        table.write_csv(self.open_file(path))
        self.open_file(metadata_path(path)).write(table.metadata_document() + "\n")

    def close(self):
        for f in self.store.values():
            f.close()


def metadata_path(path):
    return os.path.splitext(path)[0] + ".meta.json"


class RealizationFailure(object):
    def __init__(self, index, message):
        self.index = index
        self.message = message


def _run_batch(experiment, indices):
    results = []
    for index in indices:
        start = time.perf_counter()
        try:
            results.append((index, experiment.realize(index)))
        except (HieropsException, np.linalg.LinAlgError) as e:
            results.append((index, RealizationFailure(index, str(e))))
        logging.getLogger("hierops").debug(
            "realization %d finished in %.3f s", index, time.perf_counter() - start
        )

    return results


class Experiment(metaclass=abc.ABCMeta):
    experiment_name = ""
    default_model = {}
    columns = []

    @classmethod
    def validate_config(cls, document, model):
        """Preset-specific checks on a loaded config; returns error messages."""
        return []

    def __init__(self, config):
        self.config = config
        self.logger = logging.getLogger("hierops")
        self.result_store = ResultStore()
        self.failures = []
        self.summary = {}
        self.table = None

    def run(self):
        try:
            self.initialize()
            return self.execute()
        except Exception as e:
            self.logger.error("Unexpected exception {} occurred.".format(str(e)))
            return constants.EXIT_NUMERICAL_FAILURE
        finally:
            self.result_store.close()

    def initialize(self):
        pass

    def get_option(self, opt, default=None):
        return self.config.get_option(opt, default)

    def generator(self, index, *path):
        return seeding.generator(self.config.seed, index, *path)

    def realization_count(self):
        return self.config.realizations

    @abc.abstractmethod
    def realize(self, index):
        pass

    @abc.abstractmethod
    def summarize(self, results):
        pass

    def collect(self):
        count = self.realization_count()
        batch_size = max(1, count // (4 * max(1, self.config.workers)))
        pool = RealizationPool(self.config.workers)
        batches = pool.map(
            functools.partial(_run_batch, self),
            BatchIterator(iter(range(count)), n=batch_size),
        )

        results = []
        for batch in batches:
            for index, value in batch:
                if isinstance(value, RealizationFailure):
                    self.logger.warning(
                        "%s: realization %d failed: %s",
                        self.experiment_name,
                        index,
                        value.message,
                    )
                    self.failures.append(value)
                else:
                    results.append((index, value))

        return results

    def execute(self):
        self.logger.info(
            "Starting experiment %s with %d realization%s (seed %d)",
            self.experiment_name,
            self.realization_count(),
            "s" if self.realization_count() != 1 else "",
            self.config.seed,
        )
        start = time.perf_counter()

        results = self.collect()
        rows = self.summarize(results) if results else []

        self.table = ResultTable(
            self.columns,
            rows,
            {
                "experiment": self.experiment_name,
                "config": self.config.echo,
                "seed": self.config.seed,
                "realizations": self.realization_count(),
                "failures": len(self.failures),
                "summary": self.summary,
                "version": _package_version(),
                "wall-time": time.perf_counter() - start,
                "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            },
        )
        if self.config.output is not None:
            self.result_store.write_table(self.config.output, self.table)
            self.write_artifacts()

        failure_fraction = len(self.failures) / self.realization_count()
        if not results or failure_fraction > self.get_option("max-failure-fraction"):
            self.logger.error(
                "%s: %d of %d realizations failed",
                self.experiment_name,
                len(self.failures),
                self.realization_count(),
            )
            return constants.EXIT_NUMERICAL_FAILURE

        self.logger.info(
            "%s: wrote %d row%s (%d failure%s)",
            self.experiment_name,
            len(self.table.rows),
            "s" if len(self.table.rows) != 1 else "",
            len(self.failures),
            "s" if len(self.failures) != 1 else "",
        )
        return constants.EXIT_SUCCESS

    def write_artifacts(self):
        pass


def _package_version():
    from . import __version__

    return __version__
