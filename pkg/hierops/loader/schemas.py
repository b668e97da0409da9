import os

from .. import constants, experiments, hierops
from ..potentials import PotentialSpec
from .input_type import InputType


def get_available_versions(input_type):
    return SCHEMAS[input_type].keys()


def get_schema(input_type, version):
    return SCHEMAS[input_type][version]


def _coerce_potential(value):
    if isinstance(value, str):
        try:
            return PotentialSpec.parse(value).to_dict()
        except hierops.ConfigurationError:
            return {"name": value.partition(":")[0], "options": {}}

    return value


def _validate_potential(field, value, error):
    try:
        PotentialSpec(value["name"], value.get("options"))
    except hierops.ConfigurationError as e:
        error(field, str(e))


def _validate_experiment(field, value, error):
    available = experiments.get_all_experiments()
    if value not in available:
        error(
            field,
            "The experiment {} does not exist. Available: {}".format(
                value, ", ".join(sorted(available))
            ),
        )


def _validate_pair(field, value, error):
    if len(value) != 2 or value[0] >= value[1]:
        error(field, "must be a pair [lo, hi] with lo < hi")


def _validate_readable(field, value, error):
    if not os.path.isfile(value):
        error(field, "The file {} does not exist.".format(value))


def _positive(field, value, error):
    if value <= 0:
        error(field, "must be positive")


OPTIONS_SCHEMA = {
    "sizes": {"type": "list", "schema": {"type": "integer", "min": 0}},
    "c-values": {"type": "list", "schema": {"type": "number"}},
    "quantile-window": {
        "type": "list",
        "schema": {"type": "number", "min": 0, "max": 1},
        "check_with": _validate_pair,
        "default": constants.OPTION_DEFAULTS["quantile-window"],
    },
    "bandwidths": {
        "type": "list",
        "schema": {"type": "number", "check_with": _positive},
        "default": constants.OPTION_DEFAULTS["bandwidths"],
    },
    "steps": {"type": "integer", "min": 1, "default": constants.OPTION_DEFAULTS["steps"]},
    "interval": {
        "type": "list",
        "schema": {"type": "number"},
        "check_with": _validate_pair,
    },
    "dense-cap": {
        "type": "integer",
        "min": 0,
        "max": 16,
        "default": constants.OPTION_DEFAULTS["dense-cap"],
    },
    "max-failure-fraction": {
        "type": "number",
        "min": 0,
        "max": 1,
        "default": constants.OPTION_DEFAULTS["max-failure-fraction"],
    },
    "bootstrap-resamples": {
        "type": "integer",
        "min": 1,
        "default": constants.OPTION_DEFAULTS["bootstrap-resamples"],
    },
    "initial-density": {"type": "string", "check_with": _validate_readable},
    "kernel-bandwidth": {
        "type": "number",
        "check_with": _positive,
        "default": constants.OPTION_DEFAULTS["kernel-bandwidth"],
    },
    "excision": {
        "type": "number",
        "check_with": _positive,
        "default": constants.OPTION_DEFAULTS["excision"],
    },
}

MODEL_SCHEMA = {
    "family": {"type": "string", "allowed": hierops.ModelFamily.all_values()},
    "n": {"type": "integer", "min": 0},
    "N": {"type": "integer", "min": 1},
    "c": {"type": "number"},
    "eps": {"type": "number", "min": 0},
    "couplings": {"type": "list", "schema": {"type": "number"}},
    "levels": {"type": "integer", "min": 0},
    "potential": {
        "type": "dict",
        "coerce": _coerce_potential,
        "check_with": _validate_potential,
        "schema": {
            "name": {"type": "string", "required": True},
            "options": {"type": "dict", "default": {}},
        },
    },
}

SCHEMAS = {
    InputType.RUN_CONFIG: {
        1: {
            "version": {"type": "integer", "required": True, "allowed": [1]},
            "experiment": {
                "type": "string",
                "required": True,
                "check_with": _validate_experiment,
            },
            "model": {"type": "dict", "default": {}, "schema": MODEL_SCHEMA},
            "realizations": {
                "type": "integer",
                "min": 1,
                "default": constants.OPTION_DEFAULTS["realizations"],
            },
            "seed": {
                "type": "integer",
                "min": 0,
                "max": 2**64 - 1,
                "default": constants.OPTION_DEFAULTS["seed"],
            },
            "energy": {"type": "number", "nullable": True, "default": None},
            "window": {
                "type": "number",
                "check_with": _positive,
                "default": constants.OPTION_DEFAULTS["window"],
            },
            "workers": {
                "type": "integer",
                "min": 1,
                "default": constants.OPTION_DEFAULTS["workers"],
            },
            "output": {
                "type": "string",
                "nullable": True,
                "default_setter": lambda doc: doc["experiment"] + ".csv",
            },
            "options": {"type": "dict", "default": {}, "schema": OPTIONS_SCHEMA},
        }
    },
}
