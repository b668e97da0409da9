import argparse
import logging
import sys

from hierops import ConfigurationError, constants
from hierops.experiments import get_all_experiments
from hierops.loader import RunConfigLoader, load_file

# Command-line flags and the config keys they override.
MODEL_FLAGS = {"n": "n", "c": "c", "eps": "eps", "dist": "potential"}
RUN_FLAGS = {
    "reals": "realizations",
    "seed": "seed",
    "energy": "energy",
    "window": "window",
    "workers": "workers",
    "out": "output",
}


def build_parser():
    a = argparse.ArgumentParser(
        prog="hierops", description="Run a hierarchical random operator experiment."
    )

    a.add_argument("experiment", choices=sorted(get_all_experiments()))
    a.add_argument("--config", dest="config", type=argparse.FileType("r"))
    a.add_argument("--n", dest="n", type=int)
    a.add_argument("--c", dest="c", type=float)
    a.add_argument("--eps", dest="eps", type=float)
    a.add_argument("--dist", dest="dist", metavar="NAME:PARAMS")
    a.add_argument("--reals", dest="reals", type=int)
    a.add_argument("--seed", dest="seed", type=int)
    a.add_argument("--energy", dest="energy", type=float)
    a.add_argument("--window", dest="window", type=float)
    a.add_argument("--workers", dest="workers", type=int)
    a.add_argument("--out", dest="out")
    a.add_argument("-k", "--check-only", dest="check_only", action="store_true")
    verbosity_levels = {
        "quiet": logging.NOTSET,
        "errors": logging.ERROR,
        "normal": logging.INFO,
        "verbose": logging.DEBUG,
    }

    a.add_argument(
        "-v",
        "--verbosity",
        choices=verbosity_levels.keys(),
        dest="verbosity",
        default="normal",
        help="Log all actions",
    )

    return a, verbosity_levels


def merge_arguments(config, args):
    """Overlay command-line flags on a config document; flags win."""
    config = dict(config or {})
    config.setdefault("version", 1)
    config["experiment"] = args.experiment

    model = dict(config.get("model") or {})
    for flag, key in MODEL_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            model[key] = value
    config["model"] = model

    for flag, key in RUN_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            config[key] = value

    return config


def main(argv=None):
    a, verbosity_levels = build_parser()
    args = a.parse_args(argv)

    logger = logging.getLogger("hierops")

    logger.setLevel(verbosity_levels[args.verbosity])
    logger.handlers[:] = [logging.StreamHandler()]

    try:
        config = load_file(args.config) if args.config is not None else {}
    except ConfigurationError as e:
        logger.error(f"The supplied configuration was not valid: {e}")
        return constants.EXIT_CONFIGURATION_ERROR

    if not isinstance(config, dict):
        logger.error("The configuration file must hold a key-value document.")
        return constants.EXIT_CONFIGURATION_ERROR

    loader = RunConfigLoader(merge_arguments(config, args))
    loader.load()
    if loader.errors:
        errors = "\n".join(loader.errors)
        logger.error(f"The supplied configuration was not valid: {errors}")
        return constants.EXIT_CONFIGURATION_ERROR

    experiment = loader.result

    if args.check_only:
        logger.info("Configuration validated successfully.")
        return constants.EXIT_SUCCESS

    return experiment.run()


if __name__ == "__main__":
    sys.exit(main())
