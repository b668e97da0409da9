from abc import ABCMeta, abstractmethod
from typing import Dict

import cerberus
import numpy as np
import scipy.optimize
import scipy.stats

from .hierops import ConfigurationError

_all_potentials = None


def get_all_potentials():
    global _all_potentials

    def get_subclasses(cls):
        classes = []
        for subclass in cls.__subclasses__():
            classes.append(subclass)
            classes.extend(get_subclasses(subclass))

        return classes

    if _all_potentials is None:
        _all_potentials = {
            cls.distribution_name: cls() for cls in get_subclasses(PotentialProvider)
        }

    return _all_potentials


def _positive(field, value, error):
    if value <= 0:
        error(field, "must be positive")


class PointMass(object):
    def __init__(self, location):
        self.location = location

    def rvs(self, size, random_state=None):
        return np.full(size, float(self.location))

    def cdf(self, x):
        return np.where(np.asarray(x) >= self.location, 1.0, 0.0)

    def ppf(self, q):
        return np.full(np.shape(q), float(self.location))

    def pdf(self, x):
        raise ConfigurationError(
            "A point mass at {} has no density.".format(self.location)
        )


class MixtureDistribution(object):
    def __init__(self, weights, components):
        self.weights = np.asarray(weights, dtype=float)
        self.components = components

    def rvs(self, size, random_state=None):
        choice = random_state.choice(len(self.components), size=size, p=self.weights)
        samples = np.empty(size)
        for i, component in enumerate(self.components):
            mask = choice == i
            samples[mask] = component.rvs(size=int(mask.sum()), random_state=random_state)

        return samples

    def pdf(self, x):
        return sum(w * d.pdf(x) for w, d in zip(self.weights, self.components))

    def cdf(self, x):
        return sum(w * d.cdf(x) for w, d in zip(self.weights, self.components))

    def ppf(self, q):
        lo = min(float(np.min(d.ppf(1e-12))) for d in self.components)
        hi = max(float(np.max(d.ppf(1 - 1e-12))) for d in self.components)

        def invert(p):
            return scipy.optimize.brentq(lambda x: self.cdf(x) - p, lo, hi)

        return np.vectorize(invert)(q)


class PotentialProvider(metaclass=ABCMeta):
    distribution_name = ""

    def get_distribution(self, options: Dict):
        validator = cerberus.Validator(self.get_options_schema())
        options = validator.validated(options or {})
        if options is None:
            errors = "; ".join(
                "{}: {}".format(k, ", ".join(str(m) for m in v))
                for k, v in sorted(validator.errors.items())
            )
            raise ConfigurationError(
                "Invalid options for distribution {}: {}".format(
                    self.distribution_name, errors
                )
            )

        return self._get_distribution(options), options

    @abstractmethod
    def _get_distribution(self, options: Dict):
        pass

    def get_options_schema(self):
        return {}


class GaussianPotentialProvider(PotentialProvider):
    distribution_name = "gaussian"

    def _get_distribution(self, options: Dict):
        if options["sigma"] == 0:
            return PointMass(options["mean"])

        return scipy.stats.norm(loc=options["mean"], scale=options["sigma"])

    def get_options_schema(self):
        return {
            "sigma": {"type": "number", "min": 0, "default": 1.0},
            "mean": {"type": "number", "default": 0.0},
        }


class CauchyPotentialProvider(PotentialProvider):
    distribution_name = "cauchy"

    def _get_distribution(self, options: Dict):
        return scipy.stats.cauchy(loc=options["median"], scale=options["scale"])

    def get_options_schema(self):
        return {
            "median": {"type": "number", "default": 0.0},
            "scale": {"type": "number", "default": 1.0, "check_with": _positive},
        }


class UniformPotentialProvider(PotentialProvider):
    distribution_name = "uniform"

    def _get_distribution(self, options: Dict):
        if options["b"] <= options["a"]:
            raise ConfigurationError(
                "The uniform distribution needs a < b, got a={} b={}".format(
                    options["a"], options["b"]
                )
            )

        return scipy.stats.uniform(loc=options["a"], scale=options["b"] - options["a"])

    def get_options_schema(self):
        return {
            "a": {"type": "number", "default": -1.0},
            "b": {"type": "number", "default": 1.0},
        }


def _validate_weights(field, value, error):
    total = sum(component["weight"] for component in value)
    if abs(total - 1) > 1e-9:
        error(field, "component weights sum to {}, not 1".format(total))


class MixturePotentialProvider(PotentialProvider):
    distribution_name = "mixture"

    def _get_distribution(self, options: Dict):
        components = [
            PotentialSpec(c["name"], c["options"]) for c in options["components"]
        ]

        return MixtureDistribution(
            [c["weight"] for c in options["components"]],
            [c.distribution for c in components],
        )

    def get_options_schema(self):
        return {
            "components": {
                "type": "list",
                "required": True,
                "minlength": 1,
                "check_with": _validate_weights,
                "schema": {
                    "type": "dict",
                    "schema": {
                        "weight": {"type": "number", "min": 0, "required": True},
                        "name": {"type": "string", "required": True},
                        "options": {"type": "dict", "default": {}},
                    },
                },
            }
        }


class PotentialSpec(object):
    """A single-site potential distribution ρ.

    ``kind`` names a registered provider; ``options`` are validated against
    that provider's options schema, and any violation raises
    ``ConfigurationError``.
    """

    def __init__(self, kind="gaussian", options=None):
        providers = get_all_potentials()
        if kind not in providers:
            raise ConfigurationError(
                "The distribution {} does not exist. Available: {}".format(
                    kind, ", ".join(sorted(providers))
                )
            )

        self.kind = kind
        self.distribution, self.options = providers[kind].get_distribution(options)

    @classmethod
    def parse(cls, text):
        """Parse ``name:key=value,key=value`` as given on the command line."""
        name, _, params = text.partition(":")
        options = {}
        for item in filter(None, params.split(",")):
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigurationError(
                    "Malformed distribution parameter {!r} in {!r}".format(item, text)
                )
            try:
                options[key.strip()] = float(value)
            except ValueError:
                raise ConfigurationError(
                    "Distribution parameter {} must be a number, got {!r}".format(
                        key, value
                    )
                )

        return cls(name.strip(), options)

    @property
    def degenerate(self):
        return isinstance(self.distribution, PointMass)

    def sample(self, count, rng):
        if count < 0:
            raise ConfigurationError("Cannot draw {} samples.".format(count))

        return np.asarray(
            self.distribution.rvs(size=count, random_state=rng), dtype=float
        )

    def pdf(self, x):
        return self.distribution.pdf(x)

    def cdf(self, x):
        return self.distribution.cdf(x)

    def quantile(self, q):
        return self.distribution.ppf(q)

    def to_dict(self):
        return {"name": self.kind, "options": dict(self.options)}

    def __eq__(self, other):
        return isinstance(other, PotentialSpec) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return "PotentialSpec({!r}, {!r})".format(self.kind, self.options)
