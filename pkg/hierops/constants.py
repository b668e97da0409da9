import math

EXIT_SUCCESS = 0
EXIT_CONFIGURATION_ERROR = 2
EXIT_NUMERICAL_FAILURE = 3

DIMENSIONLESS = "dimensionless"
ENERGY = "energy"

POISSON_GAP_RATIO = 2 * math.log(2) - 1
GOE_GAP_RATIO = 0.5307

OPTION_DEFAULTS = {
    "dense-cap": 13,
    "quantile-window": [0.375, 0.625],
    "max-failure-fraction": 0.01,
    "bootstrap-resamples": 1000,
    "bandwidths": [0.05, 0.1],
    "kernel-bandwidth": 0.05,
    "steps": 8,
    "interval": [-10.0, 10.0],
    "excision": 1e-6,
    "realizations": 1,
    "seed": 0,
    "window": 10.0,
    "workers": 1,
}
