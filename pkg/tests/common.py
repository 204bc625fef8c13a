"""Shared parameter sets and helpers for the test suite."""

import numpy as np

from sirblab import ModelParams

# Baseline epidemic regime: host growth beats its death rate (b0 > d1),
# free-living bacteria persist (g0 > d4), and transmission is strong
# enough that an endemic equilibrium exists.
REF = dict(b0=2.0, k1=10.0, beta1=0.3, beta2=0.5, k2=1.0, g0=3.0, k3=6.0,
           d1=1.0, d2=0.5, d3=0.5, d4=1.0, sigma=0.5, gamma=0.5, xi=0.5)

# Fully damped regime: every growth rate sits below its death rate,
# so all species decay to extinction.
DAMPED = dict(b0=0.8, k1=10.0, beta1=0.3, beta2=0.5, k2=1.0, g0=0.5, k3=6.0,
              d1=1.2, d2=0.5, d3=0.5, d4=1.0, sigma=0.3, gamma=0.5, xi=0.5)


def make_params(**overrides) -> ModelParams:
    return ModelParams(**{**REF, **overrides})


def make_damped(**overrides) -> ModelParams:
    return ModelParams(**{**DAMPED, **overrides})


def random_admissible_params(rng: np.random.Generator) -> ModelParams:
    """Draw a parameter set on which the endemic root-finder is exercised.

    The box keeps b0 > d1 (so the existence threshold is meaningful) and
    stays away from the degenerate corner where the lower host branch
    rises more steeply than the infection curve near I = 0, which is
    where bracketing genuinely has nothing to bracket.
    """
    u = rng.uniform
    b0 = u(1.5, 3.0)
    g0 = u(1.5, 4.0)
    return ModelParams(
        b0=b0, k1=u(2.0, 12.0), beta1=u(0.3, 0.9), beta2=u(0.4, 0.7),
        k2=u(0.5, 2.0), g0=g0, k3=u(2.0, 8.0), d1=u(0.35, 0.55) * b0,
        d2=u(0.3, 0.8), d3=u(0.3, 0.8), d4=u(0.3, 0.8) * g0,
        sigma=u(0.3, 0.8), gamma=u(0.3, 0.8), xi=u(0.3, 1.0),
    )
