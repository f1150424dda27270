"""Two-parameter generalized Pareto law for excesses over a threshold.

``sf(y) = (1 + shape * y / scale) ** (-1 / shape)`` on its support, with the
exponential law as the ``shape == 0`` limit. Kept separate from :mod:`evt` so
that :mod:`distributions` can splice GPD tails without an import cycle.
"""

import numpy as np

_ZERO_SHAPE = 1e-12


def gpd_sf(y, shape, scale):
    y = np.maximum(np.asarray(y, dtype=float), 0.0)
    if abs(shape) < _ZERO_SHAPE:
        return np.exp(-y / scale)
    z = 1.0 + shape * y / scale
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(z > 0, np.power(np.where(z > 0, z, 1.0), -1.0 / shape), 0.0)
    return out


def gpd_logpdf(y, shape, scale):
    y = np.asarray(y, dtype=float)
    if abs(shape) < _ZERO_SHAPE:
        return np.where(y >= 0, -np.log(scale) - y / scale, -np.inf)
    z = 1.0 + shape * y / scale
    with np.errstate(divide="ignore", invalid="ignore"):
        val = -np.log(scale) - (1.0 + 1.0 / shape) * np.log(z)
    return np.where((y >= 0) & (z > 0), val, -np.inf)


def gpd_isf(p, shape, scale):
    """Inverse survival function: the excess ``y`` with ``gpd_sf(y) == p``."""
    p = np.asarray(p, dtype=float)
    if abs(shape) < _ZERO_SHAPE:
        return -scale * np.log(p)
    return scale * np.expm1(-shape * np.log(p)) / shape


def gpd_mean(shape, scale):
    return scale / (1.0 - shape) if shape < 1 else np.inf


def gpd_upper_endpoint(shape, scale):
    return -scale / shape if shape < -_ZERO_SHAPE else np.inf
