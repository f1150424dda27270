"""Input validation helpers shared by the public entry points."""

import math
import os

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import EmptyDataError, ParameterDomainError


def check_sample(x, *, name="data", min_size=1, positive=False):
    """Coerce ``x`` to a finite 1-D float64 array.

    A 2-D array with a single column is accepted and flattened so that the
    estimators can be fed scikit-learn style ``X`` matrices.
    """
    if x is None or (hasattr(x, "__len__") and len(x) == 0):
        raise EmptyDataError(f"{name} is empty")
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    arr = check_array(arr, ensure_2d=False, dtype=np.float64, input_name=name)
    if arr.ndim != 1:
        raise ParameterDomainError(f"{name} must be one-dimensional")
    if arr.size < min_size:
        raise EmptyDataError(f"{name} needs at least {min_size} values, got {arr.size}")
    if positive and np.any(arr <= 0):
        raise ParameterDomainError(f"{name} must be strictly positive")
    return arr


def check_positive(value, name):
    if not (value > 0) or not math.isfinite(value):
        raise ParameterDomainError(f"{name} must be positive and finite, got {value!r}")
    return float(value)


def check_count(value, name, minimum=1):
    if int(value) != value or value < minimum:
        raise ParameterDomainError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_probability(value, name, *, open_interval=True):
    ok = 0 < value < 1 if open_interval else 0 <= value <= 1
    if not ok:
        raise ParameterDomainError(f"{name} must lie in (0, 1), got {value!r}")
    return float(value)


def worker_count(workers=None):
    """Resolve the worker count from the argument or ``RARETAIL_WORKERS``."""
    if workers is None:
        workers = os.environ.get("RARETAIL_WORKERS", "1")
    try:
        workers = int(workers)
    except (TypeError, ValueError):
        raise ParameterDomainError(f"invalid worker count {workers!r}") from None
    return max(workers, 1)
