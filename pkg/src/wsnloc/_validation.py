"""Input validation helpers used by the functional core and the estimators."""

import numbers

import numpy as np

from .exceptions import ContractError, InvalidConfigError

SUM_TOL = 1e-9


def check_rng(random_state=None):
    """Turn ``None``, an int seed, a SeedSequence or a Generator into a Generator.

    Every random stream in the package is a ``numpy.random.Generator`` backed by
    PCG64, so seeds give the same draws on every platform numpy supports.
    """
    if isinstance(random_state, np.random.Generator):
        return random_state
    if isinstance(random_state, np.random.RandomState):
        raise TypeError("legacy RandomState is not supported; pass a seed or a Generator")
    return np.random.Generator(np.random.PCG64(random_state))


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise InvalidConfigError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_nonnegative(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value < 0:
        raise InvalidConfigError(f"{name} must be non-negative and finite, got {value!r}")
    return float(value)


def check_count(value, name, minimum=0):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise InvalidConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_probability(value, name):
    if not isinstance(value, numbers.Real) or not 0.0 <= value <= 1.0:
        raise InvalidConfigError(f"{name} must lie in [0, 1], got {value!r}")
    return float(value)


def check_points(points, name="points", dim=None):
    """Return ``points`` as a finite float array of shape (n, 3).

    Two-column input is padded with z = 0.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise ContractError(f"{name} must have shape (n, 2) or (n, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains non-finite coordinates")
    if arr.shape[1] == 2:
        arr = np.column_stack([arr, np.zeros(len(arr))])
    return arr


def check_distribution(p, name="distribution"):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ContractError(f"{name} must be a nonempty vector")
    if np.any(p < 0) or abs(p.sum() - 1.0) > SUM_TOL:
        raise ContractError(f"{name} must be non-negative and sum to 1 (sum={p.sum()!r})")
    return p


def check_stochastic(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ContractError(f"{name} must be a 2D matrix")
    if np.any(A < 0) or not np.allclose(A.sum(axis=1), 1.0, rtol=0, atol=SUM_TOL):
        raise ContractError(f"{name} must be row-stochastic")
    return A
