"""Special functions backing the interval constructions.

Thin validated wrappers around :mod:`scipy.special`. All functions accept
scalars or arrays and broadcast like numpy ufuncs; scalar input returns a
Python float.
"""

import numpy as np
from scipy import special as sc

from .errors import ParameterError


def _out(values):
    values = np.asarray(values, dtype=float)
    return float(values) if values.ndim == 0 else values


def _check_shapes(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise ParameterError("beta shape parameters must be strictly positive")
    return a, b


def _check_unit(name, values, open_interval):
    values = np.asarray(values, dtype=float)
    if open_interval:
        bad = ~((values > 0) & (values < 1))
    else:
        bad = ~((values >= 0) & (values <= 1))
    if np.any(bad):
        bounds = "(0, 1)" if open_interval else "[0, 1]"
        raise ParameterError(f"{name} must lie in {bounds}")
    return values


def regularized_incomplete_beta(a, b, x):
    """Regularized incomplete beta function ``I_x(a, b)``."""
    a, b = _check_shapes(a, b)
    x = _check_unit("x", x, open_interval=False)
    return _out(sc.betainc(a, b, x))


def regularized_incomplete_beta_upper(a, b, x):
    """Complement ``1 - I_x(a, b)`` computed without cancellation."""
    a, b = _check_shapes(a, b)
    x = _check_unit("x", x, open_interval=False)
    return _out(sc.betaincc(a, b, x))


def beta_quantile(a, b, q):
    """Return ``x`` such that ``I_x(a, b) = q``."""
    a, b = _check_shapes(a, b)
    q = _check_unit("q", q, open_interval=True)
    return _out(sc.betaincinv(a, b, q))


def beta_quantile_upper(a, b, q):
    """Return ``x`` such that ``1 - I_x(a, b) = q``.

    Use this instead of ``beta_quantile(a, b, 1 - q)`` when ``q`` is small:
    forming ``1 - q`` first throws away the digits that matter.
    """
    a, b = _check_shapes(a, b)
    q = _check_unit("q", q, open_interval=True)
    return _out(sc.betainccinv(a, b, q))


def normal_quantile(q):
    """Standard normal quantile, the inverse of the normal CDF."""
    q = _check_unit("q", q, open_interval=True)
    return _out(sc.ndtri(q))


def log_choose(n, k):
    """Natural log of the binomial coefficient ``C(n, k)``.

    Evaluated through ``log Beta`` so that huge ``n`` with small ``k`` keeps
    full relative precision (a difference of three ``lgamma`` terms would not).
    """
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    if np.any(~(k >= 0)) or np.any(~(k <= n)):
        raise ParameterError("log_choose requires 0 <= k <= n")
    return _out(-np.log1p(n) - sc.betaln(n - k + 1.0, k + 1.0))
