"""Estimators, error bounds, sample-size planners and confidence intervals
for a binomial proportion.

Everything here is a pure function of its arguments. Counts are Python ints
(unbounded), probabilities are floats. The vectorized ``*_limits`` helpers
take numpy arrays and are what the simulation code calls in tight loops;
the scalar functions wrap them and return typed results.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special as sc

from .errors import CountOverflowError, ParameterError, UndefinedEstimateError

#: Largest trial count the toolkit will plan for or accumulate (signed 64-bit).
MAX_COUNT = 2**63 - 1


def _as_count(name, value):
    if isinstance(value, bool):
        raise ParameterError(f"{name} must be an integer count, got a bool")
    if isinstance(value, numbers.Integral):
        value = int(value)
    elif isinstance(value, numbers.Real) and float(value).is_integer():
        value = int(value)
    else:
        raise ParameterError(f"{name} must be an integer count, got {value!r}")
    if value < 0:
        raise ParameterError(f"{name} must be non-negative, got {value}")
    return value


def _check_open_unit(name, value):
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ParameterError(f"{name} must lie strictly inside (0, 1), got {value!r}")
    return value


@dataclass(frozen=True)
class Tally:
    """Trial count ``n`` and the number ``x`` of trials where the property held."""

    n: int = 0
    x: int = 0

    def __post_init__(self):
        n = _as_count("n", self.n)
        x = _as_count("x", self.x)
        if x > n:
            raise ParameterError(f"success count x={x} exceeds trial count n={n}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "x", x)

    @property
    def failures(self) -> int:
        return self.n - self.x

    def __add__(self, other):
        if not isinstance(other, Tally):
            return NotImplemented
        return merge_tallies(self, other)


@dataclass(frozen=True)
class ApproximationParams:
    """Accuracy ``epsilon`` and confidence complement ``delta``, both in (0, 1)."""

    epsilon: float
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "epsilon", _check_open_unit("epsilon", self.epsilon))
        object.__setattr__(self, "delta", _check_open_unit("delta", self.delta))

    @property
    def confidence(self) -> float:
        return 1.0 - self.delta


class IntervalMethod(str, Enum):
    CLOPPER_PEARSON = "ClopperPearson"
    WALD = "Wald"
    WILSON = "Wilson"
    RULE_OF_THREE = "RuleOfThree"


class EstimateKind(str, Enum):
    MLE = "MLE"
    LAPLACE = "Laplace"


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float
    method: IntervalMethod

    def __post_init__(self):
        if not 0.0 <= self.lower <= self.upper <= 1.0:
            raise ParameterError(
                f"invalid interval [{self.lower!r}, {self.upper!r}]"
            )

    @property
    def radius(self) -> float:
        return (self.upper - self.lower) / 2.0

    @property
    def center(self) -> float:
        return (self.upper + self.lower) / 2.0

    def contains(self, mu: float) -> bool:
        return self.lower <= mu <= self.upper

    def to_dict(self):
        return {
            "lower": self.lower,
            "upper": self.upper,
            "level": self.level,
            "method": self.method.value,
        }


@dataclass(frozen=True)
class Estimate:
    value: float
    kind: EstimateKind

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ParameterError(f"estimate {self.value!r} is not a probability")

    def to_dict(self):
        return {"value": self.value, "kind": self.kind.value}


# -- estimators ---------------------------------------------------------------


def mle_estimate(t: Tally) -> Estimate:
    """Maximum-likelihood (and unbiased) estimate ``x / n``."""
    if t.n == 0:
        raise UndefinedEstimateError("no trials: the proportion estimate is undefined")
    return Estimate(t.x / t.n, EstimateKind.MLE)


def laplace_estimate(n: int) -> Estimate:
    """Rule-of-succession estimate ``(n + 1) / (n + 2)`` after ``n`` clean trials."""
    n = _as_count("n", n)
    return Estimate((n + 1) / (n + 2), EstimateKind.LAPLACE)


def merge_tallies(a: Tally, b: Tally) -> Tally:
    n = a.n + b.n
    if n > MAX_COUNT:
        raise CountOverflowError(f"merged trial count {n} exceeds {MAX_COUNT}")
    return Tally(n, a.x + b.x)


# -- zero-failure (rule of three) bounds ---------------------------------------


def _ceil_count(value: float) -> int:
    if not math.isfinite(value) or value > MAX_COUNT:
        raise CountOverflowError(f"required trial count {value!r} exceeds {MAX_COUNT}")
    return max(1, math.ceil(value))


def ro3_sample_size(epsilon: float, delta: float) -> int:
    """Trials without a violation needed to bound the violation rate by
    ``epsilon`` at confidence ``1 - delta``: ``ceil(log(delta) / log(1 - epsilon))``.
    """
    epsilon = _check_open_unit("epsilon", epsilon)
    delta = _check_open_unit("delta", delta)
    return _ceil_count(math.log(delta) / math.log1p(-epsilon))


def ro3_accuracy(n: int, delta: float) -> float:
    """Residual-risk bound ``1 - delta**(1/n)`` after ``n`` clean trials."""
    n = _as_count("n", n)
    delta = _check_open_unit("delta", delta)
    if n == 0:
        raise ParameterError("ro3_accuracy needs at least one trial")
    return -math.expm1(math.log(delta) / n)


def ro3_violation_bound(n: int, epsilon: float) -> float:
    """``(1 - epsilon)**n``: chance that ``n`` clean trials hide a rate >= epsilon."""
    n = _as_count("n", n)
    epsilon = _check_open_unit("epsilon", epsilon)
    return math.exp(n * math.log1p(-epsilon))


# -- Hoeffding bounds ----------------------------------------------------------


def hoeffding_violation_bound(n: int, epsilon: float) -> float:
    n = _as_count("n", n)
    epsilon = float(epsilon)
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon!r}")
    return min(1.0, 2.0 * math.exp(-2.0 * n * epsilon * epsilon))


def hoeffding_sample_size(epsilon: float, delta: float) -> int:
    """``ceil(log(2/delta) / (2 epsilon**2))``, valid for every true proportion."""
    epsilon = _check_open_unit("epsilon", epsilon)
    delta = _check_open_unit("delta", delta)
    return _ceil_count(math.log(2.0 / delta) / (2.0 * epsilon * epsilon))


def hoeffding_accuracy(n: int, delta: float) -> float:
    n = _as_count("n", n)
    delta = _check_open_unit("delta", delta)
    if n == 0:
        raise ParameterError("hoeffding_accuracy needs at least one trial")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * n))


# -- confidence intervals ------------------------------------------------------


def _check_tally_arrays(n, x, delta):
    n = np.asarray(n, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(n < 1):
        raise UndefinedEstimateError("interval undefined for n = 0")
    if np.any(x < 0) or np.any(x > n):
        raise ParameterError("need 0 <= x <= n")
    return n, x, _check_open_unit("delta", delta)


def clopper_pearson_limits(n, x, delta):
    """Vectorized Clopper-Pearson limits ``(lower, upper)`` at level ``1 - delta``.

    Each limit puts binomial tail mass ``delta / 2`` beyond the observation.
    The lower limit is the ``delta/2`` quantile of ``Beta(x, n - x + 1)``, the
    upper limit the ``1 - delta/2`` quantile of ``Beta(x + 1, n - x)``; the
    boundary cases ``x = 0`` and ``x = n`` use their closed forms.
    """
    n, x, delta = _check_tally_arrays(n, x, delta)
    half = delta / 2.0
    log_root = np.log(half) / n  # log of (delta/2)**(1/n)
    interior_lo = x > 0
    interior_hi = x < n
    a_lo = np.where(interior_lo, x, 1.0)
    b_lo = n - x + 1.0
    a_hi = x + 1.0
    b_hi = np.where(interior_hi, n - x, 1.0)
    with np.errstate(all="ignore"):
        lower = np.where(interior_lo, sc.betaincinv(a_lo, b_lo, half), 0.0)
        upper = np.where(interior_hi, sc.betainccinv(a_hi, b_hi, half), 1.0)
    lower = np.where(interior_lo & ~interior_hi, np.exp(log_root), lower)
    upper = np.where(interior_hi & ~interior_lo, -np.expm1(log_root), upper)
    return lower, upper


def clopper_pearson_radius(n, x, delta):
    lower, upper = clopper_pearson_limits(n, x, delta)
    return (upper - lower) / 2.0


def _z(delta):
    # upper delta/2 quantile, taken from the lower tail to avoid 1 - delta/2
    return -float(sc.ndtri(delta / 2.0))


def wald_limits(n, x, delta):
    n, x, delta = _check_tally_arrays(n, x, delta)
    z = _z(delta)
    p = x / n
    half = z * np.sqrt(p * (1.0 - p) / n)
    return np.clip(p - half, 0.0, 1.0), np.clip(p + half, 0.0, 1.0)


def wilson_limits(n, x, delta):
    n, x, delta = _check_tally_arrays(n, x, delta)
    z = _z(delta)
    z2 = z * z
    p = x / n
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = z * np.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom
    return np.clip(center - half, 0.0, 1.0), np.clip(center + half, 0.0, 1.0)


def _interval(limits, method, t, delta):
    if t.n == 0:
        raise UndefinedEstimateError("interval undefined for n = 0")
    lower, upper = limits(t.n, t.x, delta)
    return ConfidenceInterval(float(lower), float(upper), 1.0 - delta, method)


def clopper_pearson(t: Tally, delta: float) -> ConfidenceInterval:
    """Exact equal-tailed interval; coverage is at least ``1 - delta`` for every mu."""
    return _interval(clopper_pearson_limits, IntervalMethod.CLOPPER_PEARSON, t, delta)


def wald_interval(t: Tally, delta: float) -> ConfidenceInterval:
    """Normal-approximation interval around ``x/n`` using the plug-in variance."""
    return _interval(wald_limits, IntervalMethod.WALD, t, delta)


def wilson_interval(t: Tally, delta: float) -> ConfidenceInterval:
    return _interval(wilson_limits, IntervalMethod.WILSON, t, delta)


def interval_radius(ci: ConfidenceInterval) -> float:
    return ci.radius


# -- planners ------------------------------------------------------------------


def kp_sample_size(p0: float, epsilon: float, delta: float) -> int:
    """Predicted trials for a Clopper-Pearson interval of radius ``epsilon``
    given an initial guess ``p0`` of the proportion (Krishnamoorthy & Peng).

    ``p0`` must be strictly inside (0, 1); callers holding an all-success or
    all-failure tally belong on the rule-of-three path instead.
    """
    p0 = _check_open_unit("p0", p0)
    epsilon = _check_open_unit("epsilon", epsilon)
    delta = _check_open_unit("delta", delta)
    z = _z(delta)
    pq = p0 * (1.0 - p0)
    z2 = z * z
    value = (z2 * pq + z * math.sqrt(z2 * pq * pq + 2.0 * epsilon * pq) + epsilon) / (
        2.0 * epsilon * epsilon
    )
    return _ceil_count(value)


def pac_error_bound(hypothesis_count: int, delta: float, n: int) -> float:
    """Generalization error bound ``log(|H| / delta) / n`` for a finite
    hypothesis class consistent with ``n`` samples."""
    h = _as_count("hypothesis_count", hypothesis_count)
    if h < 1:
        raise ParameterError("hypothesis_count must be at least 1")
    delta = _check_open_unit("delta", delta)
    n = _as_count("n", n)
    if n == 0:
        raise ParameterError("pac_error_bound needs at least one sample")
    return (math.log(h) - math.log(delta)) / n
