"""Independent reference implementations used only by the tests.

Nothing here calls into pacheck. Interval limits come from direct binomial
tail sums in mpmath plus bisection; Fisher p-values from exact rational
enumeration; Mann-Whitney from enumerating every relabelling.
"""

import itertools
import math
from fractions import Fraction

import mpmath as mp

mp.mp.dps = 60


def binom_cdf(n, x, p):
    """P(X <= x) for X ~ Binomial(n, p), summed term by term."""
    if x < 0:
        return mp.mpf(0)
    p = mp.mpf(p)
    q = 1 - p
    term = q**n
    total = term
    for k in range(x):
        term = term * (n - k) / (k + 1) * p / q
        total += term
    return total


def binom_sf(n, x, p):
    """P(X >= x)."""
    return 1 - binom_cdf(n, x - 1, p)


def _bisect(f, lo, hi, iters=200):
    lo, hi = mp.mpf(lo), mp.mpf(hi)
    flo = f(lo)
    for _ in range(iters):
        mid = (lo + hi) / 2
        if (f(mid) > 0) == (flo > 0):
            lo, flo = mid, f(mid)
        else:
            hi = mid
    return (lo + hi) / 2


def cp_limits(n, x, delta, hi=1):
    """Exact equal-tailed limits by inverting the binomial tails."""
    half = mp.mpf(delta) / 2
    lower = mp.mpf(0) if x == 0 else _bisect(lambda p: binom_sf(n, x, p) - half, 0, hi)
    upper = mp.mpf(1) if x == n else _bisect(lambda p: binom_cdf(n, x, p) - half, 0, hi)
    return lower, upper


def ro3_sample_size(epsilon, delta):
    return int(mp.ceil(mp.log(mp.mpf(delta)) / mp.log(1 - mp.mpf(epsilon))))


def hoeffding_sample_size(epsilon, delta):
    e, d = mp.mpf(epsilon), mp.mpf(delta)
    return int(mp.ceil(mp.log(2 / d) / (2 * e**2)))


def fisher_one_sided(n_bug, x_bug, n_fix, x_fix):
    """Exact rational upper-tail hypergeometric probability."""
    total, events = n_bug + n_fix, x_bug + x_fix
    denom = math.comb(total, n_bug)
    num = sum(
        math.comb(events, k) * math.comb(total - events, n_bug - k)
        for k in range(x_bug, min(events, n_bug) + 1)
    )
    return Fraction(num, denom)


def mann_whitney_u(a, b):
    return sum(1.0 if u > v else 0.5 if u == v else 0.0 for u in a for v in b)


def mann_whitney_permutation_p(a, b):
    """Two-sided exact permutation p-value over all relabellings of the pooled sample."""
    pooled = list(a) + list(b)
    na, nb = len(a), len(b)
    centre = na * nb / 2
    observed = abs(mann_whitney_u(a, b) - centre)
    hits = total = 0
    for chosen in itertools.combinations(range(na + nb), na):
        s = set(chosen)
        aa = [pooled[i] for i in chosen]
        bb = [pooled[i] for i in range(na + nb) if i not in s]
        total += 1
        hits += abs(mann_whitney_u(aa, bb) - centre) >= observed - 1e-9
    return hits / total
