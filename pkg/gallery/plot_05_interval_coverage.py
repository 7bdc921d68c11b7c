"""
Which interval can be trusted for rare events?
==============================================

Draw many binomial samples for a known rate and count how often each 95%
interval contains it. The normal-approximation interval collapses to a point
when no event is seen, which is the common case for small rates.
"""

from pacheck.binomial_stats import IntervalMethod
from pacheck.experiments import default_mu_grid, exact_coverage, rows_to_csv, rq1_coverage

rows = rq1_coverage(default_mu_grid(11), n=10_000, reps=2000, delta=0.05, seed=0)
print(rows_to_csv(rows))

###############################################################################
# Sampling noise aside, the same numbers follow from summing the pmf.
for mu in (1e-4, 1e-2, 0.5):
    exact = {m.value: round(exact_coverage(10_000, mu, 0.05, m), 4)
             for m in (IntervalMethod.CLOPPER_PEARSON, IntervalMethod.WALD, IntervalMethod.WILSON)}
    print(mu, exact)
