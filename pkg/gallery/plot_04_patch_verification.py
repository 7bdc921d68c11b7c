"""
Did the patch fix it?
=====================

The buggy build failed 1000 times in a million runs. The exact lower
confidence limit on its failure rate fixes how many clean runs of the patched
build are enough to reject "nothing changed".
"""

from pacheck import Tally, bernoulli_source, patch_verify
from pacheck.experiments import fisher_fix_trials, mann_whitney_fix_trials

bug = Tally(10**6, 1000)
for delta in (0.05, 0.01, 0.001):
    verdict = patch_verify(bernoulli_source(1.0, "no-crash"), None, delta, bug)
    print(f"delta={delta:<6} clean runs needed={verdict.n_fix_required:6d}  "
          f"Fisher={fisher_fix_trials(bug.n, bug.x, delta):6d}  "
          f"Mann-Whitney={mann_whitney_fix_trials(bug.n, bug.x, delta):6d}  -> {verdict.outcome.value}")

###############################################################################
# A patch that only halves the failure rate is caught quickly.
half_fixed = bernoulli_source(1 - 0.0005, "no-crash")
print(patch_verify(half_fixed, None, 0.01, bug, seed=1).statement)
