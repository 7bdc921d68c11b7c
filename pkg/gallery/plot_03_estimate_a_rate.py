"""
Estimating how often a property holds
=====================================

Both estimators give the same guarantee. ``quantify_theory`` recomputes the
exact interval after every trial; ``quantify_practice`` predicts how many more
trials it needs and checks the interval only once per prediction.
"""

import numpy as np

from pacheck import bernoulli_source, quantify_practice, quantify_theory

params = (0.01, 0.05)
for mu in (0.5, 0.1, 0.01):
    source = bernoulli_source(mu)
    for run in (quantify_theory, quantify_practice):
        reports = [run(source, None, params, seed) for seed in range(20)]
        used = np.mean([r.trials_used for r in reports])
        checks = np.mean([r.cp_evaluations for r in reports])
        print(f"mu={mu:<5} {run.__name__:<18} trials={used:8.1f}  interval checks={checks:8.1f}")

###############################################################################
# A report is plain data and serializes to stable JSON.
print(quantify_practice(bernoulli_source(0.1), None, params, seed=0).to_json(indent=2))
