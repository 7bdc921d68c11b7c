"""
How many runs do I need?
========================

Three planners answer this for a binary property. The rule-of-three count
assumes no run will fail; the Hoeffding count works for any outcome; the
predictor sits in between once a rough guess of the rate is available.
"""

from pacheck import hoeffding_sample_size, kp_sample_size, ro3_sample_size
from pacheck.experiments import fig1_table

epsilon, delta = 1e-3, 0.01

# lower and upper ends of the range an adaptive estimator can land in
print("rule of three :", ro3_sample_size(epsilon, delta))
print("hoeffding     :", hoeffding_sample_size(epsilon, delta))

# the predictor grows with p0 * (1 - p0), so rare events are cheap
for p0 in (0.5, 0.1, 0.01, 1e-4):
    print(f"predicted for p0={p0:<6}:", kp_sample_size(p0, epsilon, delta))

###############################################################################
# Turned around: one day of traffic at a large service buys this accuracy.
for row in fig1_table(delta):
    print(f"{row.name:<10} n={row.n:9.3g}  any outcome: {row.hoeffding_accuracy:.1e}"
          f"  no failures seen: {row.ro3_accuracy:.1e}")
