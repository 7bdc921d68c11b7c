"""
Verifying a real program
========================

Each trial runs a shell command on a fresh random input. The command below
crashes when the input is divisible by 16, so the property "exits with 0"
holds with probability 15/16 and verification should stop at the first crash.
"""

from pacheck import subprocess_source, verify
from pacheck.subjects import ExitCodeZero, LatencyBelow, uniform_bits

flaky = subprocess_source(
    "test $(( {input} % 16 )) -ne 0",
    [ExitCodeZero()],
    uniform_bits(32),
)
report = verify(flaky, None, (0.01, 0.05), seed=3, workers=8)
print(report.verdict.value, "after", report.trials_used, "runs")
print(report.guarantee)

###############################################################################
# A program that never fails and always answers quickly earns a residual-risk
# bound instead: at most 1% of runs violate either property, at 95% confidence.
steady = subprocess_source("true", [ExitCodeZero(), LatencyBelow(2000)])
report = verify(steady, None, (0.01, 0.05), seed=3, workers=8)
print(report.verdict.value, "after", report.trials_used, "runs")
print(report.guarantee)
