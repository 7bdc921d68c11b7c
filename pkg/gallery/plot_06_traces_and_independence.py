"""
Working from recorded outcomes
==============================

Outcomes collected elsewhere (CI logs, production telemetry) can be analysed
offline from a newline-delimited JSON trace. The turning point test gives a
rough check that runs look independent, but its null distribution assumes no
ties, and raw binary outcomes are mostly ties.
"""

import tempfile
from pathlib import Path

import numpy as np

from pacheck import TrialEngine, bernoulli_source, quantify_theory, trace_source, turning_point_test
from pacheck.subjects import record_trace

path = Path(tempfile.mkdtemp()) / "outcomes.ndjson"
record_trace(bernoulli_source(0.8, "ok"), 20_000, base_seed=5, path=path)
print(path.read_text().splitlines()[:3])

trace = trace_source(path)
report = quantify_theory(trace, "ok", (0.01, 0.05))
print(report.guarantee)

###############################################################################
# On the raw bits most neighbours tie, so independent data looks wildly
# non-random. The tie fraction is the warning sign.
bits = TrialEngine(trace, retain_bits=True).run(len(trace)).outcome_bits("ok")
raw = turning_point_test(bits.astype(int))
print(f"raw bits:      ties={raw.tie_fraction:.2f}  z={raw.z_statistic:8.2f}  p={raw.two_sided_p:.3g}")

# Proportions over blocks of 500 runs rarely tie and behave as the test expects.
blocks = bits.reshape(-1, 500).mean(axis=1)
block = turning_point_test(blocks)
print(f"block of 500:  ties={block.tie_fraction:.2f}  z={block.z_statistic:8.2f}  p={block.two_sided_p:.3g}")

# Runs whose success rate drifts from 0.5 to 0.95 are not identically
# distributed; the blocks trend upward and lose turning points.
drift = np.random.default_rng(1).random(20_000) < np.linspace(0.5, 0.95, 20_000)
print(turning_point_test(drift.reshape(-1, 500).mean(axis=1)))
