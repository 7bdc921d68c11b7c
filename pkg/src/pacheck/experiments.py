"""Desk-scale simulation studies and the two baseline hypothesis tests.

Every study takes an integer ``seed``. Cell ``k`` of a study draws from
``numpy.random.default_rng([seed, k])``, so cells are independent of each
other and of evaluation order, and a rerun reproduces each CSV byte for byte.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, fields
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats
from scipy.special import erfc, logsumexp

from .analyses import PatchOutcome, patch_plan, patch_verify, quantify_practice, quantify_theory
from .binomial_stats import (
    ApproximationParams,
    IntervalMethod,
    Tally,
    clopper_pearson_limits,
    hoeffding_accuracy,
    hoeffding_sample_size,
    ro3_accuracy,
    ro3_sample_size,
    wald_limits,
    wilson_limits,
)
from .errors import ParameterError
from .special import log_choose
from .subjects import bernoulli_source

# -- baseline tests ------------------------------------------------------------


def fisher_exact_one_sided(bug: Tally, fix: Tally) -> float:
    """One-sided Fisher exact p-value that ``bug`` has the higher event rate.

    ``x`` of each tally counts the event under test (say, failures). Under the
    null of equal rates and fixed margins, the bug-side count is hypergeometric;
    the p-value is its upper tail at the observed count, summed in log space.
    """
    total = bug.n + fix.n
    events = bug.x + fix.x
    top = min(events, bug.n)
    if bug.x > top:
        return 0.0
    k = np.arange(bug.x, top + 1, dtype=float)
    log_terms = (
        log_choose(float(events), k)
        + log_choose(float(total - events), float(bug.n) - k)
        - log_choose(float(total), float(bug.n))
    )
    return float(min(1.0, math.exp(logsumexp(log_terms))))


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    z: float
    pvalue: float
    degenerate: bool = False


def mann_whitney_counts(a_ones: int, a_size: int, b_ones: int, b_size: int) -> MannWhitneyResult:
    """Mann-Whitney U for two binary samples given only their sizes and counts of ones.

    ``u`` counts pairs with the ``a`` value above the ``b`` value, ties scoring
    one half. The p-value is two-sided from the tie-corrected normal
    approximation without continuity correction. When every value is tied the
    variance vanishes; the result is then flagged degenerate with ``p = 1``.
    """
    if a_size < 1 or b_size < 1:
        raise ParameterError("both samples must be non-empty")
    if not (0 <= a_ones <= a_size and 0 <= b_ones <= b_size):
        raise ParameterError("count of ones must lie between 0 and the sample size")
    a0, b0 = a_size - a_ones, b_size - b_ones
    u = a_ones * b0 + 0.5 * (a_ones * b_ones + a0 * b0)
    total = a_size + b_size
    ties = sum(t**3 - t for t in (a_ones + b_ones, a0 + b0))
    variance = a_size * b_size / 12.0 * ((total + 1) - ties / (total * (total - 1)))
    if variance <= 0:
        return MannWhitneyResult(float(u), 0.0, 1.0, True)
    z = (u - a_size * b_size / 2.0) / math.sqrt(variance)
    return MannWhitneyResult(float(u), z, float(erfc(abs(z) / math.sqrt(2.0))))


def mann_whitney_u(sample_a, sample_b) -> MannWhitneyResult:
    a = np.asarray(sample_a, dtype=bool)
    b = np.asarray(sample_b, dtype=bool)
    return mann_whitney_counts(int(a.sum()), a.size, int(b.sum()), b.size)


# -- coverage ------------------------------------------------------------------

_LIMITS = {
    IntervalMethod.CLOPPER_PEARSON: clopper_pearson_limits,
    IntervalMethod.WALD: wald_limits,
    IntervalMethod.WILSON: wilson_limits,
}
COVERAGE_METHODS = tuple(_LIMITS)


def _contains(method, n, x, mu, delta):
    lower, upper = _LIMITS[IntervalMethod(method)](n, x, delta)
    return (lower <= mu) & (mu <= upper)


def exact_coverage(n: int, mu: float, delta: float, method=IntervalMethod.CLOPPER_PEARSON) -> float:
    """Probability that the interval from ``Binomial(n, mu)`` data contains ``mu``."""
    x = np.arange(n + 1)
    inside = _contains(method, np.full(n + 1, n), x, mu, delta)
    return float(stats.binom.pmf(x, n, mu)[inside].sum())


@dataclass(frozen=True)
class CoverageRow:
    mu: float
    n: int
    reps: int
    method: str
    observed_coverage: float


def default_mu_grid(points: int = 21, low_exp: float = -6.0, high_exp: float = -1.0) -> np.ndarray:
    return 10.0 ** np.linspace(low_exp, high_exp, points)


def rq1_coverage(
    mus: Optional[Sequence[float]] = None,
    n: int = 10_000,
    reps: int = 2000,
    delta: float = 0.05,
    seed: int = 0,
    methods: Sequence = COVERAGE_METHODS,
) -> list:
    """Observed coverage of each interval method over a grid of true proportions.

    Each repetition draws its success count directly from ``Binomial(n, mu)``;
    all methods see the same draws within a cell.
    """
    mus = default_mu_grid() if mus is None else mus
    rows = []
    for cell, mu in enumerate(mus):
        rng = np.random.default_rng([seed, cell])
        x = rng.binomial(n, mu, size=reps)
        trials = np.full(reps, n)
        for method in methods:
            method = IntervalMethod(method)
            covered = _contains(method, trials, x, mu, delta)
            rows.append(CoverageRow(float(mu), n, reps, method.value, float(covered.mean())))
    return rows


# -- efficiency ----------------------------------------------------------------


@dataclass(frozen=True)
class EfficiencyRow:
    mu: float
    epsilon: float
    delta: float
    algorithm: str
    mean_trials_used: float
    ro3_bound: int
    hoeffding_bound: int
    mean_cp_evaluations: float
    max_cp_evaluations: int


_ALGORITHMS = {"theory": quantify_theory, "practice": quantify_practice}


def _rep_seeds(seed, cell, reps):
    rng = np.random.default_rng([seed, cell])
    return [int(s) for s in rng.integers(0, 2**63, size=reps, dtype=np.int64)]


def rq2_replicates(mu, epsilon, delta, reps, seed, algorithm="theory", cell=0, **options):
    """Reports of ``reps`` seeded runs of one quantification algorithm on ``Bernoulli(mu)``."""
    run = _ALGORITHMS[algorithm]
    source = bernoulli_source(mu)
    params = ApproximationParams(epsilon, delta)
    return [run(source, None, params, s, **options) for s in _rep_seeds(seed, cell, reps)]


def rq2_efficiency(
    mus: Sequence[float],
    params_grid: Iterable,
    reps: int = 100,
    seed: int = 0,
    algorithms: Sequence[str] = ("theory", "practice"),
) -> list:
    """Mean trials used by each quantification algorithm, with both sample-size bounds."""
    rows = []
    cell = 0
    for epsilon, delta in params_grid:
        low, high = ro3_sample_size(epsilon, delta), hoeffding_sample_size(epsilon, delta)
        for mu in mus:
            for algorithm in algorithms:
                reports = rq2_replicates(mu, epsilon, delta, reps, seed, algorithm, cell)
                cell += 1
                used = np.array([r.trials_used for r in reports], dtype=float)
                cps = np.array([r.cp_evaluations for r in reports])
                rows.append(EfficiencyRow(
                    float(mu), float(epsilon), float(delta), algorithm,
                    float(used.mean()), low, high, float(cps.mean()), int(cps.max()),
                ))
    return rows


# -- residual risk -------------------------------------------------------------


@dataclass(frozen=True)
class ResidualRiskRow:
    epsilon: float
    delta: float
    trials: int


def rq4_residual_risk(epsilons: Sequence[float] = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6), delta: float = 0.05) -> list:
    """Clean trials needed to bound the residual risk by each ``epsilon``."""
    return [ResidualRiskRow(float(e), float(delta), ro3_sample_size(e, delta)) for e in epsilons]


# -- patch comparison ----------------------------------------------------------


def _smallest(predicate, start=1):
    """Smallest integer ``n >= start`` with ``predicate(n)``, for monotone predicates."""
    if predicate(start):
        return start
    low, high = start, start * 2
    while not predicate(high):
        low, high = high, high * 2
        if high > 2**62:
            raise ParameterError("no rejecting sample size below 2**62")
    while high - low > 1:
        mid = (low + high) // 2
        if predicate(mid):
            high = mid
        else:
            low = mid
    return high


def fisher_fix_trials(n_bug: int, x_bug: int, alpha: float) -> int:
    """Fewest clean fixed-program runs for which the one-sided Fisher test rejects at ``alpha``."""
    bug = Tally(n_bug, x_bug)
    return _smallest(lambda m: fisher_exact_one_sided(bug, Tally(m, 0)) <= alpha)


def mann_whitney_fix_trials(n_bug: int, x_bug: int, alpha: float) -> int:
    """Fewest clean fixed-program runs for which Mann-Whitney rejects at ``alpha``.

    The two samples are the buggy program's outcome vector (``x_bug`` ones) and
    the fixed program's all-zero outcome vector.
    """
    return _smallest(lambda m: mann_whitney_counts(x_bug, n_bug, 0, m).pvalue <= alpha)


@dataclass(frozen=True)
class PatchReplicate:
    x_bug: int
    p_lower: float
    n_fix_bound: int
    n_fix_fisher: int
    n_fix_mann_whitney: int

    @property
    def ordered(self) -> bool:
        return self.n_fix_bound <= self.n_fix_fisher <= self.n_fix_mann_whitney


@dataclass(frozen=True)
class PatchComparisonRow:
    mu_bug: float
    n_bug: int
    alpha: float
    reps: int
    mean_n_fix_bound: float
    mean_n_fix_fisher: float
    mean_n_fix_mann_whitney: float
    fisher_to_bound_ratio: float
    ordered_fraction: float


def rq5_replicates(mu_bug: float, n_bug: int, alpha: float, reps: int, seed: int, cell: int = 0) -> list:
    """Per repetition, the bug count drawn from ``Binomial(n_bug, mu_bug)`` and the
    fewest fixed-program runs each method needs to reject at ``alpha``."""
    rng = np.random.default_rng([seed, cell])
    out = []
    for x_bug in rng.binomial(n_bug, mu_bug, size=reps):
        x_bug = int(x_bug)
        if x_bug == 0:
            continue
        p_lower, n_bound = patch_plan(Tally(n_bug, x_bug), alpha)
        out.append(PatchReplicate(
            x_bug, p_lower, n_bound,
            fisher_fix_trials(n_bug, x_bug, alpha),
            mann_whitney_fix_trials(n_bug, x_bug, alpha),
        ))
    return out


def rq5_patch_comparison(
    mu_bugs: Sequence[float] = (1e-3,),
    n_bug: int = 10**6,
    alphas: Sequence[float] = (0.05, 0.01, 0.001),
    reps: int = 50,
    seed: int = 0,
) -> list:
    rows = []
    cell = 0
    for mu_bug in mu_bugs:
        for alpha in alphas:
            reps_out = rq5_replicates(mu_bug, n_bug, alpha, reps, seed, cell)
            cell += 1
            bound = np.array([r.n_fix_bound for r in reps_out], dtype=float)
            fisher = np.array([r.n_fix_fisher for r in reps_out], dtype=float)
            mw = np.array([r.n_fix_mann_whitney for r in reps_out], dtype=float)
            rows.append(PatchComparisonRow(
                float(mu_bug), n_bug, float(alpha), len(reps_out),
                float(bound.mean()), float(fisher.mean()), float(mw.mean()),
                float(fisher.mean() / bound.mean()),
                float(np.mean([r.ordered for r in reps_out])),
            ))
    return rows


def patch_soundness(bug_tally: Tally, delta: float, reps: int, seed: int = 0,
                    batch_size: int = 1024) -> float:
    """Fraction of repetitions in which a fix that did not help is accepted.

    The fixed program fails with probability exactly the buggy program's lower
    confidence limit, the hardest case the plan must withstand. Each repetition
    runs the full patch verification on per-trial Bernoulli outcomes.
    """
    p_lower, _ = patch_plan(bug_tally, delta)
    fix = bernoulli_source(1.0 - p_lower, "fixed-ok")
    accepted = 0
    for s in _rep_seeds(seed, 0, reps):
        verdict = patch_verify(fix, None, delta, bug_tally, s, batch_size=batch_size)
        accepted += verdict.outcome is PatchOutcome.NULL_REJECTED
    return accepted / reps


# -- accuracy table ------------------------------------------------------------

DAILY_EXECUTIONS = (
    ("OSS-Fuzz", 2e11),
    ("Netflix", 8.64e10),
    ("Youtube", 6.2e9),
    ("Google", 5.6e9),
    ("Tinder", 2e9),
    ("Facebook", 1.5e9),
    ("Twitter", 6.817e8),
    ("Skype", 2.538e8),
    ("Visa", 1.5e8),
    ("Instagram", 7.11e7),
)


@dataclass(frozen=True)
class AccuracyRow:
    name: str
    n: float
    hoeffding_accuracy: float
    ro3_accuracy: float


def fig1_table(delta: float = 0.01) -> list:
    """Accuracy bounds reachable from one day of executions at well-known services."""
    return [
        AccuracyRow(name, n, hoeffding_accuracy(int(n), delta), ro3_accuracy(int(n), delta))
        for name, n in DAILY_EXECUTIONS
    ]


# -- CSV -----------------------------------------------------------------------


def _cell(value):
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def rows_to_csv(rows: Sequence, header: Optional[Sequence[str]] = None) -> str:
    """Render dataclass rows as CSV with floats at 17 significant digits."""
    if header is None:
        if not rows:
            raise ParameterError("cannot infer a header from no rows")
        header = [f.name for f in fields(rows[0])]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in astuple(row)])
    return buf.getvalue()


def write_csv(path, rows: Sequence) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(rows))
