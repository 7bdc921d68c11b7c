"""The four (epsilon, delta) analyses.

``verify``            zero-violation verification with a residual-risk bound
``quantify_theory``   estimate a proportion; check the exact interval every trial
``quantify_practice`` same guarantee, far fewer interval evaluations
``patch_verify``      decide whether a fix lowered a failure rate

Each returns a self-describing report whose ``to_json`` output is stable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from . import __version__
from .binomial_stats import (
    ApproximationParams,
    ConfidenceInterval,
    Estimate,
    EstimateKind,
    IntervalMethod,
    Tally,
    clopper_pearson,
    clopper_pearson_radius,
    hoeffding_sample_size,
    kp_sample_size,
    laplace_estimate,
    mle_estimate,
    ro3_accuracy,
    ro3_sample_size,
)
from .engine import DEFAULT_BATCH_SIZE, TrialEngine, TrialSource
from .errors import CannotVerifyError, ParameterError

REPORT_SCHEMA = "pacheck-report/1"


class Method(str, Enum):
    VERIFY = "Verify"
    QUANTIFY_THEORY = "QuantifyTheory"
    QUANTIFY_PRACTICE = "QuantifyPractice"
    PATCH_VERIFY = "PatchVerify"


class Verdict(str, Enum):
    GUARANTEED = "guaranteed"
    VIOLATED = "violated"


class PatchOutcome(str, Enum):
    NULL_REJECTED = "NullRejected"
    VIOLATION_OBSERVED = "ViolationObserved"


@dataclass(frozen=True)
class Violation:
    trial_index: int
    properties: tuple


def _params(params) -> ApproximationParams:
    if isinstance(params, ApproximationParams):
        return params
    epsilon, delta = params
    return ApproximationParams(epsilon, delta)


def _fmt(value) -> str:
    return repr(float(value))


@dataclass(frozen=True)
class AnalysisReport:
    method: Method
    params: ApproximationParams
    trials_used: int
    tallies: dict
    estimate: Optional[Estimate]
    interval: Optional[ConfidenceInterval]
    guarantee: str
    base_seed: int
    cp_evaluations: int
    verdict: Verdict
    stopping_rule: str
    violation: Optional[Violation] = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "tool_version": __version__,
            "method": self.method.value,
            "verdict": self.verdict.value,
            "params": {"epsilon": self.params.epsilon, "delta": self.params.delta},
            "base_seed": self.base_seed,
            "trials_used": self.trials_used,
            "tallies": {p: {"n": t.n, "x": t.x} for p, t in self.tallies.items()},
            "estimate": None if self.estimate is None else self.estimate.to_dict(),
            "interval": None if self.interval is None else self.interval.to_dict(),
            "guarantee": self.guarantee,
            "cp_evaluations": self.cp_evaluations,
            "stopping_rule": self.stopping_rule,
            "violation": None
            if self.violation is None
            else {
                "trial_index": self.violation.trial_index,
                "properties": list(self.violation.properties),
            },
            "details": self.details,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


@dataclass(frozen=True)
class PatchVerdict:
    n_bug: int
    x_bug: int
    p_lower: float
    n_fix_required: int
    n_fix_executed: int
    outcome: PatchOutcome
    significance: float
    base_seed: int
    statement: str
    violation_trial: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "tool_version": __version__,
            "method": Method.PATCH_VERIFY.value,
            "outcome": self.outcome.value,
            "n_bug": self.n_bug,
            "x_bug": self.x_bug,
            "p_lower": self.p_lower,
            "n_fix_required": self.n_fix_required,
            "n_fix_executed": self.n_fix_executed,
            "significance": self.significance,
            "base_seed": self.base_seed,
            "statement": self.statement,
            "violation_trial": self.violation_trial,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _resolve_property(source: TrialSource, prop: Optional[str]) -> str:
    if prop is None:
        if len(source.properties) != 1:
            raise ParameterError(
                f"source has properties {list(source.properties)}; name the one to analyse"
            )
        return source.properties[0]
    if prop not in source.properties:
        raise ParameterError(f"unknown property {prop!r}; source has {list(source.properties)}")
    return prop


def _first_violation_rule(names, hit):
    def stop(ledger, start, columns):
        failed = np.zeros(len(columns[names[0]]), dtype=bool)
        for name in names:
            failed |= ~np.asarray(columns[name], dtype=bool)
        where = np.flatnonzero(failed)
        if where.size == 0:
            return None
        k = int(where[0])
        hit.append(Violation(start + k, tuple(n for n in names if not columns[n][k])))
        return k + 1

    return stop


# -- verification --------------------------------------------------------------


def verify(
    source: TrialSource,
    properties: Optional[Sequence[str]],
    params,
    seed: int = 0,
    *,
    workers: int = 1,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> AnalysisReport:
    """Check every property on ``ro3_sample_size(epsilon, delta)`` trials.

    Stops at the first trial that violates any requested property and reports
    all properties violated there. Otherwise each property is estimated by the
    Laplace rule with the guarantee ``mu in [1 - epsilon, 1]`` at confidence
    ``1 - delta``. The number of trials does not depend on how many properties
    are checked.
    """
    params = _params(params)
    names = tuple(source.properties if properties is None else properties)
    if not names:
        raise ParameterError("verify needs at least one property")
    for name in names:
        _resolve_property(source, name)
    n = ro3_sample_size(params.epsilon, params.delta)
    hit = []
    engine = TrialEngine(source, workers, batch_size)
    ledger = engine.run(n, seed, stop=_first_violation_rule(names, hit))
    tallies = {p: ledger.tallies[p] for p in names}
    config = {"planned_trials": n, "properties": list(names), "engine": engine.config}
    if hit:
        v = hit[0]
        return AnalysisReport(
            Method.VERIFY, params, ledger.trial_count, tallies, None, None,
            f"Property {', '.join(v.properties)} violated in trial {v.trial_index + 1} "
            f"of {n} planned (trial index {v.trial_index}).",
            ledger.base_seed, 0, Verdict.VIOLATED, "violation", v, config,
        )
    est = laplace_estimate(n)
    eps, delta = params.epsilon, params.delta
    interval = ConfidenceInterval(1.0 - eps, 1.0, 1.0 - delta, IntervalMethod.RULE_OF_THREE)
    guarantee = (
        f"No violation of {', '.join(names)} in {n} trials. Estimated probability that each "
        f"property holds: {_fmt(est.value)} (Laplace). With confidence at least "
        f"{_fmt(1.0 - delta)} the true probability lies in [{_fmt(1.0 - eps)}, 1] "
        f"(epsilon={_fmt(eps)}, delta={_fmt(delta)})."
    )
    return AnalysisReport(
        Method.VERIFY, params, ledger.trial_count, tallies, est, interval, guarantee,
        ledger.base_seed, 0, Verdict.GUARANTEED, "sample_size", None, config,
    )


# -- quantitative analysis -----------------------------------------------------


def _quantify_guarantee(prop, m, est, params):
    eps, delta = params.epsilon, params.delta
    return (
        f"Estimated probability that {prop} holds: {_fmt(est.value)} from {m} trials. "
        f"With confidence at least {_fmt(1.0 - delta)} the true probability lies within "
        f"{_fmt(est.value)} +/- {_fmt(eps)} (epsilon={_fmt(eps)}, delta={_fmt(delta)})."
    )


def quantify_theory(
    source: TrialSource,
    prop: Optional[str],
    params,
    seed: int = 0,
    *,
    cp_stride: int = 1,
    workers: int = 1,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> AnalysisReport:
    """Estimate the probability that ``prop`` holds to within ``epsilon``.

    Runs at most ``hoeffding_sample_size(epsilon, delta)`` trials and stops as
    soon as the Clopper-Pearson radius at level ``1 - delta`` is at most
    ``epsilon``. The radius is checked after every ``cp_stride``-th trial (and
    always at the cap); trials a batch ran past the stopping point are discarded.
    """
    params = _params(params)
    prop = _resolve_property(source, prop)
    if cp_stride < 1:
        raise ParameterError("cp_stride must be at least 1")
    eps, delta = params.epsilon, params.delta
    cap = hoeffding_sample_size(eps, delta)
    state = {"cp": 0, "fired": False}

    def stop(ledger, start, columns):
        bits = np.asarray(columns[prop], dtype=bool)
        m = start + 1 + np.arange(len(bits), dtype=np.int64)
        x = ledger.tallies[prop].x + np.cumsum(bits, dtype=np.int64)
        checked = np.flatnonzero((m % cp_stride == 0) | (m == cap))
        if checked.size == 0:
            return None
        radii = clopper_pearson_radius(m[checked], x[checked], delta)
        hit = np.flatnonzero(radii <= eps)
        if hit.size == 0:
            state["cp"] += int(checked.size)
            return None
        state["cp"] += int(hit[0]) + 1
        state["fired"] = True
        return int(checked[hit[0]]) + 1

    engine = TrialEngine(source, workers, batch_size)
    ledger = engine.run(cap, seed, stop=stop)
    t = ledger.tallies[prop]
    est = mle_estimate(t)
    return AnalysisReport(
        Method.QUANTIFY_THEORY, params, ledger.trial_count, {prop: t}, est,
        clopper_pearson(t, delta), _quantify_guarantee(prop, t.n, est, params),
        ledger.base_seed, state["cp"], Verdict.GUARANTEED,
        "cp_radius" if state["fired"] else "hoeffding_cap", None,
        {"cp_stride": cp_stride, "hoeffding_cap": cap, "engine": engine.config},
    )


def quantify_practice(
    source: TrialSource,
    prop: Optional[str],
    params,
    seed: int = 0,
    *,
    initial_guess: str = "mle",
    workers: int = 1,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> AnalysisReport:
    """Estimate the probability that ``prop`` holds, predicting sample sizes.

    First runs the rule-of-three number of trials. If every trial agreed, the
    rule-of-three bound already is the answer. Otherwise it repeatedly adds
    ``kp_sample_size(p0, epsilon, delta)`` trials, with ``p0`` the current
    estimate, and evaluates the Clopper-Pearson radius once per round until it
    is at most ``epsilon``. Cumulative trials never exceed the Hoeffding
    sample size, where the Hoeffding guarantee takes over.

    ``initial_guess="laplace"`` seeds the first prediction with ``(x+1)/(n+2)``
    instead of ``x/n``.
    """
    params = _params(params)
    prop = _resolve_property(source, prop)
    if initial_guess not in ("mle", "laplace"):
        raise ParameterError("initial_guess must be 'mle' or 'laplace'")
    eps, delta = params.epsilon, params.delta
    n0 = ro3_sample_size(eps, delta)
    cap = max(hoeffding_sample_size(eps, delta), n0)
    engine = TrialEngine(source, workers, batch_size)
    ledger = engine.run(n0, seed)
    t = ledger.tallies[prop]
    details = {"initial_guess": initial_guess, "hoeffding_cap": cap, "ro3_trials": n0,
               "predictions": [], "engine": engine.config}
    if t.x in (0, t.n):
        est = mle_estimate(t)
        if t.x == 0:
            interval = ConfidenceInterval(0.0, eps, 1.0 - delta, IntervalMethod.RULE_OF_THREE)
        else:
            interval = ConfidenceInterval(1.0 - eps, 1.0, 1.0 - delta, IntervalMethod.RULE_OF_THREE)
        return AnalysisReport(
            Method.QUANTIFY_PRACTICE, params, t.n, {prop: t}, est, interval,
            _quantify_guarantee(prop, t.n, est, params), ledger.base_seed, 0,
            Verdict.GUARANTEED, "rule_of_three", None, details,
        )
    cp = 0
    rule = "hoeffding_cap"
    p0 = (t.x + 1) / (t.n + 2) if initial_guess == "laplace" else t.x / t.n
    while ledger.trial_count < cap:
        predicted = kp_sample_size(p0, eps, delta)
        details["predictions"].append(predicted)
        target = min(ledger.trial_count + predicted, cap)
        engine.run(target, ledger=ledger)
        t = ledger.tallies[prop]
        cp += 1
        if clopper_pearson(t, delta).radius <= eps:
            rule = "cp_radius"
            break
        p0 = t.x / t.n
    est = mle_estimate(t)
    return AnalysisReport(
        Method.QUANTIFY_PRACTICE, params, t.n, {prop: t}, est, clopper_pearson(t, delta),
        _quantify_guarantee(prop, t.n, est, params), ledger.base_seed, cp,
        Verdict.GUARANTEED, rule, None, details,
    )


# -- patch verification --------------------------------------------------------


def patch_sample_size(p_lower: float, delta: float) -> int:
    """Clean fixed-program trials whose rule-of-three interval ``[0, 1 - delta**(1/n)]``
    lies strictly below ``p_lower``."""
    if not 0.0 < p_lower < 1.0:
        raise ParameterError("p_lower must lie strictly inside (0, 1)")
    n = math.ceil(math.log(delta) / math.log1p(-p_lower))
    n = max(n, 1)
    while ro3_accuracy(n, delta) >= p_lower:
        n += 1
    return n


def patch_plan(bug_tally: Tally, delta: float):
    """``(p_lower, n_fix)`` for a buggy-program tally whose ``x`` counts
    bug-exposing executions."""
    if bug_tally.x == 0:
        raise CannotVerifyError(
            "bug never observed: the lower confidence limit is 0 and no finite "
            "number of clean trials can show a decrease"
        )
    p_lower = clopper_pearson(bug_tally, delta).lower
    return p_lower, patch_sample_size(p_lower, delta)


def patch_verify(
    fix_source: TrialSource,
    prop: Optional[str],
    delta: float,
    bug_tally: Union[Tally, tuple],
    seed: int = 0,
    *,
    workers: int = 1,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> PatchVerdict:
    """Decide whether a fix reduced the probability of exposing a bug.

    ``bug_tally`` is ``(n_bug, x_bug)`` for the buggy program with ``x_bug``
    counting executions that exposed the bug. ``prop`` on ``fix_source`` holds
    when an execution of the fixed program is successful. The fixed program is
    run ``n_fix`` times; if none of them fails, the null hypothesis (failure
    rate not decreased) is rejected at significance ``delta``.
    """
    if not isinstance(bug_tally, Tally):
        bug_tally = Tally(*bug_tally)
    if not 0.0 < float(delta) < 1.0:
        raise ParameterError("delta must lie strictly inside (0, 1)")
    prop = _resolve_property(fix_source, prop)
    p_lower, n_fix = patch_plan(bug_tally, delta)
    hit = []
    engine = TrialEngine(fix_source, workers, batch_size)
    ledger = engine.run(n_fix, seed, stop=_first_violation_rule((prop,), hit))
    if hit:
        return PatchVerdict(
            bug_tally.n, bug_tally.x, p_lower, n_fix, ledger.trial_count,
            PatchOutcome.VIOLATION_OBSERVED, float(delta), ledger.base_seed,
            f"Property {prop} violated in trial {hit[0].trial_index + 1} of the fixed program; "
            f"the failure rate cannot be shown to have decreased.",
            hit[0].trial_index,
        )
    return PatchVerdict(
        bug_tally.n, bug_tally.x, p_lower, n_fix, ledger.trial_count,
        PatchOutcome.NULL_REJECTED, float(delta), ledger.base_seed,
        f"No violation of {prop} in {n_fix} trials of the fixed program. The null "
        f"hypothesis that the failure rate has not decreased is rejected at significance "
        f"{_fmt(delta)} (buggy-program lower limit {_fmt(p_lower)}, "
        f"fixed-program upper limit {_fmt(ro3_accuracy(n_fix, delta))}).",
    )


__all__ = [
    "AnalysisReport",
    "EstimateKind",
    "Method",
    "PatchOutcome",
    "PatchVerdict",
    "Verdict",
    "Violation",
    "patch_plan",
    "patch_sample_size",
    "patch_verify",
    "quantify_practice",
    "quantify_theory",
    "verify",
]
