"""Concrete trial sources.

* :func:`bernoulli_source` -- synthetic subject with a known proportion.
* :func:`subprocess_source` -- runs a real program once per trial and judges
  each execution with property observers (exit code, output, latency, value).
* :func:`trace_source` -- replays outcomes recorded in an NDJSON trace file.
"""

from __future__ import annotations

import json
import re
import shlex
import subprocess
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .engine import RunLedger, TrialEngine, TrialSource, seeds_to_uniform
from .errors import (
    InsufficientTrialsError,
    ParameterError,
    TraceParseError,
    TrialInfrastructureError,
)

DEFAULT_TIMEOUT = 10.0


class BernoulliSource(TrialSource):
    """Property holds on trial ``i`` iff the uniform draw from its seed is < ``mu``."""

    def __init__(self, mu: float, name: str = "phi"):
        mu = float(mu)
        if not 0.0 <= mu <= 1.0:
            raise ParameterError(f"mu must lie in [0, 1], got {mu!r}")
        self.mu = mu
        self.name = name
        self.properties = (name,)

    def trial(self, index, seed):
        draw = seeds_to_uniform(np.asarray([seed], dtype=np.uint64))[0]
        return {self.name: bool(draw < self.mu)}

    def batch(self, indices, seeds):
        return {self.name: seeds_to_uniform(seeds) < self.mu}

    def fingerprint(self):
        return f"bernoulli:{self.mu!r}:{self.name}"

    def __repr__(self):
        return f"BernoulliSource(mu={self.mu!r}, name={self.name!r})"


def bernoulli_source(mu: float, name: str = "phi") -> BernoulliSource:
    return BernoulliSource(mu, name)


# -- observers -----------------------------------------------------------------


@dataclass(frozen=True)
class Execution:
    """Observable record of one process run."""

    exit_code: Optional[int]
    stdout: str
    stderr: str
    elapsed_ms: float
    timed_out: bool = False


@dataclass(frozen=True)
class ExitCodeZero:
    name: str = "exit-zero"

    def __call__(self, run: Execution) -> bool:
        return run.exit_code == 0


@dataclass(frozen=True)
class OutputMatches:
    """Holds when ``pattern`` matches somewhere in stdout (``re.search``)."""

    pattern: str
    name: str = "output-matches"

    def __call__(self, run: Execution) -> bool:
        return re.search(self.pattern, run.stdout) is not None


@dataclass(frozen=True)
class LatencyBelow:
    threshold_ms: float
    name: str = "latency-below"

    def __call__(self, run: Execution) -> bool:
        return not run.timed_out and run.elapsed_ms < self.threshold_ms


@dataclass(frozen=True)
class ValueThreshold:
    """Holds when the last ``channel=<number>`` (or ``channel: <number>``)
    reported on stdout is at most ``bound``. A missing channel is a violation."""

    channel: str
    bound: float
    name: str = "value-threshold"

    def __call__(self, run: Execution) -> bool:
        pattern = rf"(?m)\b{re.escape(self.channel)}\s*[=:]\s*([-+0-9.eEinfINFnaN]+)"
        found = re.findall(pattern, run.stdout)
        if not found:
            return False
        try:
            return float(found[-1]) <= self.bound
        except ValueError:
            return False


PropertyObserver = Union[ExitCodeZero, OutputMatches, LatencyBelow, ValueThreshold]


def uniform_bits(bits: int = 32) -> Callable[[np.random.Generator], str]:
    """Input generator drawing a uniform unsigned integer of ``bits`` bits."""

    def generate(rng: np.random.Generator) -> str:
        return str(int(rng.integers(0, 1 << bits, dtype=np.uint64)))

    generate.__name__ = f"uniform_bits_{bits}"
    return generate


def _no_input(rng):
    return ""


class SubprocessSource(TrialSource):
    """One trial = one process execution on an input generated from the trial seed.

    ``command`` is a shell string or an argv list; every ``{input}`` in it is
    replaced by the generated input. With ``stdin=True`` the input is also fed
    on standard input.
    """

    def __init__(
        self,
        command: Union[str, Sequence[str]],
        observers: Sequence[PropertyObserver],
        input_generator: Optional[Callable[[np.random.Generator], str]] = None,
        timeout: float = DEFAULT_TIMEOUT,
        stdin: bool = False,
        env: Optional[dict] = None,
    ):
        if not observers:
            raise ParameterError("subprocess_source needs at least one observer")
        names = [o.name for o in observers]
        if len(set(names)) != len(names):
            raise ParameterError(f"observer names must be unique, got {names}")
        self.command = command
        self.observers = tuple(observers)
        self.input_generator = input_generator or _no_input
        self.timeout = float(timeout)
        self.stdin = stdin
        self.env = env
        self.properties = tuple(names)

    def _argv(self, value: str):
        if isinstance(self.command, str):
            return ["/bin/sh", "-c", self.command.replace("{input}", shlex.quote(value))]
        return [part.replace("{input}", value) for part in self.command]

    def execute(self, index: int, seed: int) -> Execution:
        value = self.input_generator(np.random.default_rng(seed))
        argv = self._argv(value)
        began = time.perf_counter()
        try:
            proc = subprocess.run(
                argv,
                input=value if self.stdin else None,
                capture_output=True,
                text=True,
                timeout=self.timeout,
                env=self.env,
            )
        except subprocess.TimeoutExpired as exc:
            elapsed = (time.perf_counter() - began) * 1000.0
            return Execution(None, _text(exc.stdout), _text(exc.stderr), elapsed, True)
        except OSError as exc:
            raise TrialInfrastructureError(f"cannot spawn {argv[0]!r}: {exc}", index) from exc
        elapsed = (time.perf_counter() - began) * 1000.0
        return Execution(proc.returncode, proc.stdout, proc.stderr, elapsed)

    def trial(self, index, seed):
        run = self.execute(index, seed)
        if run.timed_out and not self._timeout_is_claimed():
            raise TrialInfrastructureError(
                f"subject exceeded the {self.timeout:g} s timeout", index
            )
        return {o.name: bool(o(run)) for o in self.observers}

    def _timeout_is_claimed(self):
        # A timeout settles a deadline property but says nothing about the
        # others, so it only counts as an outcome when every observer is one.
        return all(
            isinstance(o, LatencyBelow) and o.threshold_ms <= self.timeout * 1000.0
            for o in self.observers
        )

    def fingerprint(self):
        return json.dumps(
            {
                "command": self.command,
                "observers": [repr(o) for o in self.observers],
                "input": getattr(self.input_generator, "__name__", repr(self.input_generator)),
                "timeout": self.timeout,
                "stdin": self.stdin,
            },
            sort_keys=True,
        )


def _text(data):
    if data is None:
        return ""
    return data.decode(errors="replace") if isinstance(data, bytes) else data


def subprocess_source(
    command,
    observers,
    input_generator=None,
    timeout: float = DEFAULT_TIMEOUT,
    stdin: bool = False,
) -> SubprocessSource:
    return SubprocessSource(command, observers, input_generator, timeout, stdin)


# -- traces --------------------------------------------------------------------


class TraceSource(TrialSource):
    """Replays recorded outcomes: trial ``i`` is the ``i``-th line of the trace.

    The seed is ignored; a trace is deterministic by content.
    """

    def __init__(self, records: dict, indices: np.ndarray, label: str = "<memory>"):
        self._columns = records
        self._indices = indices
        self.label = label
        self.properties = tuple(records)

    def __len__(self):
        return len(self._indices)

    @property
    def recorded_indices(self) -> np.ndarray:
        return self._indices

    def column(self, name: str) -> np.ndarray:
        return self._columns[name]

    def trial(self, index, seed):
        if index >= len(self):
            raise InsufficientTrialsError(f"trace {self.label} holds only {len(self)} trials", index)
        return {name: bool(col[index]) for name, col in self._columns.items()}

    def batch(self, indices, seeds):
        start, stop = int(indices[0]), int(indices[-1]) + 1
        available = min(stop, len(self))
        columns = {name: col[start:available].copy() for name, col in self._columns.items()}
        if available < stop:
            raise InsufficientTrialsError(
                f"trace {self.label} holds only {len(self)} trials", available, columns
            )
        return columns

    def fingerprint(self):
        return f"trace:{self.label}:{len(self)}"


def _parse_trace_lines(lines, label):
    indices = []
    rows = []
    names = None
    last = None
    for number, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise TraceParseError(f"invalid JSON ({exc.msg})", number) from None
        if not isinstance(obj, dict) or set(obj) != {"t", "props"}:
            raise TraceParseError('expected an object with keys "t" and "props"', number)
        t, props = obj["t"], obj["props"]
        if not isinstance(t, int) or isinstance(t, bool):
            raise TraceParseError('"t" must be an integer', number)
        if last is not None and t <= last:
            raise TraceParseError(f"trial index {t} does not increase (previous {last})", number)
        if not isinstance(props, dict) or not all(isinstance(v, bool) for v in props.values()):
            raise TraceParseError('"props" must map property names to booleans', number)
        if names is None:
            names = list(props)
        elif set(props) != set(names):
            raise TraceParseError("property set differs from the first line", number)
        indices.append(t)
        rows.append([props[n] for n in names])
        last = t
    names = names or []
    table = np.asarray(rows, dtype=bool).reshape(len(rows), len(names))
    records = {name: table[:, k].copy() for k, name in enumerate(names)}
    return TraceSource(records, np.asarray(indices, dtype=np.int64), label)


def trace_source(path) -> TraceSource:
    """Load an NDJSON trace: one ``{"t": <index>, "props": {...}}`` per line."""
    with open(path, encoding="utf-8") as fh:
        return _parse_trace_lines(fh, str(path))


def parse_trace(text: str, label: str = "<string>") -> TraceSource:
    return _parse_trace_lines(text.splitlines(), label)


def format_trace_line(index: int, props: dict) -> str:
    return json.dumps({"t": int(index), "props": {k: bool(v) for k, v in props.items()}},
                      separators=(",", ":"))


def write_trace(path, columns: dict, start: int = 0) -> None:
    """Write aligned boolean ``columns`` as trace lines with indices from ``start``."""
    names = list(columns)
    length = len(columns[names[0]]) if names else 0
    with open(path, "w", encoding="utf-8") as fh:
        for k in range(length):
            fh.write(format_trace_line(start + k, {n: columns[n][k] for n in names}) + "\n")


def record_trace(source: TrialSource, count: int, base_seed: int, path) -> RunLedger:
    """Run ``count`` trials of ``source`` and save every outcome as a trace."""
    engine = TrialEngine(source, retain_bits=True, bits_cap=max(count, 1))
    ledger = engine.run(count, base_seed)
    write_trace(path, {p: ledger.outcome_bits(p) for p in ledger.properties})
    return ledger
