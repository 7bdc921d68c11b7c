"""Monte Carlo trial execution.

A :class:`TrialSource` produces one outcome per property for a trial, given
that trial's index and a seed derived from ``(base_seed, index)``. Because the
seed depends only on the index, the outcome of trial ``i`` is the same no
matter which worker ran it, how trials were batched, or whether the run was
checkpointed and resumed in between. The engine exploits this: batches run on
a thread pool, results are committed strictly in index order, and a stop rule
may discard the unneeded tail of a batch without changing what the committed
prefix looks like.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from .binomial_stats import MAX_COUNT, Tally
from .errors import (
    CheckpointError,
    CountOverflowError,
    InsufficientDataError,
    ParameterError,
    TrialInfrastructureError,
)

SNAPSHOT_FORMAT = "pacheck-checkpoint"
SNAPSHOT_VERSION = 1

DEFAULT_BATCH_SIZE = 64
DEFAULT_BITS_CAP = 10**7

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix64(z):
    # SplitMix64 finalizer; works on Python ints and on uint64 arrays alike
    if isinstance(z, np.ndarray):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, index: int) -> int:
    """Per-trial 64-bit seed: a counter-based hash of ``(base_seed, index)``."""
    key = _mix64(int(base_seed) & _MASK64)
    return _mix64((key + (int(index) + 1) * _GAMMA) & _MASK64)


def derive_seeds(base_seed: int, start: int, stop: int) -> np.ndarray:
    """Vectorized :func:`derive_seed` for indices ``start .. stop - 1``."""
    key = np.uint64(_mix64(int(base_seed) & _MASK64))
    idx = np.arange(start + 1, stop + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64(key + idx * np.uint64(_GAMMA))


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def seeds_to_uniform(seeds: np.ndarray) -> np.ndarray:
    """Map 64-bit seeds to doubles in [0, 1) using their top 53 bits."""
    return (seeds >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


class TrialSource(ABC):
    """Something that can execute trial ``index`` and report property outcomes.

    Subclasses set ``properties`` (ordered names) and implement :meth:`trial`.
    A source must be deterministic in ``seed`` and safe to call from several
    threads. Sources that can evaluate many trials at once (e.g. synthetic
    ones) should override :meth:`batch`.
    """

    properties: tuple = ()

    @abstractmethod
    def trial(self, index: int, seed: int) -> Mapping[str, bool]:
        ...

    def batch(self, indices: np.ndarray, seeds: np.ndarray) -> dict:
        columns = {name: np.empty(len(indices), dtype=bool) for name in self.properties}
        for pos, (index, seed) in enumerate(zip(indices.tolist(), seeds.tolist())):
            try:
                outcome = self.trial(index, seed)
                for name in self.properties:
                    columns[name][pos] = bool(outcome[name])
            except TrialInfrastructureError as exc:
                exc.partial = {k: v[:pos].copy() for k, v in columns.items()}
                raise
            except Exception as exc:
                partial = {k: v[:pos].copy() for k, v in columns.items()}
                raise TrialInfrastructureError(
                    f"{type(exc).__name__}: {exc}", index, partial
                ) from exc
        return columns

    def fingerprint(self) -> str:
        """Stable description used to tie checkpoints to their source."""
        return f"{type(self).__module__}.{type(self).__qualname__}"


@dataclass
class RunLedger:
    """Everything a run has established so far.

    ``tallies[p].x`` counts trials where property ``p`` held. Violating trial
    indices are stored per property as int64 arrays; ``violation_log`` presents
    them as ``(index, property)`` pairs in trial order.
    """

    base_seed: int
    properties: tuple
    config: dict
    tallies: dict = field(default_factory=dict)
    trial_count: int = 0
    retain_bits: bool = False
    bits_cap: int = DEFAULT_BITS_CAP
    _violations: dict = field(default_factory=dict, repr=False)
    _bits: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for name in self.properties:
            self.tallies.setdefault(name, Tally())
            self._violations.setdefault(name, [])
            if self.retain_bits:
                self._bits.setdefault(name, [])

    def commit(self, start: int, columns: Mapping[str, np.ndarray]) -> None:
        if start != self.trial_count:
            raise ValueError(f"out-of-order commit at {start}, expected {self.trial_count}")
        size = len(next(iter(columns.values()))) if columns else 0
        if size == 0:
            return
        if self.trial_count + size > MAX_COUNT:
            raise CountOverflowError("trial count exceeds the representable range")
        for name in self.properties:
            col = np.asarray(columns[name], dtype=bool)
            held = int(np.count_nonzero(col))
            old = self.tallies[name]
            self.tallies[name] = Tally(old.n + size, old.x + held)
            if held < size:
                self._violations[name].append(np.flatnonzero(~col).astype(np.int64) + start)
            if self.retain_bits:
                room = self.bits_cap - sum(len(b) for b in self._bits[name])
                if room > 0:
                    self._bits[name].append(col[:room].copy())
        self.trial_count += size

    def violation_indices(self, name: str) -> np.ndarray:
        parts = self._violations[name]
        if not parts:
            return np.empty(0, dtype=np.int64)
        if len(parts) > 1:
            self._violations[name] = parts = [np.concatenate(parts)]
        return parts[0]

    @property
    def violation_log(self) -> list:
        pairs = [(int(i), name) for name in self.properties for i in self.violation_indices(name)]
        rank = {name: k for k, name in enumerate(self.properties)}
        pairs.sort(key=lambda p: (p[0], rank[p[1]]))
        return pairs

    def outcome_bits(self, name: str) -> Optional[np.ndarray]:
        if not self.retain_bits:
            return None
        parts = self._bits[name]
        return np.concatenate(parts) if parts else np.empty(0, dtype=bool)

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    def to_dict(self) -> dict:
        out = {
            "base_seed": self.base_seed,
            "properties": list(self.properties),
            "trial_count": self.trial_count,
            "tallies": {p: [t.n, t.x] for p, t in self.tallies.items()},
            "violations": {p: self.violation_indices(p).tolist() for p in self.properties},
            "config": self.config,
            "retain_bits": self.retain_bits,
            "bits_cap": self.bits_cap,
        }
        if self.retain_bits:
            out["bits"] = {}
            for p in self.properties:
                bits = self.outcome_bits(p)
                out["bits"][p] = {
                    "length": int(len(bits)),
                    "packed": base64.b64encode(np.packbits(bits).tobytes()).decode(),
                }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "RunLedger":
        ledger = cls(
            base_seed=int(data["base_seed"]),
            properties=tuple(data["properties"]),
            config=dict(data["config"]),
            retain_bits=bool(data["retain_bits"]),
            bits_cap=int(data["bits_cap"]),
        )
        ledger.trial_count = int(data["trial_count"])
        ledger.tallies = {p: Tally(*data["tallies"][p]) for p in ledger.properties}
        ledger._violations = {
            p: [np.asarray(data["violations"][p], dtype=np.int64)] for p in ledger.properties
        }
        if ledger.retain_bits:
            for p in ledger.properties:
                entry = data["bits"][p]
                raw = np.frombuffer(base64.b64decode(entry["packed"]), dtype=np.uint8)
                ledger._bits[p] = [np.unpackbits(raw)[: entry["length"]].astype(bool)]
        for p in ledger.properties:
            t = ledger.tallies[p]
            if t.n != ledger.trial_count or t.failures != len(ledger.violation_indices(p)):
                raise CheckpointError(f"inconsistent tally for property {p!r}")
        return ledger


#: ``stop(ledger, start, columns) -> keep``. Called once per batch, in trial
#: order, before the batch is committed. Return ``None`` to commit the whole
#: batch and continue, or an integer ``keep`` to commit only the first ``keep``
#: trials of the batch and end the run.
StopRule = Callable[[RunLedger, int, dict], Optional[int]]


class TrialEngine:
    """Runs trials from ``source`` on ``workers`` threads in batches."""

    def __init__(
        self,
        source: TrialSource,
        workers: int = 1,
        batch_size: int = DEFAULT_BATCH_SIZE,
        retain_bits: bool = False,
        bits_cap: int = DEFAULT_BITS_CAP,
    ):
        if workers < 1:
            raise ParameterError("workers must be at least 1")
        if batch_size < 1:
            raise ParameterError("batch_size must be at least 1")
        self.source = source
        self.workers = int(workers)
        self.batch_size = int(batch_size)
        self.retain_bits = bool(retain_bits)
        self.bits_cap = int(bits_cap)

    @property
    def config(self) -> dict:
        return {
            "source": self.source.fingerprint(),
            "properties": list(self.source.properties),
            "workers": self.workers,
            "batch_size": self.batch_size,
            "retain_bits": self.retain_bits,
            "bits_cap": self.bits_cap,
        }

    def new_ledger(self, base_seed: int) -> RunLedger:
        return RunLedger(
            base_seed=int(base_seed) & _MASK64,
            properties=tuple(self.source.properties),
            config=self.config,
            retain_bits=self.retain_bits,
            bits_cap=self.bits_cap,
        )

    def _run_batch(self, base_seed, start, stop):
        indices = np.arange(start, stop, dtype=np.int64)
        seeds = derive_seeds(base_seed, start, stop)
        try:
            return self.source.batch(indices, seeds)
        except TrialInfrastructureError:
            raise
        except Exception as exc:
            raise TrialInfrastructureError(f"{type(exc).__name__}: {exc}", start) from exc

    def run(
        self,
        count: int,
        base_seed: int = 0,
        stop: Optional[StopRule] = None,
        ledger: Optional[RunLedger] = None,
    ) -> RunLedger:
        """Run until ``ledger.trial_count == count`` or ``stop`` ends the run.

        ``count`` is the total, so passing an existing ``ledger`` continues it.
        """
        if count < 0:
            raise ParameterError("count must be non-negative")
        if ledger is None:
            ledger = self.new_ledger(base_seed)
        elif ledger.config_hash != config_hash(self.config):
            raise CheckpointError("ledger was produced under a different engine configuration")
        seed = ledger.base_seed
        pool = ThreadPoolExecutor(self.workers) if self.workers > 1 else None
        try:
            while ledger.trial_count < count:
                starts = []
                pos = ledger.trial_count
                for _ in range(self.workers):
                    if pos >= count:
                        break
                    end = min(pos + self.batch_size, count)
                    starts.append((pos, end))
                    pos = end
                if pool is None:
                    futures = None
                else:
                    futures = [pool.submit(self._run_batch, seed, a, b) for a, b in starts]
                for k, (a, b) in enumerate(starts):
                    try:
                        if futures is None:
                            columns = self._run_batch(seed, a, b)
                        else:
                            columns = futures[k].result()
                    except TrialInfrastructureError as exc:
                        if exc.partial:
                            keep = self._apply_stop(stop, ledger, a, exc.partial)
                            if keep is not None:
                                return ledger
                        exc.ledger = ledger
                        raise
                    if self._apply_stop(stop, ledger, a, columns) is not None:
                        return ledger
        finally:
            if pool is not None:
                pool.shutdown(wait=True, cancel_futures=True)
        return ledger

    @staticmethod
    def _apply_stop(stop, ledger, start, columns):
        keep = stop(ledger, start, columns) if stop is not None else None
        if keep is None:
            ledger.commit(start, columns)
            return None
        keep = max(0, int(keep))
        ledger.commit(start, {k: v[:keep] for k, v in columns.items()})
        return keep


def run_trials(
    source: TrialSource,
    count: int,
    base_seed: int = 0,
    workers: int = 1,
    *,
    batch_size: int = DEFAULT_BATCH_SIZE,
    stop: Optional[StopRule] = None,
    retain_bits: bool = False,
    bits_cap: int = DEFAULT_BITS_CAP,
) -> RunLedger:
    engine = TrialEngine(source, workers, batch_size, retain_bits, bits_cap)
    return engine.run(count, base_seed, stop=stop)


# -- checkpointing -------------------------------------------------------------


_digest = config_hash


def checkpoint(ledger: RunLedger) -> dict:
    """Portable JSON-serializable snapshot of ``ledger``."""
    body = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "next_index": ledger.trial_count,
        "config_hash": ledger.config_hash,
        "ledger": ledger.to_dict(),
    }
    return {**body, "checksum": _digest(body)}


def save_checkpoint(ledger: RunLedger, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(checkpoint(ledger), fh, sort_keys=True)


def load_checkpoint(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read snapshot: {exc}") from exc


def restore(snapshot: dict) -> RunLedger:
    """Validate a snapshot and rebuild its ledger."""
    if not isinstance(snapshot, dict) or snapshot.get("format") != SNAPSHOT_FORMAT:
        raise CheckpointError("not a pacheck snapshot")
    if snapshot.get("version") != SNAPSHOT_VERSION:
        raise CheckpointError(
            f"snapshot version {snapshot.get('version')!r} != {SNAPSHOT_VERSION}"
        )
    body = {k: v for k, v in snapshot.items() if k != "checksum"}
    if snapshot.get("checksum") != _digest(body):
        raise CheckpointError("snapshot checksum mismatch")
    try:
        ledger = RunLedger.from_dict(snapshot["ledger"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"corrupted snapshot: {exc}") from exc
    if ledger.trial_count != snapshot["next_index"] or ledger.config_hash != snapshot["config_hash"]:
        raise CheckpointError("snapshot header disagrees with its ledger")
    return ledger


def resume(
    snapshot: dict,
    source: TrialSource,
    count: int,
    workers: int = 1,
    *,
    batch_size: int = DEFAULT_BATCH_SIZE,
    stop: Optional[StopRule] = None,
    retain_bits: bool = False,
    bits_cap: int = DEFAULT_BITS_CAP,
) -> RunLedger:
    """Continue a checkpointed run up to ``count`` total trials.

    The engine configuration must match the one that produced the snapshot,
    worker count included.
    """
    ledger = restore(snapshot)
    engine = TrialEngine(source, workers, batch_size, retain_bits, bits_cap)
    if config_hash(engine.config) != ledger.config_hash:
        raise CheckpointError("engine configuration differs from the snapshot's")
    return engine.run(count, ledger=ledger)


# -- IID diagnostic ------------------------------------------------------------


@dataclass(frozen=True)
class IIDDiagnostic:
    """Turning point test result.

    The expected count assumes no ties. Ties can never be turning points, so
    on raw binary outcomes, where most neighbours tie, the count falls far
    below expectation and the test rejects even independent data. Check
    ``tie_fraction`` before reading the p-value; proportions over blocks of
    trials tie much less often.
    """

    length: int
    turning_points: int
    expected: float
    variance: float
    z_statistic: float
    two_sided_p: float
    tie_fraction: float

    def to_dict(self):
        return dict(self.__dict__)


def turning_point_test(values) -> IIDDiagnostic:
    seq = np.asarray(values, dtype=float).ravel()
    length = len(seq)
    if length < 4:
        raise InsufficientDataError("the turning point test needs at least 4 observations")
    left, mid, right = seq[:-2], seq[1:-1], seq[2:]
    peaks = (mid > left) & (mid > right)
    troughs = (mid < left) & (mid < right)
    observed = int(np.count_nonzero(peaks | troughs))
    expected = (2.0 * length - 4.0) / 3.0
    variance = (16.0 * length - 29.0) / 90.0
    z = (observed - expected) / math.sqrt(variance)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    ties = float(np.count_nonzero(seq[1:] == seq[:-1])) / (length - 1)
    return IIDDiagnostic(length, observed, expected, variance, z, min(1.0, p), ties)
