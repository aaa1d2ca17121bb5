"""Per-instance wall-clock benchmarking of explanation methods on one thread."""
from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field

from threadpoolctl import threadpool_limits


@dataclass
class RuntimeReport:
    method: str
    mean: float | None
    median: float | None
    threads: int
    timed: int
    failures: int
    repetitions: int
    deterministic: bool = True
    errors: list = field(default_factory=list)  # (instance index, message)

    @property
    def ok(self):
        return self.timed > 0

    def to_record(self):
        return {
            "method": self.method, "mean_seconds": self.mean, "median_seconds": self.median,
            "threads": self.threads, "timed": self.timed, "failures": self.failures,
            "repetitions": self.repetitions, "deterministic": self.deterministic,
            "errors": [list(e) for e in self.errors],
        }


def _fingerprint(exp):
    rec = exp.to_record()
    rec.pop("seconds", None)
    return rec


def benchmark(method, instances, repetitions=1, name=None):
    """Time ``method(instance)`` on every instance ``repetitions`` times.

    Instances whose method call raises are recorded in ``errors`` and left out
    of the timing. Returns ``(report, explanations)``; the explanation list
    holds the first repetition's output (None where it failed).
    """
    instances = list(instances)
    if not instances:
        raise ValueError("benchmark needs at least one instance")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    name = name or getattr(method, "__name__", "method")
    times, outputs, errors = [], [], []
    deterministic = True
    with threadpool_limits(limits=1):
        for n, inst in enumerate(instances):
            first = None
            per = []
            try:
                for _ in range(repetitions):
                    t0 = time.perf_counter()
                    exp = method(inst)
                    per.append(time.perf_counter() - t0)
                    if first is None:
                        first = exp
                    elif _fingerprint(exp) != _fingerprint(first):
                        deterministic = False
            except Exception as err:  # noqa: BLE001 - recorded, not raised
                errors.append((n, f"{type(err).__name__}: {err}"))
                outputs.append(None)
                continue
            times.extend(per)
            outputs.append(first)
    report = RuntimeReport(
        name,
        statistics.fmean(times) if times else None,
        statistics.median(times) if times else None,
        1, len(instances) - len(errors), len(errors), repetitions, deterministic, errors)
    return report, outputs
