"""Energy-saving vs slowdown comparison of policy results.

A policy passes when it saves at least ``E`` percent energy relative to a
baseline policy while being at most ``S`` percent slower than the fastest
policy in the comparison.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass

from phasesched.simulator import RunResult

REPORT_COLUMNS = ("policy", "total_time_s", "total_energy_j", "slowdown_pct",
                  "energy_delta_pct", "energy_saving_pct", "passed")


class CompareError(ValueError):
    pass


@dataclass(frozen=True)
class PolicyRow:
    policy: str
    total_time_s: float
    total_energy_j: float
    slowdown_pct: float
    energy_delta_pct: float  # positive: uses more energy than the baseline
    passed: bool

    @property
    def energy_saving_pct(self) -> float:
        return -self.energy_delta_pct


@dataclass(frozen=True)
class CompareReport:
    baseline: str
    fastest: str
    energy_threshold: float
    slowdown_threshold: float
    rows: tuple[PolicyRow, ...]
    trace_digest: str = ""

    def row(self, policy: str) -> PolicyRow:
        for r in self.rows:
            if r.policy == policy:
                return r
        raise KeyError(policy)

    def to_json(self) -> dict:
        return {
            "baseline": self.baseline,
            "fastest": self.fastest,
            "energy_threshold_pct": self.energy_threshold,
            "slowdown_threshold_pct": self.slowdown_threshold,
            "trace_digest": self.trace_digest,
            "rows": [{**asdict(r), "energy_saving_pct": r.energy_saving_pct} for r in self.rows],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([r.policy, repr(r.total_time_s), repr(r.total_energy_j),
                        repr(r.slowdown_pct), repr(r.energy_delta_pct),
                        repr(r.energy_saving_pct), int(r.passed)])
        return buf.getvalue()


def compare(results: list[RunResult], energy_threshold: float, slowdown_threshold: float,
            baseline: str = "best-fixed-time") -> CompareReport:
    if len(results) < 2:
        raise CompareError("need at least two results to compare")
    digests = {r.trace_digest for r in results}
    if len(digests) != 1:
        raise CompareError("results come from different trace sets")
    names = [r.policy for r in results]
    if len(set(names)) != len(names):
        raise CompareError(f"duplicate policy names in {names}")
    by_name = {r.policy: r for r in results}
    if baseline not in by_name:
        raise CompareError(f"baseline {baseline!r} not among {names}")
    fastest = min(results, key=lambda r: r.total_time_s)
    base = by_name[baseline]
    rows = []
    for r in results:
        slow = (r.total_time_s - fastest.total_time_s) / fastest.total_time_s * 100.0
        delta = (r.total_energy_j - base.total_energy_j) / base.total_energy_j * 100.0
        rows.append(PolicyRow(r.policy, r.total_time_s, r.total_energy_j, slow, delta,
                              -delta >= energy_threshold and slow <= slowdown_threshold))
    return CompareReport(baseline, fastest.policy, energy_threshold, slowdown_threshold,
                         tuple(rows), digests.pop())
