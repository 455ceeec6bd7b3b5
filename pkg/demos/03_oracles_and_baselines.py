"""Greedy oracles, the best single configuration, and random switching."""

from phasesched.simulator import SimParams, best_fixed, greedy_oracle, run_random
from phasesched.trace import SyntheticSpec, generate_synthetic

ts = generate_synthetic(SyntheticSpec(
    K=40, phase_script=((0, 10, "IOBound"), (10, 30, "CPUBound"), (30, 40, "Blocked")), seed=3))
params = SimParams()  # 50 ms / 50 mJ per switch

for metric in ("time", "energy"):
    r = greedy_oracle(ts, metric, params)
    print(f"oracle-{metric:6s} {r.total_time_s:7.2f} s {r.total_energy_j:7.2f} J  switches={r.switches}")

for metric in ("time", "energy"):
    cfg, r = best_fixed(ts, metric, params)
    print(f"best fixed by {metric:6s} -> {ts.configs[cfg].label}: {r.total_time_s:.2f} s {r.total_energy_j:.2f} J")

r = run_random(ts, params, seed=0)
print(f"random          {r.total_time_s:7.2f} s {r.total_energy_j:7.2f} J  switches={r.switches}")
