"""Which policies save at least E% energy while staying within S% of the fastest?"""

from phasesched.qlearn import AgentParams
from phasesched.report import compare
from phasesched.simulator import SimParams, best_fixed, greedy_oracle, run_astro, run_random
from phasesched.trace import SyntheticSpec, generate_synthetic

ts = generate_synthetic(SyntheticSpec(
    K=40, phase_script=((0, 10, "IOBound"), (10, 30, "CPUBound"), (30, 40, "Blocked")), seed=3))
p = SimParams()
results = [
    run_astro(ts, AgentParams(seed=0), p)[0],
    greedy_oracle(ts, "time", p),
    greedy_oracle(ts, "energy", p),
    best_fixed(ts, "time", p)[1],
    best_fixed(ts, "energy", p)[1],
    run_random(ts, p, seed=0),
]
report = compare(results, energy_threshold=10.0, slowdown_threshold=25.0)
print(f"baseline {report.baseline}, fastest {report.fastest}")
for row in report.rows:
    print(f"{row.policy:18s} slowdown {row.slowdown_pct:7.1f}%  saving {row.energy_saving_pct:6.1f}%  "
          f"{'pass' if row.passed else '-'}")
