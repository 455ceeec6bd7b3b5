"""Freeze a trained agent into static and hybrid tables, then replay them."""

from phasesched.qlearn import AgentParams
from phasesched.schedule import emit_pseudo, export_hybrid, export_static, replay_schedule
from phasesched.simulator import SimParams, run_astro
from phasesched.trace import SyntheticSpec, generate_synthetic

ts = generate_synthetic(SyntheticSpec(
    K=40, phase_script=((0, 10, "IOBound"), (10, 30, "CPUBound"), (30, 40, "Blocked")), seed=3))
astro, agent = run_astro(ts, AgentParams(seed=0), SimParams(episodes=60))

static = export_static(agent)
hybrid = export_hybrid(agent)
print(emit_pseudo(static))

# no clear winner is expected between the two
for sched in (static, hybrid):
    r = replay_schedule(ts, sched)
    print(f"{r.policy:14s} {r.total_time_s:6.2f} s {r.total_energy_j:6.2f} J")
print(f"{'astro':14s} {astro.total_time_s:6.2f} s {astro.total_energy_j:6.2f} J")
