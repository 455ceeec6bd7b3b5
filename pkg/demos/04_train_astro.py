"""Train the Q-learning scheduler and watch it settle."""

import numpy as np

from phasesched.core import ProgramPhase
from phasesched.qlearn import AgentParams
from phasesched.simulator import SimParams, greedy_oracle, run_astro
from phasesched.trace import SyntheticSpec, generate_synthetic

ts = generate_synthetic(SyntheticSpec(
    K=40, phase_script=((0, 10, "IOBound"), (10, 30, "CPUBound"), (30, 40, "Blocked")), seed=3))

for episodes in (5, 25, 100):
    result, agent = run_astro(ts, AgentParams(seed=0), SimParams(episodes=episodes))
    print(f"{episodes:3d} episodes: {result.total_time_s:6.2f} s {result.total_energy_j:6.2f} J "
          f"switches={result.switches:2d} epsilon={agent.epsilon:.3f}")

# %% the last, greedy episode by program phase
adopted = np.array(result.adopted)
for ph in np.unique(ts.phases):
    picks = np.bincount(adopted[ts.phases == ph], minlength=ts.n_configs)
    print(f"{ProgramPhase(ph).name:8s} -> {ts.configs[int(picks.argmax())].label}")

# %% the reward favours energy*delay; compare with the time oracle
o = greedy_oracle(ts, "time")
print(f"oracle-time: {o.total_time_s:.2f} s {o.total_energy_j:.2f} J")
print("recent losses", np.round(agent.losses[-5:], 4))
