import numpy as np
import pytest

from phasesched.core import ProgramPhase, n_configs
from phasesched.simulator import SimParams
from phasesched.trace import SyntheticSpec, TraceSet, generate_synthetic

ZERO_PENALTY = SimParams(switch_time_s=0.0, switch_energy_j=0.0)


def make_trace_set(B, L, time, energy=None, instr=None, phases=None, counters=None, **kw):
    """Trace set from (n_configs, K) arrays; unspecified fields get harmless defaults."""
    time = np.asarray(time, dtype=float)
    c, k = time.shape
    assert c == n_configs(B, L)
    energy = np.ones((c, k)) if energy is None else energy
    instr = np.full((c, k), 1_000_000_000) if instr is None else instr
    phases = [ProgramPhase.CPUBound] * k if phases is None else phases
    if counters is None:
        counters = np.tile([0.7, 0.02, 0.002, 0.6], (c, k, 1))
    return TraceSet(B, L, time, energy, instr, counters, [int(p) for p in phases], **kw)


def random_trace_set(rng, B=None, L=None, K=None):
    """Random topology and segment costs, log-uniform over two decades."""
    if B is None:
        B, L = int(rng.integers(0, 4)), int(rng.integers(0, 4))
        if B == L == 0:
            B = 1
    K = int(rng.integers(1, 51)) if K is None else K
    c = n_configs(B, L)
    time = 10 ** rng.uniform(-1, 1, size=(c, K))
    energy = 10 ** rng.uniform(-1, 1, size=(c, K))
    phases = rng.integers(0, 4, size=K)
    counters = np.stack([rng.uniform(0, 2, (c, K)), rng.uniform(0, 0.1, (c, K)),
                         rng.uniform(0, 0.01, (c, K)), rng.uniform(0, 1, (c, K))], axis=-1)
    instr = rng.integers(10**8, 10**10, size=(c, K))
    return TraceSet(B, L, time, energy, instr, counters, phases, benchmark="random")


@pytest.fixture
def small_spec():
    return SyntheticSpec(
        K=12,
        phase_script=((0, 3, "CPUBound"), (3, 6, "IOBound"), (6, 9, "Blocked"), (9, 12, "Other")),
        n_big_max=2, n_little_max=2, seed=42,
    )


@pytest.fixture
def small_ts(small_spec):
    return generate_synthetic(small_spec)


@pytest.fixture
def two_by_two():
    # 2 configs x 2 segments: cfg0 times (1, 5), cfg1 times (4, 2)
    return make_trace_set(2, 0, [[1.0, 5.0], [4.0, 2.0]], energy=[[1.0, 1.5], [2.0, 1.0]])
