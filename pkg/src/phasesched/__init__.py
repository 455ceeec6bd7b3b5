"""Phase-aware configuration scheduling for asymmetric big/little multicores, driven by traces."""

from phasesched.core import (
    CounterKind,
    CounterReading,
    HardwareConfig,
    HardwarePhase,
    ProgramPhase,
    RewardParams,
    State,
    bucketize,
    decode_state,
    encode_state,
    enumerate_configs,
    hardware_phase,
    reward,
)
from phasesched.features import build_phase_map, classify_phase, extract_features, io_weight, parse_ir
from phasesched.qlearn import Agent, AgentParams, ExperienceTriple, forward, nn_init, select_action, train_step
from phasesched.report import compare
from phasesched.schedule import export_hybrid, export_static, replay_schedule
from phasesched.simulator import (
    Availability,
    RunResult,
    SimParams,
    best_fixed,
    chg,
    greedy_oracle,
    run_astro,
    run_fixed,
    run_random,
)
from phasesched.trace import SyntheticSpec, TraceSet, generate_synthetic, read_trace_set, write_trace_set

__version__ = "0.1.0"
