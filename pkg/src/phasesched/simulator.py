"""Trace-driven execution of scheduling policies.

Every policy walks the segments of a :class:`TraceSet` in order. At each
checkpoint it requests a configuration; :func:`chg` adopts it if available
and otherwise keeps the current one. Adopting a different configuration
costs the switch penalty, except at the first checkpoint where the initial
placement is free.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from phasesched.core import (
    HardwarePhase,
    ProgramPhase,
    RewardParams,
    State,
    enumerate_configs,
    reward,
)
from phasesched.qlearn import Agent, AgentParams, ExperienceTriple
from phasesched.trace import TraceSet

RESULT_SCHEMA = "phasesched.result/v1"
CSV_COLUMNS = (
    "segment", "config_before", "prog_phase", "hw_phase", "requested", "adopted",
    "explored", "time_s", "energy_j", "instructions", "penalty_time_s",
    "penalty_energy_j", "reward",
)
METRICS = ("time", "energy")


@dataclass(frozen=True)
class Availability:
    """Per-checkpoint availability of each configuration.

    ``probabilities=None`` means every configuration is always available.
    Otherwise configuration ``c`` is available at a checkpoint with
    probability ``probabilities[c]`` (or the same probability for all when a
    single number is given), drawn from a generator seeded by
    ``(seed, episode)``. The configuration currently running is always
    available.
    """

    probabilities: tuple[float, ...] | float | None = None
    seed: int = 0

    @classmethod
    def only(cls, ids, n_cfg: int) -> Availability:
        ids = set(ids)
        return cls(tuple(1.0 if c in ids else 0.0 for c in range(n_cfg)))

    @classmethod
    def excluding(cls, ids, n_cfg: int) -> Availability:
        ids = set(ids)
        return cls(tuple(0.0 if c in ids else 1.0 for c in range(n_cfg)))

    def masks(self, n_cfg: int, K: int, episode: int = 0) -> np.ndarray:
        if self.probabilities is None:
            return np.ones((K, n_cfg), dtype=bool)
        p = np.asarray(self.probabilities, dtype=float)
        if p.ndim == 0:
            p = np.full(n_cfg, float(p))
        if p.shape != (n_cfg,):
            raise ValueError(f"availability has {p.size} entries for {n_cfg} configurations")
        rng = np.random.default_rng([self.seed, episode])
        return rng.random((K, n_cfg)) < p


@dataclass(frozen=True)
class SimParams:
    switch_time_s: float = 0.050
    switch_energy_j: float = 0.05
    availability: Availability = Availability()
    episodes: int = 50
    seed: int = 0
    initial_config: int | None = None  # None: highest id available at the first checkpoint
    reward: RewardParams = RewardParams()
    greedy_final: bool = True  # last astro episode: epsilon 0, no training

    def __post_init__(self):
        for v in (self.switch_time_s, self.switch_energy_j):
            if not (math.isfinite(v) and v >= 0):
                raise ValueError("switch penalties must be finite and non-negative")
        if self.episodes < 1:
            raise ValueError("episodes must be at least 1")


@dataclass(frozen=True)
class Step:
    segment: int
    config_before: int
    prog_phase: int
    hw_phase: int
    requested: int
    adopted: int
    explored: bool
    time_s: float
    energy_j: float
    instructions: int
    penalty_time_s: float
    penalty_energy_j: float
    reward: float

    @property
    def state(self) -> tuple[int, int, int]:
        return self.config_before, self.prog_phase, self.hw_phase


@dataclass
class RunResult:
    policy: str
    seed: int | None
    total_time_s: float
    total_energy_j: float
    total_instructions: int
    steps: list[Step] = field(default_factory=list)
    trace_digest: str = ""
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_steps(cls, policy: str, steps: list[Step], seed=None, trace_digest="", **extra):
        return cls(
            policy=policy,
            seed=seed,
            total_time_s=math.fsum([s.time_s for s in steps] + [s.penalty_time_s for s in steps]),
            total_energy_j=math.fsum([s.energy_j for s in steps] + [s.penalty_energy_j for s in steps]),
            total_instructions=sum(s.instructions for s in steps),
            steps=steps,
            trace_digest=trace_digest,
            extra=extra,
        )

    @property
    def adopted(self) -> list[int]:
        return [s.adopted for s in self.steps]

    @property
    def switches(self) -> int:
        return sum(1 for s in self.steps if s.segment > 0 and s.adopted != s.config_before)

    def metric(self, name: str) -> float:
        return {"time": self.total_time_s, "energy": self.total_energy_j}[name]

    def summary(self) -> dict:
        return {
            "schema": RESULT_SCHEMA,
            "policy": self.policy,
            "seed": self.seed,
            "trace_digest": self.trace_digest,
            "total_time_s": self.total_time_s,
            "total_energy_j": self.total_energy_j,
            "total_instructions": self.total_instructions,
            "n_checkpoints": len(self.steps),
            "switches": self.switches,
            "extra": self.extra,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for s in self.steps:
            row = asdict(s)
            row["prog_phase"] = ProgramPhase(s.prog_phase).name
            row["explored"] = int(s.explored)
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in CSV_COLUMNS])
        return buf.getvalue()

    @classmethod
    def from_summary(cls, doc: dict) -> RunResult:
        if doc.get("schema") != RESULT_SCHEMA:
            raise ValueError(f"not a result summary (schema {doc.get('schema')!r})")
        return cls(doc["policy"], doc.get("seed"), doc["total_time_s"], doc["total_energy_j"],
                   doc["total_instructions"], [], doc.get("trace_digest", ""), doc.get("extra", {}))


def chg(requested: int, current: int, available=None) -> int:
    """Adopt ``requested`` if it is available, else stay in ``current``."""
    if requested == current or available is None or available[requested]:
        return requested
    return current


class _Episode:
    """Bookkeeping shared by every policy for one pass over the segments."""

    def __init__(self, ts: TraceSet, params: SimParams, episode: int = 0):
        self.ts = ts
        self.params = params
        self.masks = params.availability.masks(ts.n_configs, ts.K, episode)
        init = params.initial_config
        if init is None:
            init = int(np.flatnonzero(self.masks[0])[-1]) if self.masks[0].any() else ts.n_configs - 1
        if not 0 <= init < ts.n_configs:
            raise ValueError(f"invalid initial configuration {init}")
        self.current = init
        self.steps: list[Step] = []

    def available(self, i: int) -> np.ndarray:
        mask = self.masks[i].copy()
        mask[self.current] = True
        return mask

    def observe(self, i: int) -> tuple[int, int, int]:
        return self.current, int(self.ts.phases[i]), int(self.ts.hw_phases[self.current, i])

    def advance(self, i: int, requested: int, explored: bool = False) -> Step:
        ts, p = self.ts, self.params
        if not 0 <= requested < ts.n_configs:
            raise ValueError(f"invalid configuration id {requested}")
        before, phase, hw = self.observe(i)
        adopted = chg(requested, before, self.available(i))
        switched = i > 0 and adopted != before
        t = float(ts.time_s[adopted, i])
        e = float(ts.energy_j[adopted, i])
        n = int(ts.instructions[adopted, i])
        step = Step(
            segment=i, config_before=before, prog_phase=phase, hw_phase=hw,
            requested=requested, adopted=adopted, explored=explored,
            time_s=t, energy_j=e, instructions=n,
            penalty_time_s=p.switch_time_s if switched else 0.0,
            penalty_energy_j=p.switch_energy_j if switched else 0.0,
            reward=reward(e, n, t, p.reward),
        )
        self.steps.append(step)
        self.current = adopted
        return step


def _check_config(ts: TraceSet, cfg: int) -> int:
    if not isinstance(cfg, (int, np.integer)) or not 0 <= cfg < ts.n_configs:
        raise ValueError(f"invalid configuration id {cfg!r} (topology has {ts.n_configs})")
    return int(cfg)


def run_fixed(ts: TraceSet, config_id: int, params: SimParams = SimParams()) -> RunResult:
    """Stay in one configuration for the whole run; availability is ignored."""
    cfg = _check_config(ts, config_id)
    ep = _Episode(ts, replace(params, availability=Availability(), initial_config=cfg))
    for i in range(ts.K):
        ep.advance(i, cfg)
    return RunResult.from_steps(f"fixed:{cfg}", ep.steps, None, ts.digest(), config=cfg)


def best_fixed(ts: TraceSet, metric: str = "time", params: SimParams = SimParams()):
    """The single configuration minimizing ``metric``; ties go to the lowest id."""
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    runs = [run_fixed(ts, c, params) for c in range(ts.n_configs)]
    best = min(range(len(runs)), key=lambda c: (runs[c].metric(metric), c))
    res = runs[best]
    res.policy = f"best-fixed-{metric}"
    return best, res


def greedy_oracle(ts: TraceSet, metric: str = "time", params: SimParams = SimParams()) -> RunResult:
    """Per checkpoint, the configuration with the lowest metric plus switch cost."""
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    cost = ts.time_s if metric == "time" else ts.energy_j
    penalty = params.switch_time_s if metric == "time" else params.switch_energy_j
    ep = _Episode(ts, params)
    for i in range(ts.K):
        c = cost[:, i].copy()
        if i > 0:
            c += penalty
            c[ep.current] -= penalty
        c[~ep.available(i)] = np.inf
        ep.advance(i, int(np.argmin(c)))
    return RunResult.from_steps(f"oracle-{metric}", ep.steps, None, ts.digest())


def run_random(ts: TraceSet, params: SimParams = SimParams(), seed: int | None = None) -> RunResult:
    seed = params.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    ep = _Episode(ts, params)
    for i in range(ts.K):
        ids = np.flatnonzero(ep.available(i))
        ep.advance(i, int(ids[rng.integers(ids.size)]), explored=True)
    return RunResult.from_steps("random", ep.steps, seed, ts.digest())


def _state(ts: TraceSet, configs, obs) -> State:
    cfg, phase, hw = obs
    return State(configs[cfg], ProgramPhase(phase), HardwarePhase.from_index(hw))


def run_astro(ts: TraceSet, agent_params: AgentParams = AgentParams(),
              sim_params: SimParams = SimParams(), agent: Agent | None = None):
    """Monitor, learn and adapt over ``sim_params.episodes`` passes of the trace.

    Returns the RunResult of the final episode and the trained agent. With
    ``greedy_final`` the last episode is an evaluation pass: epsilon is 0 and
    the network is frozen. An existing ``agent`` may be passed in to
    continue training.
    """
    if agent is None:
        agent = Agent(ts.n_big_max, ts.n_little_max, agent_params)
    elif agent.n_configs != ts.n_configs:
        raise ValueError("agent topology does not match the trace set")
    configs = enumerate_configs(ts.n_big_max, ts.n_little_max)
    episodes = sim_params.episodes
    evaluate_last = sim_params.greedy_final and episodes > 1
    ep = None
    for e in range(episodes):
        learn = not (evaluate_last and e == episodes - 1)
        ep = _Episode(ts, sim_params, e)
        prev: tuple[State, int, float] | None = None
        for i in range(ts.K):
            state = _state(ts, configs, ep.observe(i))
            if learn and prev is not None:
                agent.observe(ExperienceTriple(prev[0], prev[1], prev[2], state))
            action, explored = agent.act(state, ep.available(i), greedy=not learn)
            step = ep.advance(i, action, explored)
            prev = (state, step.adopted, step.reward)
            if learn:
                agent.decay_epsilon()
        if learn:
            agent.observe(ExperienceTriple(prev[0], prev[1], prev[2], None))
    res = RunResult.from_steps("astro", ep.steps, agent.params.seed, ts.digest(),
                               episodes=episodes, final_greedy=evaluate_last)
    return res, agent
