"""Freeze a trained agent into lookup tables and replay them on traces.

A static schedule maps each program phase to one configuration. A hybrid
schedule additionally keys on the hardware phase observed at run time.
Both are extracted with a self-consistent rule: candidate ``c`` is scored
by the agent's Q-value for action ``c`` in a state whose current
configuration is ``c`` itself, i.e. how good it is to be in ``c`` and stay
there. Ties go to the lowest id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from phasesched.core import (
    N_HW_PHASES,
    HardwareConfig,
    ProgramPhase,
    enumerate_configs,
    encode_state_ids,
)
from phasesched.qlearn import Agent, forward
from phasesched.simulator import RunResult, SimParams, _Episode
from phasesched.trace import TraceSet

SCHEDULE_SCHEMA = "phasesched.schedule/v1"


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class StaticSchedule:
    n_big_max: int
    n_little_max: int
    table: tuple[int, ...]  # indexed by ProgramPhase

    kind = "static"

    def __post_init__(self):
        _check_table(self, (len(ProgramPhase),))

    def lookup(self, phase: int, hw_phase: int | None = None) -> int:
        return self.table[phase]

    def to_json(self) -> dict:
        configs = enumerate_configs(self.n_big_max, self.n_little_max)
        return {
            "schema": SCHEDULE_SCHEMA,
            "kind": "static",
            "topology": {"B": self.n_big_max, "L": self.n_little_max},
            "entries": {ph.name: _entry(configs[self.table[ph]]) for ph in ProgramPhase},
        }


@dataclass(frozen=True)
class HybridSchedule:
    n_big_max: int
    n_little_max: int
    table: tuple[tuple[int, ...], ...]  # [ProgramPhase][hardware phase index]

    kind = "hybrid"

    def __post_init__(self):
        _check_table(self, (len(ProgramPhase), N_HW_PHASES))

    def lookup(self, phase: int, hw_phase: int | None = None) -> int:
        return self.table[phase][hw_phase]

    def to_json(self) -> dict:
        configs = enumerate_configs(self.n_big_max, self.n_little_max)
        return {
            "schema": SCHEDULE_SCHEMA,
            "kind": "hybrid",
            "topology": {"B": self.n_big_max, "L": self.n_little_max},
            "entries": {
                ph.name: [{"hw_phase": h, **_entry(configs[self.table[ph][h]])}
                          for h in range(N_HW_PHASES)]
                for ph in ProgramPhase
            },
        }


def _entry(cfg: HardwareConfig) -> dict:
    return {"config": cfg.id, "n_big": cfg.n_big, "n_little": cfg.n_little, "label": cfg.label}


def _check_table(sched, shape):
    arr = np.asarray(sched.table)
    if arr.shape != shape:
        raise ScheduleError(f"{sched.kind} table has shape {arr.shape}, expected {shape}")
    n = (sched.n_big_max + 1) * (sched.n_little_max + 1) - 1
    if arr.min() < 0 or arr.max() >= n:
        raise ScheduleError(f"{sched.kind} table holds configuration ids outside 0..{n - 1}")


def schedule_from_json(doc: dict):
    if doc.get("schema") != SCHEDULE_SCHEMA:
        raise ScheduleError(f"not a schedule document (schema {doc.get('schema')!r})")
    b, l = doc["topology"]["B"], doc["topology"]["L"]
    entries = doc["entries"]
    try:
        if doc["kind"] == "static":
            return StaticSchedule(b, l, tuple(entries[ph.name]["config"] for ph in ProgramPhase))
        if doc["kind"] == "hybrid":
            rows = []
            for ph in ProgramPhase:
                cells = sorted(entries[ph.name], key=lambda e: e["hw_phase"])
                rows.append(tuple(e["config"] for e in cells))
            return HybridSchedule(b, l, tuple(rows))
    except KeyError as exc:
        raise ScheduleError(f"schedule lacks entry {exc}") from None
    raise ScheduleError(f"unknown schedule kind {doc['kind']!r}")


def _self_scores(agent: Agent) -> np.ndarray:
    """scores[phase, hw, c] = Q(state(current=c, phase, hw))[c]."""
    n = agent.n_configs
    x = np.stack([encode_state_ids(c, ph, h, n)
                  for ph in range(len(ProgramPhase))
                  for h in range(N_HW_PHASES)
                  for c in range(n)])
    q = forward(agent.net, x).reshape(len(ProgramPhase), N_HW_PHASES, n, n)
    idx = np.arange(n)
    return q[:, :, idx, idx]


def export_static(agent: Agent) -> StaticSchedule:
    scores = _self_scores(agent).mean(axis=1)
    return StaticSchedule(agent.n_big_max, agent.n_little_max,
                          tuple(int(np.argmax(scores[ph])) for ph in range(len(ProgramPhase))))


def export_hybrid(agent: Agent) -> HybridSchedule:
    best = np.argmax(_self_scores(agent), axis=2)
    return HybridSchedule(agent.n_big_max, agent.n_little_max,
                          tuple(tuple(int(c) for c in row) for row in best))


def replay_schedule(ts: TraceSet, schedule, params: SimParams = SimParams()) -> RunResult:
    """Drive a run from a frozen table; the learning engine is not consulted."""
    if (schedule.n_big_max, schedule.n_little_max) != (ts.n_big_max, ts.n_little_max):
        raise ScheduleError("schedule topology does not match the trace set")
    ep = _Episode(ts, params)
    for i in range(ts.K):
        _, phase, hw = ep.observe(i)
        ep.advance(i, schedule.lookup(phase, hw))
    return RunResult.from_steps(f"replay-{schedule.kind}", ep.steps, None, ts.digest())


def dumps(schedule) -> str:
    return json.dumps(schedule.to_json(), indent=1) + "\n"


def emit_pseudo(schedule) -> str:
    """C-like listing of the table lookup inserted at phase boundaries."""
    configs = enumerate_configs(schedule.n_big_max, schedule.n_little_max)
    out = [f"/* {schedule.kind} schedule, {len(configs)} configurations */"]
    if isinstance(schedule, StaticSchedule):
        out += ["void determine_active_configuration(int phase) {",
                "    switch (phase) {"]
        for ph in ProgramPhase:
            c = configs[schedule.table[ph]]
            out.append(f"    case PHASE_{ph.name.upper()}: set_configuration({c.id}); break;"
                       f"  /* {c.label} */")
        out += ["    }", "}"]
    else:
        out.append(f"static const int SCHEDULE[{len(ProgramPhase)}][{N_HW_PHASES}] = {{")
        for ph in ProgramPhase:
            row = ", ".join(str(c) for c in schedule.table[ph])
            out.append(f"    /* {ph.name} */ {{{row}}},")
        out += ["};",
                "",
                "void determine_active_configuration(int phase) {",
                "    int hw = read_hardware_phase();  /* 27*ipc + 9*cma + 3*cmi + cpu */",
                "    set_configuration(SCHEDULE[phase][hw]);",
                "}"]
    out += ["", "/* " + ", ".join(f"{c.id}={c.label}" for c in configs) + " */"]
    return "\n".join(out) + "\n"

