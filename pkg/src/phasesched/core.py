"""Domain types shared across the package.

Hardware configurations, program phases, counter discretization into
hardware phases, agent states and the performance-per-watt reward.

Configuration ids are dense and stable::

    id = n_little * (B + 1) + n_big - 1

so for a 1+1 topology the order is ``0L1B, 1L0B, 1L1B``.
"""

from __future__ import annotations

import bisect
import enum
import functools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class InvalidTopologyError(ValueError):
    pass


class InvalidCounterError(ValueError):
    pass


class InvalidIntervalError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class HardwareConfig:
    """A set of active cores, summarized as (big, LITTLE) counts."""

    id: int
    n_big: int
    n_little: int

    @property
    def label(self) -> str:
        # xLyB notation: x LITTLE cores, y big cores
        return f"{self.n_little}L{self.n_big}B"

    def __str__(self) -> str:
        return self.label


def config_id(n_big: int, n_little: int, n_big_max: int) -> int:
    return n_little * (n_big_max + 1) + n_big - 1


def enumerate_configs(n_big_max: int, n_little_max: int) -> list[HardwareConfig]:
    """All on/off core assignments except the one with every core off."""
    if n_big_max < 0 or n_little_max < 0:
        raise InvalidTopologyError(f"negative core count: ({n_big_max}, {n_little_max})")
    if n_big_max == 0 and n_little_max == 0:
        raise InvalidTopologyError("topology has no cores")
    configs = []
    for nl in range(n_little_max + 1):
        for nb in range(n_big_max + 1):
            if nb == 0 and nl == 0:
                continue
            configs.append(HardwareConfig(config_id(nb, nl, n_big_max), nb, nl))
    return configs


def n_configs(n_big_max: int, n_little_max: int) -> int:
    return (n_big_max + 1) * (n_little_max + 1) - 1


class ProgramPhase(enum.IntEnum):
    Blocked = 0
    IOBound = 1
    CPUBound = 2
    Other = 3

    @classmethod
    def parse(cls, name: str | int | ProgramPhase) -> ProgramPhase:
        if isinstance(name, cls):
            return name
        if isinstance(name, int):
            return cls(name)
        try:
            return cls[name]
        except KeyError:
            raise ValueError(f"unknown program phase {name!r}") from None


class CounterKind(enum.IntEnum):
    IPC = 0
    CMA = 1
    CMI = 2
    CPU = 3


# Upper edges of buckets 0 and 1; lower bounds inclusive.
BUCKET_EDGES: dict[CounterKind, tuple[float, float]] = {
    CounterKind.IPC: (0.5, 1.0),
    CounterKind.CMA: (0.01, 0.05),
    CounterKind.CMI: (0.001, 0.005),
    CounterKind.CPU: (0.20, 0.50),
}

N_BUCKETS = 3
N_HW_PHASES = N_BUCKETS ** len(CounterKind)


def _check_counter(value: float, what: str) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise InvalidCounterError(f"{what} must be finite and non-negative, got {value!r}")
    return value


def bucketize(kind: CounterKind, value: float) -> int:
    value = _check_counter(value, CounterKind(kind).name)
    return bisect.bisect_right(BUCKET_EDGES[CounterKind(kind)], value)


class CounterReading(NamedTuple):
    ipc: float
    cma: float
    cmi: float
    cpu: float

    def validate(self) -> CounterReading:
        for kind, value in zip(CounterKind, self):
            _check_counter(value, kind.name)
        if self.cpu > 1.0:
            raise InvalidCounterError(f"CPU utilization above 1: {self.cpu!r}")
        return self


@dataclass(frozen=True)
class HardwarePhase:
    """Bucket indices for (IPC, CMA, CMI, CPU), packed mixed-radix into 0..80."""

    buckets: tuple[int, int, int, int]

    def __post_init__(self):
        if len(self.buckets) != 4 or any(not 0 <= b < N_BUCKETS for b in self.buckets):
            raise ValueError(f"bad bucket tuple {self.buckets!r}")

    @property
    def index(self) -> int:
        b_ipc, b_cma, b_cmi, b_cpu = self.buckets
        return b_ipc * 27 + b_cma * 9 + b_cmi * 3 + b_cpu

    @classmethod
    def from_index(cls, index: int) -> HardwarePhase:
        if not 0 <= index < N_HW_PHASES:
            raise ValueError(f"hardware phase index out of range: {index}")
        return cls((index // 27, index // 9 % 3, index // 3 % 3, index % 3))


def hardware_phase(reading: CounterReading) -> HardwarePhase:
    return HardwarePhase(tuple(bucketize(kind, v) for kind, v in zip(CounterKind, reading)))


@dataclass(frozen=True)
class State:
    config: HardwareConfig
    prog_phase: ProgramPhase
    hw_phase: HardwarePhase


def n_states(n_cfg: int) -> int:
    return n_cfg * len(ProgramPhase) * N_HW_PHASES


@dataclass(frozen=True)
class RewardParams:
    gamma: float = 2.0
    watt_floor: float = 1e-3

    def __post_init__(self):
        if not self.gamma > 0 or not self.watt_floor > 0:
            raise ValueError("gamma and watt_floor must be positive")


def reward(energy_j: float, instructions: float, interval_s: float,
           params: RewardParams = RewardParams()) -> float:
    """MIPS**gamma / Watt over one interval.

    With gamma=2 maximizing this is minimizing energy*delay per instruction.
    """
    if not interval_s > 0:
        raise InvalidIntervalError(f"interval must be positive, got {interval_s!r}")
    if energy_j < 0 or instructions < 0:
        raise ValueError("energy and instructions must be non-negative")
    mips = instructions / interval_s / 1e6
    watts = max(energy_j / interval_s, params.watt_floor)
    return mips ** params.gamma / watts


STATE_FEATURES = len(ProgramPhase) + len(CounterKind) * N_BUCKETS


def encode_state(state: State, n_cfg: int) -> np.ndarray:
    """One-hot config, one-hot program phase, one-hot bucket per counter."""
    return encode_state_ids(state.config.id, int(state.prog_phase), state.hw_phase.index, n_cfg)


@functools.lru_cache(maxsize=65536)
def encode_state_ids(cfg: int, phase: int, hw_index: int, n_cfg: int) -> np.ndarray:
    """Read-only encoding of a state given as (config id, phase, hardware-phase index)."""
    x = np.zeros(n_cfg + STATE_FEATURES)
    x[cfg] = 1.0
    x[n_cfg + phase] = 1.0
    buckets = HardwarePhase.from_index(hw_index).buckets
    base = n_cfg + len(ProgramPhase)
    for k, b in enumerate(buckets):
        x[base + k * N_BUCKETS + b] = 1.0
    x.flags.writeable = False
    return x


def decode_state(x: np.ndarray, n_big_max: int, n_little_max: int) -> State:
    configs = enumerate_configs(n_big_max, n_little_max)
    n_cfg = len(configs)
    base = n_cfg + len(ProgramPhase)
    buckets = tuple(int(np.argmax(x[base + k * N_BUCKETS: base + (k + 1) * N_BUCKETS]))
                    for k in range(len(CounterKind)))
    return State(configs[int(np.argmax(x[:n_cfg]))],
                 ProgramPhase(int(np.argmax(x[n_cfg:base]))),
                 HardwarePhase(buckets))
