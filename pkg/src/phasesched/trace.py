"""Per-configuration execution traces.

A trace set holds, for every hardware configuration, one record per
equal-work progress segment: how long the segment took on that
configuration, the energy it used, the instructions retired, the counter
readings and the program phase. Choosing configuration ``c`` at checkpoint
``i`` consumes record ``i`` of trace ``c``.

On disk a trace set is a directory::

    manifest.json        {"format_version", "benchmark", "B", "L", "K", "period_s", "seed", ...}
    config_<id>.jsonl    one record per line:
                         {"seg","time_s","energy_j","instr","ipc","cma","cmi","cpu","phase"}

Floats are written with ``repr`` (shortest round-trip form), keys in the
order above, no spaces, ``\\n`` line endings.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from phasesched.core import (
    CounterReading,
    HardwareConfig,
    InvalidCounterError,
    N_BUCKETS,
    ProgramPhase,
    enumerate_configs,
    n_configs,
)

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
RECORD_KEYS = ("seg", "time_s", "energy_j", "instr", "ipc", "cma", "cmi", "cpu", "phase")

# Bucket edges as an array, for vectorized hardware-phase computation.
_EDGES = np.array([(0.5, 1.0), (0.01, 0.05), (0.001, 0.005), (0.20, 0.50)])
_RADIX = np.array([27, 9, 3, 1])


class TraceFormatError(ValueError):
    pass


class MissingConfigError(TraceFormatError):
    pass


class PhaseConsistencyError(TraceFormatError):
    pass


class PhaseScriptError(ValueError):
    pass


def config_filename(cfg: int) -> str:
    return f"config_{cfg}.jsonl"


@dataclass(frozen=True)
class CheckpointRecord:
    segment: int
    time_s: float
    energy_j: float
    instructions: int
    counters: CounterReading
    prog_phase: ProgramPhase


@dataclass(eq=False)
class TraceSet:
    """Aligned traces for every configuration of a (B, L) topology.

    Arrays are indexed ``[config_id, segment]``; ``counters`` has a trailing
    axis in (ipc, cma, cmi, cpu) order.
    """

    n_big_max: int
    n_little_max: int
    time_s: np.ndarray
    energy_j: np.ndarray
    instructions: np.ndarray
    counters: np.ndarray
    phases: np.ndarray
    period_s: float = 0.5
    benchmark: str = "synthetic"
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.time_s = np.asarray(self.time_s, dtype=float)
        self.energy_j = np.asarray(self.energy_j, dtype=float)
        self.instructions = np.asarray(self.instructions, dtype=np.int64)
        self.counters = np.asarray(self.counters, dtype=float)
        self.phases = np.asarray(self.phases, dtype=np.int64)
        self.validate()
        self.hw_phases = self._hw_phases()
        self._digest = None

    @property
    def n_configs(self) -> int:
        return n_configs(self.n_big_max, self.n_little_max)

    @property
    def K(self) -> int:
        return int(self.phases.shape[0])

    @property
    def configs(self) -> list[HardwareConfig]:
        return enumerate_configs(self.n_big_max, self.n_little_max)

    def validate(self) -> None:
        c, k = self.n_configs, self.phases.shape[0]
        if k < 1:
            raise TraceFormatError("trace set has no segments")
        for name in ("time_s", "energy_j", "instructions"):
            if getattr(self, name).shape != (c, k):
                raise TraceFormatError(f"{name} has shape {getattr(self, name).shape}, expected {(c, k)}")
        if self.counters.shape != (c, k, 4):
            raise TraceFormatError(f"counters has shape {self.counters.shape}, expected {(c, k, 4)}")
        if not (np.all(np.isfinite(self.time_s)) and np.all(self.time_s > 0)):
            raise TraceFormatError("segment times must be finite and positive")
        if not (np.all(np.isfinite(self.energy_j)) and np.all(self.energy_j >= 0)):
            raise TraceFormatError("segment energies must be finite and non-negative")
        if not np.all(self.instructions > 0):
            raise TraceFormatError("instruction counts must be positive")
        if not (np.all(np.isfinite(self.counters)) and np.all(self.counters >= 0)):
            raise InvalidCounterError("counters must be finite and non-negative")
        if np.any(self.counters[..., 3] > 1):
            raise InvalidCounterError("CPU utilization above 1")
        if np.any((self.phases < 0) | (self.phases >= len(ProgramPhase))):
            raise TraceFormatError("phase index out of range")

    def _hw_phases(self) -> np.ndarray:
        buckets = np.empty(self.counters.shape, dtype=np.int64)
        for k in range(4):
            buckets[..., k] = np.searchsorted(_EDGES[k], self.counters[..., k], side="right")
        assert buckets.max(initial=0) < N_BUCKETS
        return buckets @ _RADIX

    def record(self, cfg: int, seg: int) -> CheckpointRecord:
        return CheckpointRecord(
            segment=seg,
            time_s=float(self.time_s[cfg, seg]),
            energy_j=float(self.energy_j[cfg, seg]),
            instructions=int(self.instructions[cfg, seg]),
            counters=CounterReading(*(float(v) for v in self.counters[cfg, seg])),
            prog_phase=ProgramPhase(int(self.phases[seg])),
        )

    def records(self, cfg: int) -> list[CheckpointRecord]:
        return [self.record(cfg, i) for i in range(self.K)]

    @classmethod
    def from_records(cls, n_big_max: int, n_little_max: int,
                     traces: dict[int, list[CheckpointRecord]], **kw) -> TraceSet:
        c = n_configs(n_big_max, n_little_max)
        for cfg in range(c):
            if cfg not in traces:
                raise MissingConfigError(f"missing trace for config {cfg}")
        k = len(traces[0])
        for cfg in range(c):
            recs = traces[cfg]
            if len(recs) != k:
                raise TraceFormatError(f"config {cfg} has {len(recs)} segments, expected {k}")
            for i, r in enumerate(recs):
                if r.segment != i:
                    raise TraceFormatError(f"config {cfg}: segment {r.segment} at position {i}")
                if r.prog_phase != traces[0][i].prog_phase:
                    raise PhaseConsistencyError(
                        f"segment {i}: config {cfg} has phase {r.prog_phase.name}, "
                        f"config 0 has {traces[0][i].prog_phase.name}")
        return cls(
            n_big_max, n_little_max,
            time_s=[[r.time_s for r in traces[g]] for g in range(c)],
            energy_j=[[r.energy_j for r in traces[g]] for g in range(c)],
            instructions=[[r.instructions for r in traces[g]] for g in range(c)],
            counters=[[list(r.counters) for r in traces[g]] for g in range(c)],
            phases=[int(r.prog_phase) for r in traces[0]],
            **kw,
        )

    def manifest(self) -> dict:
        doc = {
            "format_version": FORMAT_VERSION,
            "benchmark": self.benchmark,
            "B": self.n_big_max,
            "L": self.n_little_max,
            "K": self.K,
            "period_s": self.period_s,
        }
        if self.seed is not None:
            doc["seed"] = self.seed
        doc.update(self.meta)
        return doc

    def manifest_text(self) -> str:
        return json.dumps(self.manifest(), indent=2) + "\n"

    def config_text(self, cfg: int) -> str:
        lines = []
        for i in range(self.K):
            ipc, cma, cmi, cpu = (float(v) for v in self.counters[cfg, i])
            rec = {
                "seg": i,
                "time_s": float(self.time_s[cfg, i]),
                "energy_j": float(self.energy_j[cfg, i]),
                "instr": int(self.instructions[cfg, i]),
                "ipc": ipc, "cma": cma, "cmi": cmi, "cpu": cpu,
                "phase": ProgramPhase(int(self.phases[i])).name,
            }
            lines.append(json.dumps(rec, separators=(",", ":")))
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        """SHA-256 over the canonical on-disk form."""
        if self._digest is None:
            h = hashlib.sha256(self.manifest_text().encode())
            for cfg in range(self.n_configs):
                h.update(self.config_text(cfg).encode())
            self._digest = h.hexdigest()
        return self._digest

    def __eq__(self, other):
        if not isinstance(other, TraceSet):
            return NotImplemented
        return (self.manifest() == other.manifest()
                and all(np.array_equal(getattr(self, a), getattr(other, a))
                        for a in ("time_s", "energy_j", "instructions", "counters", "phases")))


def write_trace_set(ts: TraceSet, path, overwrite: bool = False) -> Path:
    path = Path(path)
    if path.exists():
        if not path.is_dir():
            raise FileExistsError(f"{path} exists and is not a directory")
        if any(path.iterdir()):
            if not overwrite:
                raise FileExistsError(f"{path} is not empty; pass overwrite=True to replace it")
            for old in path.glob("config_*.jsonl"):
                old.unlink()
            (path / MANIFEST).unlink(missing_ok=True)
    path.mkdir(parents=True, exist_ok=True)
    (path / MANIFEST).write_text(ts.manifest_text(), encoding="utf-8")
    for cfg in range(ts.n_configs):
        (path / config_filename(cfg)).write_text(ts.config_text(cfg), encoding="utf-8")
    return path


def _parse_record(line: str, where: str) -> CheckpointRecord:
    try:
        d = json.loads(line)
        if not isinstance(d, dict) or set(d) != set(RECORD_KEYS):
            raise TraceFormatError(f"{where}: expected keys {RECORD_KEYS}")
        if not isinstance(d["instr"], int) or not isinstance(d["seg"], int):
            raise TraceFormatError(f"{where}: seg and instr must be integers")
        return CheckpointRecord(
            segment=d["seg"],
            time_s=float(d["time_s"]),
            energy_j=float(d["energy_j"]),
            instructions=d["instr"],
            counters=CounterReading(float(d["ipc"]), float(d["cma"]), float(d["cmi"]), float(d["cpu"])),
            prog_phase=ProgramPhase.parse(d["phase"]),
        )
    except TraceFormatError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise TraceFormatError(f"{where}: malformed record ({exc})") from exc


def read_trace_set(path) -> TraceSet:
    path = Path(path)
    try:
        manifest = json.loads((path / MANIFEST).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise TraceFormatError(f"{path}: no {MANIFEST}") from None
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"{path / MANIFEST}: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise TraceFormatError(f"unsupported format_version {manifest.get('format_version')!r}")
    manifest = dict(manifest)
    try:
        b, l, k = manifest.pop("B"), manifest.pop("L"), manifest.pop("K")
    except KeyError as exc:
        raise TraceFormatError(f"manifest lacks {exc}") from None
    traces = {}
    for cfg in range(n_configs(b, l)):
        f = path / config_filename(cfg)
        if not f.exists():
            raise MissingConfigError(f"missing trace file for config {cfg} ({f.name})")
        lines = [ln for ln in f.read_text(encoding="utf-8").splitlines() if ln.strip()]
        traces[cfg] = [_parse_record(ln, f"{f.name}:{n}") for n, ln in enumerate(lines, 1)]
        if len(traces[cfg]) != k:
            raise TraceFormatError(f"{f.name} has {len(traces[cfg])} records, manifest says K={k}")
    manifest.pop("format_version")
    return TraceSet.from_records(
        b, l, traces,
        period_s=manifest.pop("period_s", 0.5),
        benchmark=manifest.pop("benchmark", "unknown"),
        seed=manifest.pop("seed", None),
        meta=manifest,
    )


# -- synthetic generation ----------------------------------------------------

BIG_HZ = 2.0e9
LITTLE_HZ = 1.4e9

SCALING_LAW = (
    "time = time_s * ((1+B)/(1+b))**time_big_exp * ((1+L)/(1+l))**time_little_exp; "
    "energy = energy_j * ((1+b)/(1+B))**energy_big_exp * ((1+l)/(1+L))**energy_little_exp; "
    "each multiplied by exp(noise*N(0,1)); (b, l) active cores, (B, L) topology; "
    "ipc = instr / (time * (b*2.0e9 + l*1.4e9) * cpu)"
)


@dataclass(frozen=True)
class PhaseModel:
    """Segment cost of one program phase, relative to the all-cores config."""

    time_s: float
    energy_j: float
    instructions: int
    time_big_exp: float
    time_little_exp: float
    energy_big_exp: float
    energy_little_exp: float
    cma: float
    cmi: float
    cpu: float

    def __post_init__(self):
        if not (self.time_s > 0 and self.energy_j >= 0 and self.instructions > 0):
            raise ValueError("phase model needs positive time and instructions")
        if not (self.cma >= 0 and self.cmi >= 0 and 0 < self.cpu <= 1):
            raise ValueError("phase model counters out of range")


DEFAULT_MODELS: dict[ProgramPhase, PhaseModel] = {
    ProgramPhase.CPUBound: PhaseModel(1.0, 2.0, 12_000_000_000, 0.8, 0.3, 0.35, 0.10, 0.02, 0.002, 0.9),
    ProgramPhase.IOBound: PhaseModel(0.6, 0.6, 1_000_000_000, 0.0, 0.0, 0.15, 0.05, 0.06, 0.006, 0.3),
    ProgramPhase.Blocked: PhaseModel(0.4, 0.2, 100_000_000, 0.0, 0.0, 0.02, 0.01, 0.005, 0.0005, 0.1),
    ProgramPhase.Other: PhaseModel(0.8, 1.0, 4_000_000_000, 0.3, 0.1, 0.2, 0.05, 0.03, 0.003, 0.5),
}


@dataclass(frozen=True)
class SyntheticSpec:
    K: int
    phase_script: tuple  # ((start, stop, ProgramPhase), ...), stop exclusive
    n_big_max: int = 4
    n_little_max: int = 4
    models: dict = field(default_factory=lambda: dict(DEFAULT_MODELS))
    noise: float = 0.05
    seed: int = 0
    period_s: float = 0.5
    benchmark: str = "synthetic"
    fixed_instructions: bool = True  # instruction counts identical across configs

    def phase_array(self) -> np.ndarray:
        if self.K < 1:
            raise PhaseScriptError("K must be positive")
        phases = np.full(self.K, -1, dtype=np.int64)
        for start, stop, ph in self.phase_script:
            if not 0 <= start < stop <= self.K:
                raise PhaseScriptError(f"range [{start}, {stop}) outside 0..{self.K}")
            if np.any(phases[start:stop] >= 0):
                raise PhaseScriptError(f"range [{start}, {stop}) overlaps an earlier range")
            phases[start:stop] = int(ProgramPhase.parse(ph))
        gaps = np.flatnonzero(phases < 0)
        if gaps.size:
            raise PhaseScriptError(f"phase script leaves segments uncovered, first {int(gaps[0])}")
        return phases

    @classmethod
    def from_json(cls, doc: dict) -> SyntheticSpec:
        doc = dict(doc)
        script = tuple((int(a), int(b), ProgramPhase.parse(p)) for a, b, p in doc.pop("phase_script"))
        models = dict(DEFAULT_MODELS)
        for name, m in doc.pop("models", {}).items():
            ph = ProgramPhase.parse(name)
            models[ph] = PhaseModel(**{**asdict(models[ph]), **m})
        b = doc.pop("B", 4)
        l = doc.pop("L", 4)
        return cls(phase_script=script, models=models, n_big_max=b, n_little_max=l, **doc)


def generate_synthetic(spec: SyntheticSpec) -> TraceSet:
    phases = spec.phase_array()
    configs = enumerate_configs(spec.n_big_max, spec.n_little_max)
    rng = np.random.default_rng(spec.seed)
    c, k = len(configs), spec.K
    B, L = spec.n_big_max, spec.n_little_max
    time = np.empty((c, k))
    energy = np.empty((c, k))
    instr = np.empty((c, k), dtype=np.int64)
    counters = np.empty((c, k, 4))
    for i in range(k):
        m = spec.models[ProgramPhase(int(phases[i]))]
        base_instr = m.instructions
        for cfg in configs:
            nb, nl = cfg.n_big, cfg.n_little
            t = (m.time_s * ((1 + B) / (1 + nb)) ** m.time_big_exp
                 * ((1 + L) / (1 + nl)) ** m.time_little_exp)
            e = (m.energy_j * ((1 + nb) / (1 + B)) ** m.energy_big_exp
                 * ((1 + nl) / (1 + L)) ** m.energy_little_exp)
            z = rng.standard_normal(6)
            t *= math.exp(spec.noise * z[0])
            e *= math.exp(spec.noise * z[1])
            n_instr = base_instr
            if not spec.fixed_instructions:
                n_instr = max(1, int(round(base_instr * math.exp(spec.noise * z[2]))))
            cma = m.cma * math.exp(spec.noise * z[3])
            cmi = m.cmi * math.exp(spec.noise * z[4])
            cpu = min(1.0, m.cpu * math.exp(spec.noise * z[5]))
            hz = nb * BIG_HZ + nl * LITTLE_HZ
            time[cfg.id, i] = t
            energy[cfg.id, i] = e
            instr[cfg.id, i] = n_instr
            counters[cfg.id, i] = (n_instr / (t * hz * cpu), cma, cmi, cpu)
    meta = {"generator": {
        "law": SCALING_LAW,
        "noise": spec.noise,
        "fixed_instructions": spec.fixed_instructions,
        "models": {ph.name: asdict(spec.models[ph]) for ph in ProgramPhase if ph in spec.models},
    }}
    return TraceSet(B, L, time, energy, instr, counters, phases,
                    period_s=spec.period_s, benchmark=spec.benchmark, seed=spec.seed, meta=meta)
