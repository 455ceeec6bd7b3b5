"""Classify the functions of a small IR program into program phases."""

from pathlib import Path

import phasesched
from phasesched.features import build_phase_map, extract_features, parse_ir

src = (Path(phasesched.__file__).parent / "data" / "matmul.sir").read_text()

# %% one summary per function, in source order
summaries = parse_ir(src)
for s in summaries:
    print(f"{s.name:14s} instr={s.total_instr:3d} io_calls={list(s.io_calls)} nest={s.max_loop_nest}")

# %% densities and the phase each function lands in
pm = build_phase_map(summaries)
for s in summaries:
    f = extract_features(s)
    print(f"{s.name:14s} mem={f.mem_dens:.2f} int+fp={f.int_dens + f.fp_dens:.2f} "
          f"locks={f.locks_dens:.2f} -> {pm.phase_of(s.name).name}")

# %% where a run-time scheduler would be called
for point in pm.instrumentation:
    print(point)
