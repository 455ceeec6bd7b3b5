"""Command-line entry point: ``phasesched {mine,gen,run,compare,export}``.

Machine-readable output goes to stdout; logs go to stderr. Defaults can
be set in an INI file passed with ``--config``::

    [sim]
    switch_time_s = 0.05
    switch_energy_j = 0.05
    episodes = 50
    gamma = 2.0
    availability = 1.0

    [agent]
    learning_rate = 0.01
    discount = 0.9
    epsilon_initial = 1.0
    epsilon_decay = 0.995
    epsilon_floor = 0.05
    replay_capacity = 1000
    batch_size = 32
    hidden = 32

    [compare]
    energy_threshold = 10
    slowdown_threshold = 5
    baseline = best-fixed-time

Command-line flags override file values.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from phasesched import features, schedule
from phasesched.core import RewardParams
from phasesched.qlearn import Agent, AgentParams
from phasesched.report import compare
from phasesched.simulator import (
    RESULT_SCHEMA,
    Availability,
    RunResult,
    SimParams,
    best_fixed,
    greedy_oracle,
    run_astro,
    run_fixed,
    run_random,
)
from phasesched.trace import SyntheticSpec, generate_synthetic, read_trace_set, write_trace_set

log = logging.getLogger("phasesched")

POLICIES = ("astro", "oracle-time", "oracle-energy", "best-fixed-time",
            "best-fixed-energy", "random")
_FIXED = re.compile(r"fixed:(\d+)$")

_SIM_KEYS = {"switch_time_s": float, "switch_energy_j": float, "episodes": int,
             "gamma": float, "availability": float}
_AGENT_KEYS = {"learning_rate": float, "discount": float, "epsilon_initial": float,
               "epsilon_decay": float, "epsilon_floor": float, "replay_capacity": int,
               "batch_size": int, "hidden": str}


class CliError(Exception):
    pass


def _load_config(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    if path:
        if not cp.read(path, encoding="utf-8"):
            raise CliError(f"cannot read config file {path}")
    return cp


def _section(cp, name, keys) -> dict:
    out = {}
    if cp.has_section(name):
        for key, value in cp.items(name):
            if key not in keys:
                raise CliError(f"unknown key {key!r} in [{name}]")
            out[key] = keys[key](value)
    return out


def _params(args) -> tuple[AgentParams, SimParams]:
    cp = _load_config(args.config)
    sim = _section(cp, "sim", _SIM_KEYS)
    agent = _section(cp, "agent", _AGENT_KEYS)
    for key in _SIM_KEYS:
        if getattr(args, key, None) is not None:
            sim[key] = getattr(args, key)
    seed = args.seed if args.seed is not None else 0
    if "hidden" in agent:
        agent["hidden"] = tuple(int(h) for h in str(agent["hidden"]).replace(",", " ").split())
    agent_params = AgentParams(seed=seed, **agent)
    avail = sim.pop("availability", None)
    gamma = sim.pop("gamma", None)
    return agent_params, SimParams(
        seed=seed,
        reward=RewardParams(gamma=gamma) if gamma is not None else RewardParams(),
        availability=Availability(avail, seed) if avail is not None and avail < 1 else Availability(),
        **sim,
    )


def run_policy(ts, name: str, agent_params: AgentParams, sim_params: SimParams):
    """Run one named policy; returns (RunResult, Agent or None)."""
    m = _FIXED.match(name)
    if m:
        return run_fixed(ts, int(m.group(1)), sim_params), None
    if name == "astro":
        return run_astro(ts, agent_params, sim_params)
    if name.startswith("oracle-"):
        return greedy_oracle(ts, name.split("-", 1)[1], sim_params), None
    if name.startswith("best-fixed-"):
        cfg, res = best_fixed(ts, name.rsplit("-", 1)[1], sim_params)
        res.extra["config"] = cfg
        return res, None
    if name == "random":
        return run_random(ts, sim_params, sim_params.seed), None
    raise CliError(f"unknown policy {name!r}; valid: {', '.join(POLICIES)}, fixed:<id>")


def _run_job(job):
    ts, name, ap, sp = job
    return run_policy(ts, name, ap, sp)


def _file_stem(policy: str) -> str:
    return policy.replace(":", "-")


# -- subcommands ---------------------------------------------------------------

def cmd_mine(args) -> int:
    summaries = []
    for f in args.files:
        try:
            text = Path(f).read_text(encoding="utf-8")
        except OSError as exc:
            raise CliError(f"{f}: {exc.strerror}") from exc
        try:
            summaries.extend(features.parse_ir(text))
        except features.ParseError as exc:
            raise CliError(f"{f}: {exc}") from exc
    pm = features.build_phase_map(summaries)
    text = pm.dumps()
    if args.stdout or not args.output:
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text, encoding="utf-8")
        log.info("wrote phase map for %d functions to %s", len(pm.entries), args.output)
    return 0


def _spec_from_file(path: Path, seed, phase_map=None) -> SyntheticSpec:
    doc = json.loads(path.read_text(encoding="utf-8"))
    pm_name = doc.pop("phase_map", None)
    if "program" in doc:
        # phases derived from a mined phase map: [[function, n_segments], ...]
        if phase_map is None and pm_name is None:
            raise CliError(f"{path}: a program needs a phase map (spec key or --phase-map)")
        pm_path = Path(phase_map) if phase_map else path.parent / pm_name
        pm = features.PhaseMap.from_json(json.loads(pm_path.read_text(encoding="utf-8")))
        script, start = [], 0
        for fn, n in doc.pop("program"):
            if fn not in pm.entries:
                raise CliError(f"function {fn!r} not in phase map {pm_path}")
            script.append([start, start + int(n), pm.phase_of(fn).name])
            start += int(n)
        doc["phase_script"] = script
        doc.setdefault("K", start)
    if seed is not None:
        doc["seed"] = seed
    return SyntheticSpec.from_json(doc)


def cmd_gen(args) -> int:
    spec = _spec_from_file(Path(args.spec), args.seed, args.phase_map)
    ts = generate_synthetic(spec)
    write_trace_set(ts, args.out_dir, overwrite=args.overwrite)
    log.info("wrote %d configurations x %d segments to %s", ts.n_configs, ts.K, args.out_dir)
    return 0


def cmd_run(args) -> int:
    if bool(args.policy) == bool(args.all_policies):
        raise CliError("give exactly one of --policy or --all-policies")
    names = list(POLICIES) if args.all_policies else [args.policy]
    for n in names:
        if n not in POLICIES and not _FIXED.match(n):
            raise CliError(f"unknown policy {n!r}; valid: {', '.join(POLICIES)}, fixed:<id>")
    ts = read_trace_set(args.trace_dir)
    agent_params, sim_params = _params(args)
    jobs = [(ts, n, agent_params, sim_params) for n in names]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outputs = list(pool.map(_run_job, jobs))
    else:
        outputs = [_run_job(j) for j in jobs]
    out_dir = Path(args.output) if args.output else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    summaries = []
    for res, agent in outputs:
        log.info("%s: time %.4f s, energy %.4f J", res.policy, res.total_time_s, res.total_energy_j)
        summaries.append(res.summary())
        if out_dir:
            stem = _file_stem(res.policy)
            (out_dir / f"{stem}.json").write_text(res.summary_json(), encoding="utf-8")
            (out_dir / f"{stem}.csv").write_text(res.to_csv(), encoding="utf-8")
            if agent is not None:
                (out_dir / f"{stem}.agent.json").write_text(agent.dumps(), encoding="utf-8")
    if args.format == "csv":
        sys.stdout.write("policy,total_time_s,total_energy_j,total_instructions,switches\n")
        for s in summaries:
            sys.stdout.write(f"{s['policy']},{s['total_time_s']!r},{s['total_energy_j']!r},"
                             f"{s['total_instructions']},{s['switches']}\n")
    else:
        doc = summaries[0] if len(summaries) == 1 else summaries
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    return 0


def _load_results(paths) -> list[RunResult]:
    """Result summaries from files, or from every result JSON in a directory."""
    results = []
    for p in map(Path, paths):
        for f in (sorted(p.glob("*.json")) if p.is_dir() else [p]):
            doc = json.loads(f.read_text(encoding="utf-8"))
            if isinstance(doc, dict) and doc.get("schema") == RESULT_SCHEMA:
                results.append(RunResult.from_summary(doc))
            elif not p.is_dir():
                raise CliError(f"{f} is not a result summary")
    return results


def cmd_compare(args) -> int:
    cp = _load_config(args.config)
    sect = dict(cp.items("compare")) if cp.has_section("compare") else {}
    e = args.energy_threshold if args.energy_threshold is not None else float(sect.get("energy_threshold", 0))
    s = args.slowdown_threshold if args.slowdown_threshold is not None else float(sect.get("slowdown_threshold", 0))
    baseline = args.baseline or sect.get("baseline", "best-fixed-time")
    report = compare(_load_results(args.results), e, s, baseline)
    text = report.to_csv() if args.format == "csv" else report.dumps()
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_export(args) -> int:
    agent = Agent.loads(Path(args.agent).read_text(encoding="utf-8"))
    kinds = ("static", "hybrid") if args.kind == "both" else (args.kind,)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    ts = read_trace_set(args.replay) if args.replay else None
    _, sim_params = _params(args)
    summaries = []
    for kind in kinds:
        sched = schedule.export_static(agent) if kind == "static" else schedule.export_hybrid(agent)
        (out_dir / f"{kind}.schedule.json").write_text(schedule.dumps(sched), encoding="utf-8")
        if args.emit_pseudo:
            (out_dir / f"{kind}.schedule.c").write_text(schedule.emit_pseudo(sched), encoding="utf-8")
        if ts is not None:
            res = schedule.replay_schedule(ts, sched, sim_params)
            (out_dir / f"{res.policy}.json").write_text(res.summary_json(), encoding="utf-8")
            (out_dir / f"{res.policy}.csv").write_text(res.to_csv(), encoding="utf-8")
            summaries.append(res.summary())
    if summaries:
        sys.stdout.write(json.dumps(summaries, indent=2) + "\n")
    return 0


# -- argument parsing ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="seed for every stochastic component")
    common.add_argument("--config", default=None, help="INI file with default parameters")
    common.add_argument("--jobs", type=int, default=1, help="parallel simulations")
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="format", action="store_const", const="json", default="json")
    fmt.add_argument("--csv", dest="format", action="store_const", const="csv")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="phasesched", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine", parents=[common], help="classify functions of .sir files into phases")
    p.add_argument("files", nargs="+")
    p.add_argument("-o", "--output")
    p.add_argument("--stdout", action="store_true", help="print the phase map instead of writing it")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic trace set")
    p.add_argument("spec")
    p.add_argument("out_dir")
    p.add_argument("--overwrite", action="store_true")
    p.add_argument("--phase-map", help="phase map for a spec that lists a program")
    p.set_defaults(func=cmd_gen)

    sim_flags = argparse.ArgumentParser(add_help=False)
    sim_flags.add_argument("--switch-time", dest="switch_time_s", type=float)
    sim_flags.add_argument("--switch-energy", dest="switch_energy_j", type=float)
    sim_flags.add_argument("--episodes", type=int)
    sim_flags.add_argument("--gamma", type=float)
    sim_flags.add_argument("--availability", type=float,
                           help="probability that a configuration is available at a checkpoint")

    p = sub.add_parser("run", parents=[common, sim_flags], help="simulate policies on a trace set")
    p.add_argument("trace_dir")
    p.add_argument("--policy", help=f"one of {', '.join(POLICIES)}, fixed:<id>")
    p.add_argument("--all-policies", action="store_true")
    p.add_argument("-o", "--output", help="directory for per-policy CSV/JSON files")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", parents=[common], help="energy/slowdown report over results")
    p.add_argument("results", nargs="+", help="result JSON files or directories of them")
    p.add_argument("--energy-threshold", type=float, help="E: required energy saving, percent")
    p.add_argument("--slowdown-threshold", type=float, help="S: allowed slowdown, percent")
    p.add_argument("--baseline", help="policy used as the energy reference")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export", parents=[common, sim_flags], help="freeze an agent into schedules")
    p.add_argument("agent")
    p.add_argument("-o", "--output", default=".")
    p.add_argument("--kind", choices=("static", "hybrid", "both"), default="both")
    p.add_argument("--emit-pseudo", action="store_true", help="also write a C-like listing")
    p.add_argument("--replay", metavar="TRACE_DIR", help="replay the schedules on a trace set")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (CliError, ValueError, OSError) as exc:
        print(f"phasesched {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
