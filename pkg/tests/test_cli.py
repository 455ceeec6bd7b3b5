import json
import subprocess
import sys
from pathlib import Path

import pytest

import phasesched
from phasesched.cli import main
from phasesched.qlearn import Agent
from phasesched.trace import read_trace_set, write_trace_set

DATA = Path(phasesched.__file__).parent / "data"

SPEC = {
    "benchmark": "tiny", "B": 1, "L": 1, "K": 6, "seed": 3,
    "phase_script": [[0, 3, "CPUBound"], [3, 6, "IOBound"]],
}


@pytest.fixture
def spec_file(tmp_path):
    f = tmp_path / "spec.json"
    f.write_text(json.dumps(SPEC))
    return f


@pytest.fixture
def two_by_two_dir(tmp_path, two_by_two):
    return write_trace_set(two_by_two, tmp_path / "2x2")


class TestMine:
    def test_writes_file(self, tmp_path):
        out = tmp_path / "pm.json"
        assert main(["mine", str(DATA / "matmul.sir"), "-o", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["functions"]["multiply"]["phase"] == "CPUBound"

    def test_stdout(self, capsys):
        assert main(["mine", str(DATA / "matmul.sir"), "--stdout"]) == 0
        assert "sync_workers" in json.loads(capsys.readouterr().out)["functions"]

    def test_malformed(self, tmp_path, capsys):
        bad = tmp_path / "bad.sir"
        bad.write_text("func f {\n  load\n  frobnicate\n}\n")
        assert main(["mine", str(bad)]) != 0
        err = capsys.readouterr().err
        assert "line 3" in err and "frobnicate" in err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["mine", str(tmp_path / "nope.sir")]) != 0


class TestGen:
    def test_layout(self, tmp_path, spec_file):
        out = tmp_path / "t"
        assert main(["gen", str(spec_file), str(out)]) == 0
        assert sorted(p.name for p in out.iterdir()) == [
            "config_0.jsonl", "config_1.jsonl", "config_2.jsonl", "manifest.json"]

    def test_byte_identical(self, tmp_path, spec_file):
        for d in ("a", "b"):
            assert main(["gen", str(spec_file), str(tmp_path / d)]) == 0
        for f in (tmp_path / "a").iterdir():
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_seed_flag(self, tmp_path, spec_file):
        main(["gen", str(spec_file), str(tmp_path / "a")])
        main(["gen", str(spec_file), str(tmp_path / "b"), "--seed", "99"])
        assert read_trace_set(tmp_path / "b").seed == 99
        assert read_trace_set(tmp_path / "a") != read_trace_set(tmp_path / "b")

    def test_overlap(self, tmp_path, capsys):
        f = tmp_path / "s.json"
        f.write_text(json.dumps({**SPEC, "phase_script": [[0, 4, "CPUBound"], [3, 6, "Other"]]}))
        assert main(["gen", str(f), str(tmp_path / "t")]) != 0
        assert "overlaps" in capsys.readouterr().err

    def test_refuses_overwrite(self, tmp_path, spec_file):
        out = tmp_path / "t"
        assert main(["gen", str(spec_file), str(out)]) == 0
        assert main(["gen", str(spec_file), str(out)]) != 0
        assert main(["gen", str(spec_file), str(out), "--overwrite"]) == 0

    def test_program_spec(self, tmp_path):
        pm = tmp_path / "pm.json"
        main(["mine", str(DATA / "matmul.sir"), "-o", str(pm)])
        out = tmp_path / "t"
        assert main(["gen", str(DATA / "matmul.gen.json"), str(out), "--phase-map", str(pm)]) == 0
        ts = read_trace_set(out)
        assert ts.benchmark == "matmul" and ts.K == 40
        assert ts.phases[0] == 3 and ts.phases[1] == 1 and ts.phases[7] == 2


class TestRun:
    def test_oracle_time(self, two_by_two_dir, capsys):
        assert main(["run", str(two_by_two_dir), "--policy", "oracle-time", "--switch-time", "0"]) == 0
        assert json.loads(capsys.readouterr().out)["total_time_s"] == 3.0

    def test_unknown_policy(self, two_by_two_dir, capsys):
        assert main(["run", str(two_by_two_dir), "--policy", "clairvoyant"]) != 0
        err = capsys.readouterr().err
        assert "astro" in err and "oracle-time" in err

    def test_fixed_policy(self, two_by_two_dir, capsys):
        assert main(["run", str(two_by_two_dir), "--policy", "fixed:1"]) == 0
        assert json.loads(capsys.readouterr().out)["total_time_s"] == 6.0

    def test_astro_writes_agent(self, tmp_path, two_by_two_dir):
        out = tmp_path / "res"
        assert main(["run", str(two_by_two_dir), "--policy", "astro", "--episodes", "3",
                     "-o", str(out)]) == 0
        assert {"astro.json", "astro.csv", "astro.agent.json"} <= {p.name for p in out.iterdir()}
        Agent.loads((out / "astro.agent.json").read_text())

    def test_csv_output(self, two_by_two_dir, capsys):
        assert main(["run", str(two_by_two_dir), "--policy", "random", "--csv"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("policy,") and lines[1].startswith("random,")

    def test_config_file(self, tmp_path, two_by_two_dir, capsys):
        cfg = tmp_path / "p.ini"
        cfg.write_text("[sim]\nswitch_time_s = 10\n")
        assert main(["run", str(two_by_two_dir), "--policy", "oracle-time", "--config", str(cfg)]) == 0
        assert json.loads(capsys.readouterr().out)["total_time_s"] == 6.0
        # flags win over the file
        assert main(["run", str(two_by_two_dir), "--policy", "oracle-time", "--config", str(cfg),
                     "--switch-time", "0"]) == 0
        assert json.loads(capsys.readouterr().out)["total_time_s"] == 3.0

    def test_bad_config_key(self, tmp_path, two_by_two_dir):
        cfg = tmp_path / "p.ini"
        cfg.write_text("[sim]\nwarp = 9\n")
        assert main(["run", str(two_by_two_dir), "--policy", "random", "--config", str(cfg)]) != 0

    def test_parallel_matches_serial(self, tmp_path, two_by_two_dir):
        for jobs, d in ((1, "s"), (3, "p")):
            assert main(["run", str(two_by_two_dir), "--all-policies", "--episodes", "2",
                         "--jobs", str(jobs), "-o", str(tmp_path / d)]) == 0
        for f in (tmp_path / "s").iterdir():
            assert f.read_bytes() == (tmp_path / "p" / f.name).read_bytes()


class TestCompare:
    def test_report(self, tmp_path, two_by_two_dir, capsys):
        out = tmp_path / "res"
        main(["run", str(two_by_two_dir), "--all-policies", "--episodes", "2", "-o", str(out)])
        capsys.readouterr()
        assert main(["compare", str(out), "--energy-threshold", "0", "--slowdown-threshold", "100"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["baseline"] == "best-fixed-time"
        assert len(doc["rows"]) == 6

    def test_mismatch(self, tmp_path, two_by_two_dir, spec_file, capsys):
        main(["gen", str(spec_file), str(tmp_path / "other")])
        main(["run", str(two_by_two_dir), "--policy", "random", "-o", str(tmp_path / "a")])
        main(["run", str(tmp_path / "other"), "--policy", "best-fixed-time", "-o", str(tmp_path / "b")])
        assert main(["compare", str(tmp_path / "a" / "random.json"),
                     str(tmp_path / "b" / "best-fixed-time.json")]) != 0
        assert "different trace sets" in capsys.readouterr().err


def test_export(tmp_path, two_by_two_dir, capsys):
    res = tmp_path / "res"
    main(["run", str(two_by_two_dir), "--policy", "astro", "--episodes", "3", "-o", str(res)])
    out = tmp_path / "sched"
    assert main(["export", str(res / "astro.agent.json"), "-o", str(out), "--emit-pseudo",
                 "--replay", str(two_by_two_dir)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"static.schedule.json", "hybrid.schedule.json", "static.schedule.c",
            "replay-static.json", "replay-hybrid.json"} <= names


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "phasesched", "mine", str(DATA / "matmul.sir"),
                           "--stdout"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["functions"]["read_matrix"]["phase"] == "IOBound"
