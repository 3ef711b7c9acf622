import json
import subprocess
import sys
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semiflows.cli import main
from semiflows.config import ConfigError, RunConfig, parse_config, render_config
from semiflows.io import read_trajectory, sha256


def test_minimal_config_fills_defaults():
    cfg = parse_config("command = demo-duffing\n")
    assert cfg.seed == 0 and cfg.resolution == (60, 60) and cfg.epsilon is None


def test_errors_are_collected_with_line_numbers():
    text = "command = simulate\ndt = -1\nbogus = 3\nT = abc\nno equals sign\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    errs = info.value.errors
    assert "line 2: dt must be positive" in errs
    assert any(e.startswith("line 3: unknown key") for e in errs)
    assert any(e.startswith("line 4: cannot parse") for e in errs)
    assert any(e.startswith("line 5:") for e in errs)


def test_missing_command_and_bad_bounds():
    with pytest.raises(ConfigError) as info:
        parse_config("bounds = 1,0,0,1\n")
    assert "missing key 'command'" in info.value.errors
    assert any("min < max" in e for e in info.value.errors)


def test_full_config_round_trip():
    cfg = RunConfig(command="demo-chafee", map="cubic:lambda=15.0", epsilon=0.05,
                    bounds=(-1.0, 1.0, -2.0, 2.0), resolution=(10, 20), seed=2 ** 63)
    assert parse_config(render_config(cfg)) == cfg


@settings(max_examples=40, deadline=None)
@given(dt=st.floats(1e-6, 1.0), T=st.floats(0.1, 1e3), seed=st.integers(0, 2 ** 64 - 1),
       eps=st.one_of(st.none(), st.floats(0.0, 10.0)), n=st.integers(2, 500))
def test_round_trip_property(dt, T, seed, eps, n):
    cfg = replace(RunConfig(command="simulate"), dt=dt, T=T, seed=seed, epsilon=eps, n_interior=n)
    assert parse_config(render_config(cfg)) == cfg


def _write(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text)
    return p


def test_unknown_command_exits_2(capsys):
    assert main(["frobnicate"]) == 2


def test_bad_config_exits_2(tmp_path, capsys):
    p = _write(tmp_path, "command = graph\ndt = -1\n")
    assert main(["--config", str(p)]) == 2
    assert "dt must be positive" in capsys.readouterr().err


def test_equilibria_run_writes_manifest(tmp_path):
    out = tmp_path / "eq"
    p = _write(tmp_path, f"command = equilibria\nmap = cubic:lambda=50\noutput_dir = {out}\n")
    assert main(["--config", str(p)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    csvs = sorted(f for f in man["files"] if f.endswith(".csv"))
    assert len(csvs) == 5
    for name, digest in man["files"].items():
        assert sha256(out / name) == digest
    assert man["summary"]["count"] == 5 and "wall_time" in man


def test_failed_verification_exits_1_and_cleans_up(tmp_path):
    # nothing returns to (0.9, 0.9) under a contraction, so no chain exists
    out = tmp_path / "chain"
    p = _write(tmp_path, "command = chain\nsystem = contraction\nbounds = -1,1,-1,1\n"
                         "resolution = 20,20\nt_flow = 1.0\nchain_from = 0.9,0.9\n"
                         f"chain_to = 0.9,0.9\noutput_dir = {out}\n")
    assert main(["--config", str(p)]) == 1
    assert not out.exists() and not out.with_name("chain.partial").exists()


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("SEMIFLOWS_OUTPUT_ROOT", str(tmp_path))
    p = _write(tmp_path, "command = graph\nsystem = contraction\nbounds = -1,1,-1,1\n"
                         "resolution = 10,10\nt_flow = 1.0\noutput_dir = rel/graph\n")
    assert main(["--config", str(p)]) == 0
    assert (tmp_path / "rel" / "graph" / "graph.dot").exists()


def test_demo_duffing_is_deterministic(tmp_path):
    digests = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["demo-duffing", "--output", str(out)]) == 0
        man = json.loads((out / "manifest.json").read_text())
        assert {"duffing_trajectory.csv", "energy_drift.json", "transition_graph.dot",
                "chain.json"} <= set(man["files"])
        digests.append(man["files"])
    assert digests[0] == digests[1]
    tr, meta = read_trajectory(tmp_path / "a" / "duffing_trajectory.csv")
    assert tr.states.shape[1] == 2 and meta["start"] == [0.5, 0.0]


def test_console_entry_point_runs():
    r = subprocess.run([sys.executable, "-m", "semiflows.cli", "nope"], capture_output=True)
    assert r.returncode == 2
