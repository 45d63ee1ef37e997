import json
from pathlib import Path

import numpy as np
import pytest

from vkcuam.cli import run
from vkcuam.scenario import builtin_scenario, save_scenario

DATA = Path(__file__).resolve().parent.parent / "src" / "vkcuam" / "data"


@pytest.fixture(scope="module")
def mini_scenario(tmp_path_factory):
    # trimmed drawer task: approach + open, enough to exercise every verb
    sc = builtin_scenario("drawer")
    sc.steps = sc.steps[:2]
    path = tmp_path_factory.mktemp("scen") / "mini.json"
    save_scenario(sc, path)
    return path


def test_unknown_verb_exits_2(capsys):
    assert run(["frobnicate"]) == 2


def test_missing_scenario_exits_2():
    assert run(["plan", "--scenario", "/nonexistent.json", "--out", "/tmp/x"]) == 2


def test_bad_override_exits_2(mini_scenario, tmp_path):
    rc = run(["plan", "--scenario", str(mini_scenario), "--out", str(tmp_path),
              "--set", "bogus"])
    assert rc == 2
    rc = run(["simulate", "--scenario", str(mini_scenario), "--out", str(tmp_path),
              "--set", "config.command_delay=0.013"])
    assert rc == 2  # delay must be a whole number of ticks


def test_plan_then_verify_roundtrip(mini_scenario, tmp_path, capsys):
    out = tmp_path / "plans"
    assert run(["plan", "--scenario", str(mini_scenario), "--out", str(out)]) == 0
    csvs = sorted(out.glob("plan_*.csv"))
    sidecars = sorted(out.glob("plan_*.json"))
    assert len(csvs) == 2 and len(sidecars) == 2
    meta = json.loads(sidecars[0].read_text())
    assert "residuals" in meta and "stats" in meta
    assert run(["verify", "--scenario", str(mini_scenario), "--plans", str(out)]) == 0
    txt = capsys.readouterr().out
    assert txt.count("PASS") == 2 and "FAIL" not in txt


def test_verify_catches_corruption(mini_scenario, tmp_path, capsys):
    out = tmp_path / "plans"
    assert run(["plan", "--scenario", str(mini_scenario), "--out", str(out)]) == 0
    victim = sorted(out.glob("plan_*.csv"))[1]
    lines = victim.read_text().splitlines()
    cells = lines[5].split(",")
    cells[1] = repr(float(cells[1]) + 0.5)  # bend one state well out of tolerance
    lines[5] = ",".join(cells)
    victim.write_text("\n".join(lines) + "\n")
    assert run(["verify", "--scenario", str(mini_scenario), "--plans", str(out)]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_export_json(tmp_path):
    csv = tmp_path / "log.csv"
    csv.write_text("t,a,b\n0.0,1.0,2.0\n0.01,1.5,2.5\n")
    events = tmp_path / "events.json"
    events.write_text('{"failed": false, "events": []}')
    out = tmp_path / "log.json"
    assert run(["export", "--log", str(csv), "--events", str(events),
                "--out", str(out), "--format", "json"]) == 0
    data = json.loads(out.read_text())
    assert data["columns"] == ["t", "a", "b"]
    assert data["rows"] == [[0.0, 1.0, 2.0], [0.01, 1.5, 2.5]]
    assert data["failed"] is False


def test_plan_outputs_byte_stable(mini_scenario, tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert run(["plan", "--scenario", str(mini_scenario), "--out", str(out1)]) == 0
    assert run(["plan", "--scenario", str(mini_scenario), "--out", str(out2)]) == 0
    for p1, p2 in zip(sorted(out1.glob("*.csv")), sorted(out2.glob("*.csv"))):
        assert p1.read_bytes() == p2.read_bytes()


def test_shipped_defaults_match_dataclasses():
    from vkcuam.controller import Gains
    from vkcuam.planner import (DEFAULT_DIST_SAFE, DEFAULT_DIST_SAFE_SELF,
                                DEFAULT_XI_DIST, DEFAULT_XI_GOAL)
    from vkcuam.simulator import GraspParams, SimConfig

    defaults = json.loads((DATA / "defaults.json").read_text())
    cfg = SimConfig()
    for k, v in defaults["config"].items():
        assert getattr(cfg, k) == pytest.approx(v), k
    gp = GraspParams()
    for k, v in defaults["grasp"].items():
        assert getattr(gp, k) == pytest.approx(v), k
    p = defaults["planner"]
    assert p["xi_goal"] == DEFAULT_XI_GOAL
    assert p["dist_safe"] == DEFAULT_DIST_SAFE
    assert p["dist_safe_self"] == DEFAULT_DIST_SAFE_SELF
    assert p["xi_dist"] == DEFAULT_XI_DIST
    g = Gains()
    assert np.allclose(sorted(g.translation_poles().real),
                       sorted(defaults["gains"]["translation_poles"]))
    assert np.allclose(sorted(g.rotation_poles().real),
                       sorted(defaults["gains"]["rotation_poles"]))
    assert g.integral_clamp == defaults["gains"]["integral_clamp"]


def test_shipped_scenarios_load():
    from vkcuam.scenario import load_scenario

    for name in ("task1", "task2", "drawer"):
        sc = load_scenario(DATA / "scenarios" / f"{name}.json")
        assert sc.steps, name
