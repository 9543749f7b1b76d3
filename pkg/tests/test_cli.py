import json

import pytest

from urbansst.cli import _parse_budget, _parse_seeds, main
from urbansst.sim import ScenarioError

from conftest import SCENARIO_DIR

STRAIGHT = str(SCENARIO_DIR / "scenario_i_straight_road.json")


@pytest.fixture()
def blocked_scenario(tmp_path):
    """Straight road with a parked car close enough that braking cannot avoid it."""
    data = json.loads((SCENARIO_DIR / "scenario_i_straight_road.json").read_text())
    data["objects"] = [
        {"id": "wall", "type": "vehicle", "poses": [[0.0, 6.0, 0.0, 0.0]],
         "footprint": {"length": 1.5, "width": 40.0}},
    ]
    path = tmp_path / "blocked.json"
    path.write_text(json.dumps(data))
    return str(path)


class TestArgHelpers:
    def test_parse_budget(self):
        assert _parse_budget(None) is None
        assert _parse_budget("iters:500") == ("iters", 500)
        assert _parse_budget("time:0.25") == ("time", 0.25)
        with pytest.raises(ScenarioError):
            _parse_budget("steps:5")

    def test_parse_seeds(self):
        assert _parse_seeds("0") == [0]
        assert _parse_seeds("0,3,5") == [0, 3, 5]
        assert _parse_seeds("2-5") == [2, 3, 4, 5]
        assert _parse_seeds("0-2,7") == [0, 1, 2, 7]


class TestPlan:
    def test_solved_exit_zero(self, tmp_path):
        out = tmp_path / "out"
        rc = main([
            "plan", "--scenario", STRAIGHT, "--mode", "dki",
            "--budget", "iters:2000", "--out", str(out),
        ])
        assert rc == 0
        stats = json.loads((out / "tree_stats.json").read_text())
        assert stats["solved"] is True
        assert stats["iterations"] == 2000
        lines = (out / "trajectory.csv").read_text().strip().split("\n")
        assert lines[0] == "t,x,y,theta,v,a,delta"
        times = [float(l.split(",")[0]) for l in lines[1:]]
        assert times == sorted(times) and times[0] == 0.0

    def test_unsolved_exit_two(self, tmp_path):
        out = tmp_path / "out"
        rc = main([
            "plan", "--scenario", STRAIGHT, "--mode", "base",
            "--budget", "iters:1", "--out", str(out),
        ])
        assert rc == 2
        stats = json.loads((out / "tree_stats.json").read_text())
        assert stats["solved"] is False
        assert not (out / "trajectory.csv").exists()

    def test_missing_scenario_exit_one(self, tmp_path, capsys):
        rc = main(["plan", "--scenario", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err

    def test_goal_past_route_end_exit_one(self, tmp_path, capsys):
        rc = main([
            "plan", "--scenario", STRAIGHT,
            "--set", "ego.state.x=125.0",
            "--out", str(tmp_path / "o"),
        ])
        assert rc == 1
        assert "route" in capsys.readouterr().err

    def test_set_override_applies(self, tmp_path):
        out = tmp_path / "out"
        rc = main([
            "plan", "--scenario", STRAIGHT, "--mode", "base",
            "--set", "planner.iteration_budget=50",
            "--out", str(out),
        ])
        stats = json.loads((out / "tree_stats.json").read_text())
        assert stats["iterations"] == 50
        assert rc in (0, 2)


class TestSimulate:
    def test_clean_run_exit_zero(self, tmp_path):
        out = tmp_path / "out"
        rc = main([
            "simulate", "--scenario", STRAIGHT, "--mode", "dki", "--seed", "0",
            "--budget", "iters:300", "--out", str(out),
        ])
        assert rc == 0
        assert (out / "simlog.json").exists()
        assert (out / "metrics.json").exists()
        csv = (out / "simlog.csv").read_text()
        assert csv.startswith("t,x,y,theta,v,a_cmd,delta_cmd,solved,cost,fallback\n")

    def test_collision_exit_three(self, tmp_path, blocked_scenario):
        out = tmp_path / "out"
        rc = main([
            "simulate", "--scenario", blocked_scenario, "--mode", "base",
            "--budget", "iters:100", "--out", str(out),
        ])
        assert rc == 3
        log = json.loads((out / "simlog.json").read_text())
        assert log["termination"] == "collision"
        assert log["collisions"]

    def test_byte_identical_reruns(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            rc = main([
                "simulate", "--scenario", STRAIGHT, "--mode", "dki", "--seed", "5",
                "--budget", "iters:300", "--out", str(out),
            ])
            assert rc == 0
            outs.append((out / "simlog.csv").read_bytes())
        assert outs[0] == outs[1]


class TestBenchmark:
    def test_summary_rows(self, tmp_path):
        out = tmp_path / "out"
        rc = main([
            "benchmark", "--scenario", STRAIGHT, "--modes", "base,dki",
            "--seeds", "0-1", "--budget", "iters:300", "--out", str(out),
        ])
        assert rc == 0
        cells = json.loads((out / "cells.json").read_text())
        assert len(cells) == 4  # 1 scenario x 2 modes x 2 seeds
        assert all(c["error"] is None for c in cells)
        lines = (out / "summary.csv").read_text().strip().split("\n")
        assert lines[0] == "scenario,metric,base,dki,gain_pct"
        metrics = [l.split(",")[1] for l in lines[1:]]
        assert metrics == [
            "mean_abs_acceleration", "mean_speed_deviation",
            "mean_lane_deviation", "min_target_distance",
        ]

    def test_failing_cell_exit_one(self, tmp_path, capsys):
        out = tmp_path / "out"
        rc = main([
            "benchmark", "--scenario", str(tmp_path / "missing.json"),
            "--seeds", "0", "--out", str(out),
        ])
        assert rc == 1
        assert "cell failed" in capsys.readouterr().err
        cells = json.loads((out / "cells.json").read_text())
        assert cells[0]["error"] is not None
