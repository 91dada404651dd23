import json
import subprocess
import sys

import numpy as np
import pytest

from ddelab.plotting import Series, emit_plot
from ddelab.scenarios import ScenarioError, run_scenario, validate_scenario


def write_scenario(tmp_path, doc, name="scenario.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


SIM = {
    "name": "sim-demo",
    "task": "simulate",
    "system": {"kind": "limit", "c": 1.0, "d": 7.38},
    "history": {"kind": "exp-decay"},
    "T": 12.0,
    "plot": True,
}


class TestValidation:
    def test_negative_gain_reported_with_path(self):
        doc = {"name": "bad", "task": "simulate", "system": {"kind": "limit", "c": 1.0, "d": -7.38}}
        with pytest.raises(ScenarioError) as err:
            validate_scenario(doc)
        assert any("system.d" in p for p in err.value.problems)

    def test_unknown_keys_rejected(self):
        doc = dict(SIM, extra_knob=3)
        with pytest.raises(ScenarioError) as err:
            validate_scenario(doc)
        assert any("extra_knob" in p for p in err.value.problems)

    def test_unknown_task_rejected(self):
        with pytest.raises(ScenarioError):
            validate_scenario({"name": "x", "task": "animate"})

    def test_all_problems_listed(self):
        doc = {"name": "", "task": "simulate", "system": {"kind": "limit", "c": -1, "d": -2}}
        with pytest.raises(ScenarioError) as err:
            validate_scenario(doc)
        assert len(err.value.problems) >= 3


class TestRunScenario:
    def test_simulate_artifacts(self, tmp_path):
        path = write_scenario(tmp_path, SIM)
        res = run_scenario(str(path), out_dir=str(tmp_path / "out"))
        assert set(res.artifacts) >= {"trajectory.csv", "events.json", "plot.svg", "manifest.json"}
        assert not res.unresolved

    def test_byte_identical_reruns(self, tmp_path):
        path = write_scenario(tmp_path, SIM)
        r1 = run_scenario(str(path), out_dir=str(tmp_path / "o1"))
        r2 = run_scenario(str(path), out_dir=str(tmp_path / "o2"))
        for art in r1.artifacts:
            b1 = (tmp_path / "o1" / art).read_bytes()
            b2 = (tmp_path / "o2" / art).read_bytes()
            assert b1 == b2, art

    def test_rerun_from_manifest_alone(self, tmp_path):
        path = write_scenario(tmp_path, SIM)
        run_scenario(str(path), out_dir=str(tmp_path / "o1"))
        res = run_scenario(str(tmp_path / "o1" / "manifest.json"), out_dir=str(tmp_path / "o3"))
        for art in res.artifacts:
            assert (tmp_path / "o1" / art).read_bytes() == (tmp_path / "o3" / art).read_bytes()

    def test_spectrum_task(self, tmp_path):
        doc = {"name": "spec", "task": "spectrum", "rate": 1.0, "slope": 2.0, "pairs": 3}
        res = run_scenario(str(write_scenario(tmp_path, doc)), out_dir=str(tmp_path / "out"))
        data = json.loads((tmp_path / "out" / "spectrum.json").read_text())
        assert abs(data["lambda0"] - 0.3748225281839233) < 1e-9

    def test_manifold_task(self, tmp_path):
        doc = {
            "name": "branch",
            "task": "manifold",
            "system": {"kind": "limit", "c": 1.0, "d": 7.38},
            "branch": "plus",
            "T": 10.0,
        }
        res = run_scenario(str(write_scenario(tmp_path, doc)), out_dir=str(tmp_path / "out"))
        lm = json.loads((tmp_path / "out" / "landmarks.json").read_text())
        assert lm["t1"] is not None and lm["t2"] > lm["t1"]
        assert "manifold.csv" in res.artifacts

    def test_figure_preset_x1(self, tmp_path):
        doc = {"name": "fig", "task": "figure", "preset": "x1", "T": 40.0, "N": 400}
        res = run_scenario(str(write_scenario(tmp_path, doc)), out_dir=str(tmp_path / "out"))
        assert {"plus.csv", "minus.csv", "stationary.csv", "figure.svg"} <= set(res.artifacts)
        header = (tmp_path / "out" / "plus.csv").read_text().splitlines()[0]
        assert header == "t,x,x_delayed"
        svg = (tmp_path / "out" / "figure.svg").read_text()
        assert svg.count("<polyline") >= 4  # three series + phase projection
        for color in ("blue", "green", "black"):
            assert color in svg

    def test_malformed_preset(self, tmp_path):
        doc = {"name": "fig", "task": "figure", "preset": "x9"}
        with pytest.raises(ScenarioError):
            run_scenario(str(write_scenario(tmp_path, doc)), out_dir=str(tmp_path / "out"))


class TestPlot:
    def test_constant_series_is_horizontal_line(self):
        t = np.linspace(0.0, 1.0, 11)
        svg = emit_plot([Series(t, np.full_like(t, 2.0), "stationary")])
        line = [ln for ln in svg.splitlines() if "polyline" in ln][0]
        ys = {pt.split(",")[1] for pt in line.split('points="')[1].split('"')[0].split()}
        assert len(ys) == 1

    def test_deterministic_bytes(self):
        t = np.linspace(0.0, 5.0, 101)
        a = emit_plot([Series(t, np.sin(t), "plus")], phase=[(np.sin(t), np.cos(t), "plus")])
        b = emit_plot([Series(t, np.sin(t), "plus")], phase=[(np.sin(t), np.cos(t), "plus")])
        assert a == b

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            emit_plot([])


class TestCli:
    def run_cli(self, *args):
        return subprocess.run(
            [sys.executable, "-m", "ddelab.cli", *args],
            capture_output=True,
            text=True,
        )

    def test_simulate_exit_zero(self, tmp_path):
        path = write_scenario(tmp_path, SIM)
        proc = self.run_cli("simulate", "--scenario", str(path), "--out", str(tmp_path / "out"))
        assert proc.returncode == 0, proc.stderr
        assert "trajectory.csv" in proc.stdout

    def test_validation_failure_exit_two(self, tmp_path):
        doc = {"name": "bad", "task": "simulate", "system": {"kind": "limit", "c": 1.0, "d": -7.38}}
        path = write_scenario(tmp_path, doc)
        proc = self.run_cli("simulate", "--scenario", str(path), "--out", str(tmp_path / "out"))
        assert proc.returncode == 2
        assert "system.d" in proc.stderr

    def test_unresolved_exit_three(self, tmp_path):
        # a converging trajectory has no orbit to detect
        doc = {
            "name": "noorbit",
            "task": "periodic",
            "system": {"kind": "smooth", "a": 1.0, "b": 2.0, "n": 6},
            "T": 80.0,
            "transient": 40.0,
            "N": 200,
        }
        path = write_scenario(tmp_path, doc)
        proc = self.run_cli("periodic", "--scenario", str(path), "--out", str(tmp_path / "out"))
        assert proc.returncode == 3
        data = json.loads((tmp_path / "out" / "orbit.json").read_text())
        assert data == {"found": False}

    def test_spectrum_direct_flags(self):
        proc = self.run_cli("spectrum", "--rate", "1.0", "--slope", "2.0", "--pairs", "2")
        assert proc.returncode == 0
        assert "0.374822528184" in proc.stdout
