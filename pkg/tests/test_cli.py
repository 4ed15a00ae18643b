import io
import json
import subprocess
import sys
from importlib.resources import files

import numpy as np
import pytest

from beliefmdp import fixtures
from beliefmdp.cli import main
from beliefmdp.model import model_to_dict

DATA = files("beliefmdp") / "data"


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def m1_path():
    return DATA / "m1.json"


def write_model(tmp_path, model, name="model.json"):
    path = tmp_path / name
    path.write_text(json.dumps(model_to_dict(model)))
    return path


class TestValidate:
    def test_valid(self, m1_path):
        code, out, _ = run("validate", "--model", m1_path)
        assert code == 0 and json.loads(out) == {"valid": True, "violations": []}

    def test_row_sum(self, tmp_path, m1):
        P = m1.P.copy()
        P[0, 1] = [0.3, 0.3]
        code, out, _ = run("validate", "--model", write_model(tmp_path, m1.replace(P=P)))
        report = json.loads(out)
        assert code == 1
        assert report["violations"][0]["code"] == "row_sum"
        assert report["violations"][0]["index"] == [0, 1]

    def test_malformed(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[1, 2")
        assert run("validate", "--model", path)[0] == 2

    def test_missing_file(self, tmp_path):
        assert run("validate", "--model", tmp_path / "nope.json")[0] == 2


class TestFilter:
    def test_initial_only(self, m1_path):
        code, out, _ = run("filter", "--model", m1_path, "--observations", "0")
        lines = out.splitlines()
        assert code == 0 and len(lines) == 2
        assert lines[1].split(",")[:4] == ["0", "0", "", "0.8"]

    def test_sequence(self, m1_path, tmp_path):
        code, _, _ = run("filter", "--model", m1_path, "--observations", "0,1,1", "--actions", "0,1", "--out", tmp_path)
        assert code == 0
        assert len((tmp_path / "beliefs.csv").read_text().splitlines()) == 4

    def test_impossible_observation(self, tmp_path):
        model = fixtures.m1().replace(Q=np.array([[[1.0, 0.0], [1.0, 0.0]]] * 2))
        code, _, err = run("filter", "--model", write_model(tmp_path, model), "--observations", "0,1", "--actions", "0")
        assert code == 1 and json.loads(err)["step"] == 1

    def test_length_mismatch_is_domain_error(self, m1_path):
        assert run("filter", "--model", m1_path, "--observations", "0,1", "--actions", "")[0] == 1

    def test_bad_list(self, m1_path):
        assert run("filter", "--model", m1_path, "--observations", "0,x")[0] == 2


class TestSolve:
    def test_horizon_zero(self, m1_path):
        code, out, _ = run("solve", "--model", m1_path, "--horizon", 0)
        assert code == 0 and json.loads(out)["root_value"] == 0.0

    def test_horizon_one(self, m1_path):
        out = json.loads(run("solve", "--model", m1_path, "--horizon", 1)[1])
        assert out["root_value"] == pytest.approx(0.2)

    def test_infinite_writes_tables(self, m1_path, tmp_path):
        code, out, _ = run("solve", "--model", m1_path, "--infinite", "--grid", "1/20", "--tol", "1e-8", "--out", tmp_path)
        summary = json.loads(out)
        assert code == 0 and summary["converged"] and summary["resolution"] == 20
        assert (tmp_path / "value_table.csv").read_text().count("\n") == 22
        assert json.loads((tmp_path / "summary.json").read_text()) == summary

    def test_grid_spellings(self, m1_path):
        a = json.loads(run("solve", "--model", m1_path, "--infinite", "--grid", "0.05")[1])
        b = json.loads(run("solve", "--model", m1_path, "--infinite", "--grid", "20")[1])
        assert a == b

    def test_unit_discount_under_d(self, tmp_path):
        doc = model_to_dict(fixtures.m1())
        doc["alpha"] = 1.0
        path = tmp_path / "m.json"
        path.write_text(json.dumps(doc))
        assert run("solve", "--model", path, "--infinite", "--grid", "10")[0] == 1

    def test_needs_mode(self, m1_path):
        assert run("solve", "--model", m1_path)[0] == 2

    def test_infinite_needs_grid(self, m1_path):
        assert run("solve", "--model", m1_path, "--infinite")[0] == 2

    def test_policy_tree_csv(self, m1_path, tmp_path):
        run("solve", "--model", m1_path, "--horizon", 2, "--out", tmp_path)
        assert (tmp_path / "policy_tree.csv").read_text().startswith("history,steps_left")


class TestDiagnose:
    def probes(self, tmp_path, spec):
        path = tmp_path / "probes.json"
        path.write_text(json.dumps(spec))
        return path

    def test_bundled_probes(self, tmp_path):
        code, out, _ = run("diagnose", "--model", DATA / "smooth_family.json", "--probes", DATA / "probes.json", "--out", tmp_path)
        verdicts = [p["verdict"] for p in json.loads(out)["probes"]]
        assert code == 0 and verdicts == ["decaying"] * 5
        assert len(list(tmp_path.glob("probe_*.csv"))) == 5

    def test_step_fixture(self):
        out = json.loads(run("diagnose", "--model", DATA / "step_family.json", "--probes", DATA / "probes.json")[1])
        assert [p["verdict"] for p in out["probes"][:4]] == ["non-vanishing"] * 4

    def test_identity_probe(self, tmp_path):
        spec = [{"kind": "equicontinuity", "B": [0], "a": 0.3, "r": 0}]
        out = json.loads(run("diagnose", "--model", DATA / "step_family.json", "--probes", self.probes(tmp_path, spec))[1])
        assert out["probes"][0]["max_modulus"] == 0.0

    def test_single_family_file(self, tmp_path):
        fam = tmp_path / "fam.json"
        fam.write_text(json.dumps(fixtures.step_family().observation_family.to_record()))
        spec = [{"kind": "tv_modulus", "x": 1, "a": 0.5, "direction": -1}]
        out = json.loads(run("diagnose", "--model", fam, "--probes", self.probes(tmp_path, spec))[1])
        assert out["probes"][0]["verdict"] == "non-vanishing"

    @pytest.mark.parametrize("spec", [[], [{"kind": "nope", "a": 0.5}], [{"kind": "q_weak"}], {"probes": "x"}])
    def test_bad_spec(self, tmp_path, spec):
        assert run("diagnose", "--model", DATA / "step_family.json", "--probes", self.probes(tmp_path, spec))[0] == 2

    def test_unparseable_spec(self, tmp_path):
        path = tmp_path / "p.json"
        path.write_text("{")
        assert run("diagnose", "--model", DATA / "step_family.json", "--probes", path)[0] == 2


class TestDemoKalman:
    def test_zero_noise(self):
        code, out, _ = run("demo-kalman", "--zero-noise", "--steps", 5)
        assert code == 0
        assert [row.split(",")[2] for row in out.splitlines()[1:]] == ["0.0"] * 3

    def test_default_is_strictly_decreasing(self):
        out = run("demo-kalman")[1]
        err = [float(row.split(",")[2]) for row in out.splitlines()[1:]]
        assert err[0] > err[1] > err[2]

    def test_same_seed_same_bytes(self):
        a = run("demo-kalman", "--grids", "21,41", "--steps", 10, "--seed", 12)[1]
        b = run("demo-kalman", "--grids", "21,41", "--steps", 10, "--seed", 12)[1]
        assert a == b

    @pytest.mark.parametrize("seed", ["-1", str(2**64), "abc"])
    def test_seed_range(self, seed):
        assert run("demo-kalman", "--seed", seed)[0] == 2

    def test_largest_seed_accepted(self):
        assert run("demo-kalman", "--seed", str(2**64 - 1), "--steps", 3, "--grids", "11")[0] == 0


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "beliefmdp", "validate", "--model", str(DATA / "m1.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["valid"]


def test_unknown_command():
    assert run("frobnicate")[0] == 2
