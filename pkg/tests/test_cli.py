import json
import subprocess
import sys

import pytest

from koksma.cli import main
from koksma.point_set import format_csv, halton, parse_csv


def run_json(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = main(argv + ["--out", str(out)])
    return code, json.loads(out.read_text())


@pytest.fixture
def halton_csv(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text(format_csv(halton(32, 2)))
    return p


class TestPoints:
    def test_vdc_stdout(self, capsys):
        assert main(["points", "--generator", "vdc", "--m", "3"]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["schema"] == "koksma/1" and rep["result"]["points"] == [[0.5], [0.25], [0.75]]

    def test_csv_round_trip(self, tmp_path):
        csv = tmp_path / "p.csv"
        code, rep = run_json(["points", "--generator", "halton", "--m", "10", "--d", "3", "--csv", str(csv)], tmp_path)
        assert code == 0 and parse_csv(csv.read_text()) == halton(10, 3)

    def test_uniform_needs_seed(self, tmp_path):
        assert main(["points", "--generator", "uniform", "--m", "5", "--d", "2"]) == 2

    def test_uniform_seeded(self, tmp_path):
        argv = ["points", "--generator", "uniform", "--m", "5", "--d", "2", "--seed", "4"]
        _, a = run_json(argv, tmp_path, "a.json")
        _, b = run_json(argv, tmp_path, "b.json")
        assert a["result"] == b["result"]


class TestDiscrepancy:
    def test_exact(self, tmp_path, halton_csv):
        code, rep = run_json(["discrepancy", "--points", str(halton_csv), "--exact"], tmp_path)
        assert code == 0 and rep["result"]["exact"] and 0 < rep["result"]["value"] < 1
        assert len(rep["inputs"][str(halton_csv)]) == 64

    def test_budget_exit(self, tmp_path, halton_csv, capsys):
        assert main(["discrepancy", "--points", str(halton_csv), "--budget", "10"]) == 3
        assert "--lower-bound" in capsys.readouterr().err

    def test_lower_bound(self, tmp_path, halton_csv):
        code, rep = run_json(["discrepancy", "--points", str(halton_csv), "--lower-bound", "5", "--seed", "1"], tmp_path)
        assert code == 0 and not rep["result"]["exact"]

    def test_lower_bound_needs_seed(self, halton_csv):
        assert main(["discrepancy", "--points", str(halton_csv), "--lower-bound", "5"]) == 2

    def test_bad_csv_line(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("# d=1\n0.5\n1.5\n")
        assert main(["discrepancy", "--points", str(p)]) == 2
        assert "3" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["discrepancy", "--points", str(tmp_path / "nope.csv")]) == 2

    def test_atomic_measure(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("# d=1\n0.2\n")
        mj = tmp_path / "m.json"
        mj.write_text(json.dumps({"variant": "atomic", "d": 1, "atoms": [[0.2]], "weights": [1.0]}))
        code, rep = run_json(["discrepancy", "--points", str(p), "--measure", str(mj)], tmp_path)
        assert code == 0 and rep["result"]["value"] == 0


class TestVariation:
    def test_product(self, tmp_path):
        code, rep = run_json(["variation", "--f", "builtin:product", "--d", "2", "--level", "4", "--grid-n", "16"], tmp_path)
        assert code == 0 and rep["result"]["total"] == pytest.approx(3.0)
        assert rep["result"]["derivative"]["0,1"]["sup_bound"] == pytest.approx(1.0)

    def test_linear_params(self, tmp_path):
        argv = ["variation", "--f", "builtin:linear", "--d", "2", "--params", '{"a": [1, -2]}']
        code, rep = run_json(argv, tmp_path)
        assert rep["result"]["total"] == pytest.approx(3.0)

    def test_bad_params(self):
        assert main(["variation", "--f", "builtin:linear", "--d", "2", "--params", "{bad"]) == 2

    def test_unknown_builtin(self):
        assert main(["variation", "--f", "builtin:nope", "--d", "2"]) == 2

    def test_signed(self, tmp_path):
        s = tmp_path / "s.json"
        s.write_text(json.dumps({"d": 1, "atoms": [[0.3], [0.7]], "weights": [1.0, -0.5]}))
        code, rep = run_json(["variation", "--f", f"signed:{s}", "--level", "5"], tmp_path)
        assert rep["result"]["total"] == pytest.approx(1.5) and rep["result"]["total_variation_of_measure"] == 1.5


def write_config(tmp_path, cfg):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


class TestBound:
    def test_zero_one(self, tmp_path):
        cfg = write_config(tmp_path, {"losses": [0, 0, 0, 1], "true_mass_one": 0.4})
        code, rep = run_json(["bound", "zero-one", "--config", cfg], tmp_path)
        assert code == 0 and rep["result"]["equality"]

    def test_identity(self, tmp_path):
        cfg = write_config(tmp_path, {"signed": {"d": 1, "atoms": [[0.5], [0.9]], "weights": [2, -1]}, "points": [[0.25]]})
        code, rep = run_json(["bound", "identity", "--config", cfg], tmp_path)
        assert code == 0 and rep["result"]["lhs"] == pytest.approx(-0.9)

    def test_compose(self, tmp_path):
        cfg = write_config(
            tmp_path,
            {"f": {"signed": {"d": 1, "atoms": [[0.5]], "weights": [1]}}, "points": [[0.25], [0.75]], "variation": {"value": 1}},
        )
        code, rep = run_json(["bound", "compose", "--config", cfg], tmp_path)
        assert code == 0 and rep["result"]["bound"] == 0.25

    def test_compose_falsified_exit(self, tmp_path):
        # an understated variation must be reported as a violated bound
        cfg = write_config(
            tmp_path,
            {
                "f": {"signed": {"d": 1, "atoms": [[0.5]], "weights": [1]}},
                "points": [[0.25], [0.75]],
                "measure": {"variant": "atomic", "d": 1, "atoms": [[0.5]], "weights": [1.0]},
                "variation": {"value": 0.1},
            },
        )
        assert main(["bound", "compose", "--config", cfg]) == 4

    def test_classwise(self, tmp_path):
        c = {"p_y": 0.5, "n_y": 100, "empirical_loss_y": 0.1, "V_y": 2}
        cfg = write_config(tmp_path, {"classes": [c, c], "d_z": 4, "c2": 1, "delta": 0.05})
        code, rep = run_json(["bound", "classwise", "--config", cfg], tmp_path)
        assert rep["result"]["bound"] == pytest.approx(0.42716, abs=1e-5)

    def test_missing_field(self, tmp_path):
        assert main(["bound", "classwise", "--config", write_config(tmp_path, {"classes": []})]) == 2


class TestLinreg:
    def test_verify_thm2(self, tmp_path):
        argv = ["linreg", "verify", "--mode", "thm2", "--seed", "3", "--dims", "2,1", "--support", "8", "--m", "32"]
        code, rep = run_json(argv, tmp_path)
        assert code == 0 and rep["result"]["satisfied"]

    def test_verify_thm3_star(self, tmp_path):
        argv = ["linreg", "verify", "--mode", "thm3", "--seed", "3", "--dims", "1,1", "--model", "star"]
        code, rep = run_json(argv, tmp_path)
        assert code == 0 and rep["result"]["M"] is not None

    def test_seed_required(self):
        with pytest.raises(SystemExit) as e:
            main(["linreg", "verify"])
        assert e.value.code == 2

    def test_study_csv(self, tmp_path):
        csv = tmp_path / "r5.csv"
        argv = ["linreg", "study", "--remark5", "--seed", "1", "--m-list", "8,16", "--trials", "3", "--csv", str(csv)]
        code, _ = run_json(argv, tmp_path)
        assert code == 0 and csv.read_text().startswith("m,median_D")


class TestSuite:
    def test_quick_criterion(self, tmp_path):
        code, rep = run_json(["suite", "--criterion", "4", "--scale", "quick", "--seed", "7"], tmp_path)
        assert code == 0 and rep["result"]["passed"]


def test_console_script_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "koksma.cli", "points", "--generator", "centers", "--m", "2"],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0 and json.loads(out.stdout)["result"]["points"] == [[0.25], [0.75]]
