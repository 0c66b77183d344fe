import hashlib
import json
import math
import subprocess
import sys

import pytest

from shrinkclt import cli

from oracles import normal_rn_oracle

IID_NORMAL = {"process": "iid", "marginal": {"dist": "normal"}}


def run_cli(tmp_path, command, config=None, *extra, name="out"):
    args = [command, "--out", str(tmp_path / name)]
    if config is not None:
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(config))
        args += ["--config", str(path)]
    return cli.main(args + list(extra)), tmp_path / name


def read_dir(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_check_tails_laplace(tmp_path):
    code, out = run_cli(tmp_path, "check-tails", {"dist": "laplace", "rate": 1.0})
    assert code == 0
    rep = json.loads((out / "tail_report.json").read_text())
    assert rep["holds_2_10"] is True and rep["holds_2_11"] is False
    assert rep["provenance"]
    for _, eps, ratio in rep["ratio_curve"]:
        assert ratio == pytest.approx(math.exp(-eps), abs=1e-9)


def test_gfun_writes_infinite_values_as_strings(tmp_path):
    code, out = run_cli(tmp_path, "gfun", {"distribution": {"dist": "student_t", "df": 1.0},
                                           "r_grid": [0.0, 1.0]})
    assert code == 0
    rows = json.loads((out / "gfun.json").read_text())["rows"]
    assert rows[0][1] == "inf"
    assert (out / "gfun.csv").read_text().splitlines()[0] == "r,G,shrunken_second_moment"


def test_shrink_eval_defaults(tmp_path):
    code, out = run_cli(tmp_path, "shrink-eval")
    assert code == 0
    lines = (out / "shrink.csv").read_text().splitlines()
    assert lines[0] == "x,r,shrink,magnitude"
    assert "5.0,2.0,3.0,3.0" in lines


def test_mixing_exact_chain(tmp_path):
    code, out = run_cli(tmp_path, "mixing-exact", {"chain": {"lambda": 0.4}, "lag": 1})
    assert code == 0
    rep = json.loads((out / "mixing_report.json").read_text())
    assert rep["alpha"] <= 0.2
    assert rep["indicator_correlation"] == 1.0
    assert rep["rho_decay"]["r_squared"] >= 0.99


def test_mixing_exact_joint_and_csv(tmp_path):
    code, out = run_cli(tmp_path, "mixing-exact", {"joint": [[0.5, 0.0], [0.0, 0.5]]})
    assert code == 0
    rep = json.loads((out / "mixing_report.json").read_text())
    assert rep["alpha"] == 0.25 and rep["rho"] == pytest.approx(1.0)
    joint = tmp_path / "j.csv"
    joint.write_text("0.25,0.25\n0.25,0.25\n")
    code, out = run_cli(tmp_path, "mixing-exact", {"joint_csv": str(joint)}, name="b")
    assert code == 0
    rep = json.loads((out / "mixing_report.json").read_text())
    assert rep["alpha"] == 0.0 and rep["rho"] == 0.0


def test_mixing_exact_alphabet_too_large(tmp_path):
    joint = [[1 / 34, 1 / 34]] * 17
    code, _ = run_cli(tmp_path, "mixing-exact", {"joint": joint})
    assert code == 2


def test_solve_rn_matches_oracle(tmp_path):
    code, out = run_cli(tmp_path, "solve-rn", {"process": IID_NORMAL, "n": 100}, "--reps", "2000")
    assert code == 0
    res = json.loads((out / "rn_solve.json").read_text())
    assert abs(res["sigma_hat"] - 1) <= 0.02
    band = 0.02 + 3 * res["sigma_se"]
    assert normal_rn_oracle(100, 1 + band) <= res["r_n"] <= normal_rn_oracle(100, 1 - band)
    assert res["replicate_count"] == 2000


def test_solve_rn_below_threshold_exit_4(tmp_path, capsys):
    code, out = run_cli(tmp_path, "solve-rn", {"process": IID_NORMAL, "n": 1}, "--reps", "500")
    assert code == 4
    assert "BelowThresholdError" in capsys.readouterr().err
    assert not out.exists()


def test_schema_violation_points_at_field(tmp_path, capsys):
    bad = {"process": {"process": "iid", "marginal": {"dist": "normal", "sd": -1}}}
    code, _ = run_cli(tmp_path, "solve-rn", bad)
    assert code == 2
    assert "$.process.marginal.sd" in capsys.readouterr().err


@pytest.mark.parametrize("config", [
    {"process": {"process": "ar1", "phi": 1.5}},
    {"process": {"process": "iid"}},
    {"process": IID_NORMAL, "n": 0},
    {"process": IID_NORMAL, "bogus": 1},
])
def test_config_errors(tmp_path, config):
    assert run_cli(tmp_path, "solve-rn", config)[0] == 2


def test_missing_config_file(tmp_path):
    assert cli.main(["gfun", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o")]) == 2


def test_clt_run_chain_rejected_at_gate(tmp_path, capsys):
    code, _ = run_cli(tmp_path, "clt-run", {"process": {"process": "cancellation", "lambda": 0.4},
                                            "n_grid": [100]})
    assert code == 4
    assert "[gate]" in capsys.readouterr().err


def test_cancellation_demo_cli(tmp_path):
    code, out = run_cli(tmp_path, "cancellation-demo", {"lambda": 0.4, "n": 100, "r": 1.0})
    assert code == 0
    rep = json.loads((out / "cancellation.json").read_text())
    assert rep["zero_frequency"] >= 0.6 - 3 * rep["zero_frequency_se"]
    assert rep["inclusion_holds"]


def test_identity_suite_cli(tmp_path, capsys):
    code, out = run_cli(tmp_path, "identity-suite", {"trials": 5000})
    assert code == 0
    printed = capsys.readouterr().out.splitlines()
    assert printed and all(line.startswith("PASS") for line in printed)
    assert json.loads((out / "identity_suite.json").read_text())["all_passed"]


def test_manifest_digests_and_rerun(tmp_path):
    cfg = {"process": IID_NORMAL, "n_grid": [100, 200], "reps": 500}
    code, out = run_cli(tmp_path, "clt-run", cfg)
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 0 and manifest["config"]["reps"] == 500
    for entry in manifest["files"]:
        data = (out / entry["file"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]
        assert entry["provenance"]
    assert "standardized_sums_n200.csv" in {e["file"] for e in manifest["files"]}

    again = tmp_path / "again"
    assert cli.main(["rerun", str(out / "manifest.json"), "--out", str(again),
                     "--workers", "3"]) == 0
    assert read_dir(out) == read_dir(again)


def test_workers_do_not_change_outputs(tmp_path):
    cfg = {"process": {"process": "ar1", "phi": 0.5}, "n": 300, "reps": 700}
    code1, out1 = run_cli(tmp_path, "solve-rn", cfg, "--workers", "1", name="w1")
    code4, out4 = run_cli(tmp_path, "solve-rn", cfg, "--workers", "4", name="w4")
    assert code1 == code4 == 0
    assert read_dir(out1) == read_dir(out4)


def test_flag_overrides_and_env_default(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["identity-suite", "--seed", "3"]) == 0
    manifest = json.loads((tmp_path / "env" / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 3


def test_rerun_rejects_bad_manifest(tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text(json.dumps({"command": "nope"}))
    assert cli.main(["rerun", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "shrinkclt", "shrink-eval", "--out",
                           str(tmp_path / "m")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "m" / "manifest.json").exists()
