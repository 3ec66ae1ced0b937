import csv
import io
import json

import pytest

from percroute import cli


def run(argv):
    out = io.StringIO()
    status = cli.dispatch(argv, out=out)
    return status, out.getvalue()


def test_default_sweep_one_row_per_n_and_trial(tmp_path):
    path = tmp_path / "sweep.csv"
    status, text = run(["sweep", "--config", "default", "--csv", str(path)])
    assert status == 0
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == 5 * 20
    assert [(float(r["n"]), int(r["trial"])) for r in rows] == [
        (n, t) for n in (500.0, 1000.0, 2000.0, 4000.0, 8000.0) for t in range(20)
    ]
    summary = json.loads(text)
    assert summary["config"]["c"] == 6.0 and summary["config"]["master_seed"] == 20240601


def test_yaml_config_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("c: 3.5\nkappa: 2.25\nn_values: [500, 1000, 2000]\ntrials: 1\nmaster_seed: 7\n")
    status, text = run(["sweep", "--config", str(cfg), "--master-seed", "8"])
    assert status == 0
    lines = text.splitlines()
    assert lines[0].startswith("n,trial,N_n")
    assert len(lines) == 1 + 3 + 1
    echo = json.loads(lines[-1])["config"]
    assert echo["master_seed"] == 8 and echo["kappa"] == 2.25 and echo["n_values"] == [500, 1000, 2000]


def test_unknown_config_field_named(tmp_path, capsys):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("c: 3.5\nspeed: 9\n")
    status, _ = run(["sweep", "--config", str(cfg)])
    assert status == cli.EXIT_INPUT
    assert "speed" in capsys.readouterr().err


def test_bad_yaml_and_missing_file(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("c: [1, 2\n")
    assert run(["sweep", "--config", str(bad)])[0] == cli.EXIT_INPUT
    assert run(["sweep", "--config", str(tmp_path / "none.yaml")])[0] == cli.EXIT_INPUT
    err = capsys.readouterr().err
    assert "not valid YAML" in err and "cannot read config" in err


def test_invalid_parameters_named(capsys):
    status, _ = run(["sweep", "--c", "1.0", "--trials", "1"])
    assert status == cli.EXIT_INPUT
    assert "beta" in capsys.readouterr().err


def test_unknown_flag_and_subcommand(capsys):
    assert run(["sweep", "--bogus"])[0] == 2
    assert run(["frobnicate"])[0] == 2
    assert "invalid choice" in capsys.readouterr().err


def test_percolation_stats_reference_case():
    status, text = run(["percolation-stats", "--n", "1e6", "--c", "6", "--kappa", "1", "--corridors", "20"])
    assert status == 0
    assert "m=4 prob_lower=0.9999992" in text
    assert "corridors=20" in text and "fraction>=m=" in text


def test_verify_sinr_reference_case(capsys):
    argv = ["verify-sinr", "--model", "B", "--d", "1", "--c", "1", "--alpha", "3", "--tau", "1", "--N0", "1"]
    status, text = run(argv)
    assert status == 0
    assert "P_min=121.026" in text
    assert "violations=0" in text and "interference_over_bound=0" in text
    header = [line for line in text.splitlines() if line.split()[:1] == ["slot"]][0]
    assert header.split() == ["slot", "link", "exact_sinr", "bound_sinr", "result"]
    assert capsys.readouterr().err == ""


def test_verify_sinr_reports_failures_below_min_power():
    status, text = run(["verify-sinr", "--model", "B", "--d", "2", "--c", "1", "--P", "1", "--worst-case"])
    assert status == 0  # power below P_min: violations expected, not an internal failure
    assert "violations=0" not in text and "FAIL" in text


def test_simulate_emits_config_and_per_path_csv(tmp_path):
    path = tmp_path / "paths.csv"
    status, text = run(["simulate", "--c", "3.5", "--kappa", "2.25", "--n", "800", "--csv", str(path)])
    assert status == 0
    doc = json.loads(text)
    assert doc["config"]["c"] == 3.5 and set(doc["models"]) == {"A", "B"}
    rows = list(csv.DictReader(path.open()))
    assert rows and {"drain_modelA", "relay_modelB", "rate_modelA"} <= set(rows[0])


def test_simulate_exact_sinr_flag():
    base = ["simulate", "--c", "3.5", "--kappa", "2.25", "--n", "800"]
    _, plain = run(base)
    status, text = run(base + ["--exact-sinr"])
    doc = json.loads(text)
    assert status == 0 and doc["config"]["exact_sinr"] is True
    assert json.loads(plain)["config"]["exact_sinr"] is False


def test_simulate_infeasible_model_b_power(capsys):
    status, _ = run(["simulate", "--c", "3.5", "--kappa", "2.25", "--n", "800", "--model", "B", "--P-modelB", "1"])
    assert status == cli.EXIT_INPUT
    assert "below the minimum" in capsys.readouterr().err


def test_load_stats(tmp_path):
    heat = tmp_path / "heat.csv"
    out_json = tmp_path / "load.json"
    argv = ["load-stats", "--n", "1000", "--corridors", "500", "--heatmap", str(heat), "--json", str(out_json)]
    status, text = run(argv)
    assert status == 0
    assert "L_max=" in text and "central cell hit fraction" in text
    assert heat.read_text().startswith("cell_x,cell_y,L")
    doc = json.loads(out_json.read_text())
    assert doc["config"]["c"] == 6.0 and doc["trials"][0]["L_max"] <= doc["trials"][0]["bound"]


def test_main_exits_with_status():
    with pytest.raises(SystemExit) as exc:
        cli.main(["sweep", "--trials", "0"])
    assert exc.value.code == cli.EXIT_INPUT
