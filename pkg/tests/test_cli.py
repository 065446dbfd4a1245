import json

import numpy as np
import pytest

from conftest import random_model_doc
from qsbrown.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, (json.loads(out) if out.strip() else None), err


# ---------------------------------------------------------------------------
# envelopes and determinism


def test_validate_report_envelope(capsys):
    code, report, _ = run_json(
        capsys, "validate", "--preset", "oconnell_yor", "--K", "3", "--mu", "2"
    )
    assert code == 0
    assert report["tool"] == "qsbrown"
    assert report["command"] == "validate"
    assert "spec_hash" in report and "generated_at" in report
    assert report["payload"]["passed"] is True


def test_no_timestamp_is_byte_identical(capsys, tmp_path):
    f1, f2 = tmp_path / "a.json", tmp_path / "b.json"
    args = [
        "simulate", "--preset", "oconnell_yor", "--K", "2", "--mu", "2",
        "--paths", "50", "--dt", "1e-2", "--horizon", "0.1", "--record", "0.1",
        "--seed", "5", "--no-timestamp",
    ]
    assert main(args + ["--out", str(f1)]) == 0
    assert main(args + ["--out", str(f2)]) == 0
    capsys.readouterr()
    assert f1.read_bytes() == f2.read_bytes()
    assert b"generated_at" not in f1.read_bytes()


def test_catalog_lists_presets(capsys):
    code, report, _ = run_json(capsys, "catalog", "--no-timestamp")
    assert code == 0
    names = [p["name"] for p in report["payload"]["presets"]]
    assert names == ["beta_tasep", "free", "oconnell_yor"]


# ---------------------------------------------------------------------------
# exit codes


def test_validation_failure_is_exit_one(capsys, tmp_path, rng):
    doc = random_model_doc(rng, 3, 1)
    doc["covariance"]["data"][0][0] += 1e-3
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(doc))
    code, report, _ = run_json(capsys, "validate", "--model", str(path), "--no-timestamp")
    assert code == 1
    assert report["payload"]["passed"] is False


def test_missing_model_is_exit_two(capsys):
    code, _, err = run(capsys, "validate")
    assert code == 2
    assert "model" in err


def test_both_model_sources_is_exit_two(capsys, tmp_path):
    path = tmp_path / "m.json"
    path.write_text("{}")
    code, _, err = run(capsys, "validate", "--preset", "free", "--model", str(path))
    assert code == 2


def test_bad_record_is_exit_two(capsys):
    code, _, err = run(
        capsys, "simulate", "--preset", "free", "--K", "2", "--record", "0.1,zz"
    )
    assert code == 2
    assert "record" in err


def test_gate_violation_is_exit_two(capsys):
    code, _, err = run(
        capsys, "measure", "--preset", "beta_tasep", "--K", "3", "--beta", "4", "--mu", "1"
    )
    assert code == 2
    assert "ParameterOutOfRange" in err


def test_divergent_measure_is_exit_three(capsys):
    code, _, err = run(capsys, "measure", "--preset", "free", "--K", "3")
    assert code == 3
    assert "DivergentIntegral" in err


def test_bad_init_support_is_exit_three(capsys):
    code, _, err = run(
        capsys, "simulate", "--preset", "beta_tasep", "--K", "2", "--beta", "6",
        "--mu", "1", "--paths", "10", "--dt", "1e-2", "--horizon", "0.1",
        "--init-zeros",
    )
    assert code == 3
    assert "SupportViolation" in err


def test_unwritable_out_is_exit_two(capsys):
    code, _, err = run(
        capsys, "nu", "--preset", "free", "--K", "2", "--out", "/nonexistent/x.json"
    )
    assert code == 2


def test_unknown_subcommand_exits_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "qsbrown" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# payloads and files


def test_nu_payload(capsys):
    code, report, _ = run_json(
        capsys, "nu", "--preset", "beta_tasep", "--K", "4", "--beta", "6", "--mu", "1",
        "--no-timestamp",
    )
    assert code == 0
    assert report["payload"]["values"] == [0.0, 0.0, 0.0, 0.0]
    assert report["payload"]["residual"] <= 1e-10


def test_measure_payload(capsys):
    code, report, _ = run_json(
        capsys, "measure", "--preset", "oconnell_yor", "--K", "3", "--mu", "2",
        "--k", "1", "--no-timestamp",
    )
    assert code == 0
    rows = report["payload"]["measures"]
    assert len(rows) == 1 and rows[0]["k"] == 1
    assert rows[0]["Z"] == pytest.approx(1.0, rel=1e-7)


def test_sample_csv_deterministic(capsys, tmp_path):
    f1, f2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
    args = [
        "sample", "--preset", "beta_tasep", "--K", "3", "--beta", "6", "--mu", "1",
        "--n", "20", "--seed", "9",
    ]
    assert main(args + ["--out", str(f1)]) == 0
    assert main(args + ["--out", str(f2)]) == 0
    capsys.readouterr()
    assert f1.read_bytes() == f2.read_bytes()
    lines = f1.read_text().strip().splitlines()
    assert lines[0] == "y_1"
    assert len(lines) == 21
    assert all(float(v) > 0 for v in lines[1:])


def test_sample_initial_states(capsys):
    code, out, _ = run(
        capsys, "sample", "--preset", "oconnell_yor", "--K", "3", "--mu", "2",
        "--what", "init", "--n", "5",
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "x_1,x_2,x_3"
    assert len(lines) == 6
    assert all(line.split(",")[0] == "0" for line in lines[1:])


def test_simulate_paths_csv(capsys, tmp_path):
    csv = tmp_path / "paths.csv"
    code, report, _ = run_json(
        capsys, "simulate", "--preset", "oconnell_yor", "--K", "2", "--mu", "2",
        "--paths", "7", "--dt", "1e-2", "--horizon", "0.2", "--record", "0.1,0.2",
        "--seed", "3", "--csv", str(csv), "--no-timestamp",
    )
    assert code == 0
    lines = csv.read_text().strip().splitlines()
    assert lines[0] == "path,time,x_1,x_2"
    assert len(lines) == 1 + 7 * 2
    first = lines[1].split(",")
    assert first[0] == "0" and float(first[1]) == 0.1
    assert report["payload"]["paths_csv"] == str(csv)


def test_simulate_init_file(capsys, tmp_path):
    init = tmp_path / "init.csv"
    init.write_text("0.0,-1.0\n")
    code, report, _ = run_json(
        capsys, "simulate", "--preset", "oconnell_yor", "--K", "2", "--mu", "2",
        "--paths", "20", "--dt", "1e-2", "--horizon", "0.1", "--record", "0",
        "--init-file", str(init), "--no-timestamp",
    )
    assert code == 0
    mean0 = report["payload"]["mean"][0]
    assert mean0 == pytest.approx([0.0, -1.0], abs=1e-12)


def test_test_qs_subcommand_passes(capsys):
    code, report, _ = run_json(
        capsys, "test-qs", "--preset", "oconnell_yor", "--K", "2", "--mu", "2",
        "--paths", "3000", "--dt", "1e-3", "--horizon", "0.2", "--record", "0.2",
        "--seed", "12", "--no-timestamp",
    )
    assert code == 0
    assert report["payload"]["passed"] is True


def test_test_consistency_subcommand(capsys):
    code, report, _ = run_json(
        capsys, "test-consistency", "--preset", "oconnell_yor", "--K", "3", "--mu", "2",
        "--J", "2", "--paths", "2000", "--dt", "2e-3", "--horizon", "0.2",
        "--record", "0.2", "--seed", "12", "--no-timestamp",
    )
    assert code == 0
    assert report["payload"]["passed"] is True


def test_generator_check_subcommand(capsys):
    code, report, _ = run_json(
        capsys, "generator-check", "--preset", "oconnell_yor", "--K", "2", "--mu", "2",
        "--f", "x1", "--paths", "2000", "--dt", "2e-3", "--horizon", "0.2",
        "--seed", "12", "--record-points", "21", "--no-timestamp",
    )
    assert code == 0
    assert report["payload"]["passed"] is True
    assert report["payload"]["meta"]["f"] == "x1"


def test_generator_check_rejects_unknown_observable(capsys):
    code, _, err = run(
        capsys, "generator-check", "--preset", "oconnell_yor", "--K", "2", "--mu", "2",
        "--f", "y9",
    )
    assert code == 2
    assert "coordinate" in err
