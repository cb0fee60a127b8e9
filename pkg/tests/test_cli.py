"""Command-line interface: flag parsing, exit codes, file outputs."""

import json
import time

import pytest

from gpforge.cli import main


def run(capsys, *argv):
    rc = main(list(argv))
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


def test_bounds_ciq_worked_example(capsys):
    rc, out, _ = run(
        capsys,
        "bounds", "--method", "ciq", "--n", "1000", "--eps", "0.1",
        "--noise-variance", "0.1", "--delta-q", "0.001",
    )
    assert rc == 0
    doc = json.loads(out)
    assert doc["method"] == "ciq"
    assert doc["Q"] == 5
    assert isinstance(doc["J"], int) and doc["J"] >= 1
    assert doc["kappa_bound"] > 1.0
    assert doc["regime"] in {"i", "ii", "iii"}
    assert doc["D"] is None


def test_bounds_rff_reports_feature_count(capsys):
    rc, out, _ = run(
        capsys,
        "bounds", "--method", "rff", "--n", "100", "--eps", "0.1",
        "--delta", "0.01", "--noise-variance", "1.0",
    )
    assert rc == 0
    assert json.loads(out)["D"] == 6907756


def test_bounds_missing_required_flag_exits_two(capsys):
    with pytest.raises(SystemExit) as info:
        main(["bounds", "--method", "ciq"])
    assert info.value.code == 2


def test_bounds_json_flag_single_line(capsys):
    rc, out, _ = run(
        capsys, "bounds", "--method", "exact", "--n", "64", "--eps", "0.5", "--json"
    )
    assert rc == 0
    assert len(out.strip().splitlines()) == 1
    assert json.loads(out)["n"] == 64


def test_bounds_delta_q_cap_violation_exits_two(capsys):
    rc, _, err = run(
        capsys,
        "bounds", "--method", "ciq", "--n", "1000", "--eps", "0.1", "--delta-q", "0.9",
    )
    assert rc == 2
    assert "delta_Q" in err


def test_bounds_invalid_kernel_flag_exits_two(capsys):
    rc, _, err = run(
        capsys,
        "bounds", "--method", "exact", "--n", "64", "--eps", "0.5", "--variance", "-1",
    )
    assert rc == 2
    assert "error:" in err


def test_sample_exact_byte_identical(tmp_path, capsys):
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    for out in (out_a, out_b):
        rc, _, _ = run(
            capsys,
            "sample", "--method", "exact", "--n", "8", "--seed", "4",
            "--output", str(out),
        )
        assert rc == 0
    assert out_a.read_bytes() == out_b.read_bytes()
    lines = out_a.read_text().splitlines()
    assert lines[0] == "index,y"
    assert len(lines) == 9


def test_sample_rff_odd_feature_count_exits_two(tmp_path, capsys):
    rc, _, err = run(
        capsys,
        "sample", "--method", "rff", "--n", "8", "--features", "7",
        "--output", str(tmp_path / "s.csv"),
    )
    assert rc == 2
    assert "error: --features must be an even count >= 2, got 7" in err


def test_sample_rff_requires_features_flag(tmp_path, capsys):
    rc, _, err = run(
        capsys,
        "sample", "--method", "rff", "--n", "8", "--output", str(tmp_path / "s.csv"),
    )
    assert rc == 2
    assert "--features" in err


def test_sample_ciq_default_fidelity_golden(tmp_path, capsys):
    """Omitting the quadrature flags fills them from the calculators;
    the sidecar records the filled values."""
    out = tmp_path / "c.csv"
    rc, _, _ = run(
        capsys,
        "sample", "--method", "ciq", "--n", "16", "--seed", "3", "--output", str(out),
    )
    assert rc == 0
    sidecar = json.loads((tmp_path / "c.csv.json").read_text())
    assert sidecar["method"] == "ciq"
    assert sidecar["fidelity"]["eta"] == 0.5
    assert sidecar["fidelity"]["Q"] == 2
    assert sidecar["fidelity"]["J"] == 63
    assert sidecar["seed"] == 3
    assert sidecar["n"] == 16


def test_sample_unwritable_output_exits_one(capsys):
    rc, _, err = run(
        capsys,
        "sample", "--method", "exact", "--n", "4",
        "--output", "/nonexistent_dir_for_test/out.csv",
    )
    assert rc == 1
    assert "error:" in err


def test_sample_seed_env_override(tmp_path, capsys, monkeypatch):
    """GPFORGE_SEED takes precedence over the --seed flag."""
    plain = tmp_path / "plain.csv"
    rc, _, _ = run(
        capsys, "sample", "--method", "exact", "--n", "8", "--seed", "5",
        "--output", str(plain),
    )
    assert rc == 0
    overridden = tmp_path / "env.csv"
    monkeypatch.setenv("GPFORGE_SEED", "5")
    rc, _, _ = run(
        capsys, "sample", "--method", "exact", "--n", "8", "--seed", "0",
        "--output", str(overridden),
    )
    assert rc == 0
    assert plain.read_bytes() == overridden.read_bytes()


def test_sample_bad_seed_env_exits_two(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("GPFORGE_SEED", "not-a-number")
    rc, _, err = run(
        capsys,
        "sample", "--method", "exact", "--n", "4", "--output", str(tmp_path / "s.csv"),
    )
    assert rc == 2
    assert "GPFORGE_SEED" in err


def test_verify_round_trip_accepts_faithful_sample(tmp_path, capsys):
    out = tmp_path / "v.csv"
    rc, _, _ = run(
        capsys,
        "sample", "--method", "exact", "--n", "32", "--seed", "6", "--output", str(out),
    )
    assert rc == 0
    rc, stdout, _ = run(capsys, "verify", "--sample", str(out))
    assert rc == 0
    doc = json.loads(stdout)
    assert doc["reject"] is False
    assert doc["critical_value"] == 0.461
    assert 0.0 < doc["statistic"] < 0.461


def test_verify_missing_sidecar_exits_two(tmp_path, capsys):
    sample = tmp_path / "lonely.csv"
    sample.write_text("index,y\n0,1.0\n")
    rc, _, err = run(capsys, "verify", "--sample", str(sample))
    assert rc == 2
    assert "sidecar" in err


def test_experiment_minimal_completes_quickly(tmp_path, capsys):
    out = tmp_path / "exp.csv"
    start = time.monotonic()
    rc, _, _ = run(
        capsys,
        "experiment", "--method", "exact", "--n-list", "64", "--repeats", "50",
        "--base-seed", "1", "--output", str(out), "--threads", "1",
    )
    elapsed = time.monotonic() - start
    assert rc == 0
    assert elapsed < 10.0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("n,fidelity,rate")
    assert len(lines) == 2
    assert (tmp_path / "exp.csv.json").exists()


def test_experiment_row_count_matches_grid(tmp_path, capsys):
    out = tmp_path / "grid.csv"
    rc, _, _ = run(
        capsys,
        "experiment", "--method", "rff", "--n-list", "8,16",
        "--fidelity-grid", "4,8", "--repeats", "5", "--base-seed", "2",
        "--output", str(out), "--threads", "1",
    )
    assert rc == 0
    assert len(out.read_text().splitlines()) == 1 + 2 * 2


def test_experiment_rerun_reproduces_bytes(tmp_path, capsys):
    args = (
        "experiment", "--method", "rff", "--n-list", "16",
        "--fidelity-grid", "8", "--repeats", "20", "--base-seed", "9",
        "--threads", "2",
    )
    out_a = tmp_path / "ra.csv"
    out_b = tmp_path / "rb.csv"
    assert run(capsys, *args, "--output", str(out_a))[0] == 0
    assert run(capsys, *args, "--output", str(out_b))[0] == 0
    assert out_a.read_bytes() == out_b.read_bytes()


def test_experiment_config_file_with_flag_override(tmp_path, capsys):
    config = tmp_path / "cfg.json"
    config.write_text(
        json.dumps(
            {
                "schema_version": 1,
                "method": "rff",
                "n_list": [8],
                "fidelity_grid": [4],
                "repeats": 5,
                "base_seed": 3,
                "params": {"lengthscale": 0.5},
            }
        )
    )
    out = tmp_path / "from_cfg.csv"
    rc, _, _ = run(
        capsys,
        "experiment", "--config", str(config), "--repeats", "6",
        "--output", str(out), "--threads", "1",
    )
    assert rc == 0
    assert out.read_text().splitlines()[1].split(",")[5] == "6"


def test_experiment_unknown_config_field_exits_two(tmp_path, capsys):
    config = tmp_path / "bad.json"
    config.write_text(
        json.dumps({"schema_version": 1, "method": "exact", "n_list": [8], "bogus": 1})
    )
    rc, _, err = run(
        capsys,
        "experiment", "--config", str(config), "--output", str(tmp_path / "o.csv"),
    )
    assert rc == 2
    assert "bogus" in err


def test_experiment_wrong_schema_version_exits_two(tmp_path, capsys):
    config = tmp_path / "old.json"
    config.write_text(json.dumps({"schema_version": 2, "method": "exact", "n_list": [8]}))
    rc, _, err = run(
        capsys,
        "experiment", "--config", str(config), "--output", str(tmp_path / "o.csv"),
    )
    assert rc == 2
    assert "schema_version" in err


def test_experiment_failed_cell_warns_but_succeeds(tmp_path, capsys):
    out = tmp_path / "warn.csv"
    rc, _, err = run(
        capsys,
        "experiment", "--method", "rff", "--n-list", "8",
        "--fidelity-grid", "nan,8", "--repeats", "5", "--base-seed", "1",
        "--output", str(out), "--threads", "1",
    )
    assert rc == 0
    assert "warning:" in err
    assert len(out.read_text().splitlines()) == 3


def test_precond_sweep_grid_shape_and_determinism(tmp_path, capsys):
    args = (
        "precond-sweep", "--n-list", "16,24,32",
        "--lengthscales", "0.05,0.1,0.2,0.3,0.5,0.8,1,2,5,10", "--seed", "4",
    )
    out_a = tmp_path / "sa.csv"
    out_b = tmp_path / "sb.csv"
    assert run(capsys, *args, "--output", str(out_a))[0] == 0
    assert run(capsys, *args, "--output", str(out_b))[0] == 0
    lines = out_a.read_text().splitlines()
    assert lines[0] == "n,lengthscale,metric"
    assert len(lines) == 31
    assert out_a.read_bytes() == out_b.read_bytes()
