import json
import subprocess
import sys

import numpy as np
import pytest

from tumordelay.cli import Sweep, main, parse_value
from tumordelay.errors import DomainError
from tumordelay.profile import read_columns


def test_parse_single_and_sweep():
    assert parse_value("2.5").values().tolist() == [2.5]
    assert parse_value("0:1:3").values().tolist() == [0.0, 0.5, 1.0]
    assert parse_value("1:100:3", log=True).values() == pytest.approx([1, 10, 100])


@pytest.mark.parametrize("text", ["1:2", "a", "2:1:3", "1:2:0", "1:2:1.5"])
def test_parse_rejects(text):
    with pytest.raises(DomainError):
        parse_value(text)


def test_log_sweep_needs_positive_minimum():
    with pytest.raises(DomainError):
        Sweep(0.0, 1.0, 3, log=True)


def test_stationary_writes_files(tmp_path):
    out = tmp_path / "st"
    assert main(["stationary", "--out", str(out)]) == 0
    report = json.loads(out.with_suffix(".json").read_text())
    assert report["r0"] == pytest.approx(1.4900673023229442, rel=1e-14)
    cols = read_columns(tmp_path / "st_profiles.csv")
    assert len(cols["r"]) == 1024


def test_stationary_delayed_writes_delayed_profile(tmp_path):
    out = tmp_path / "d"
    assert main(["stationary", "--tau", "0.02", "--out", str(out)]) == 0
    assert (tmp_path / "d_delayed.csv").exists()
    assert json.loads(out.with_suffix(".json").read_text())["r_delayed"] > 1.49


def test_no_stationary_radius_exit_code(tmp_path, capsys):
    assert main(["stationary", "--sigma-tilde", "1.5", "--out", str(tmp_path / "x")]) == 2
    assert "no stationary radius" in capsys.readouterr().err


def test_delay_too_large_exit_code(tmp_path, capsys):
    # first failure when doubling tau from 0.05
    assert main(["stationary", "--tau", "12.8", "--out", str(tmp_path / "x")]) == 3
    assert "delay too large" in capsys.readouterr().err


def test_invalid_number_exit_code(tmp_path):
    assert main(["stationary", "--alpha", "-1", "--out", str(tmp_path / "x")]) == 2
    assert main(["simulate", "--dt", "0.3", "--tau", "0.1", "--out", str(tmp_path / "x")]) == 2


def test_threshold_map(tmp_path):
    out = tmp_path / "map"
    assert main(["threshold-map", "--alpha", "0.05:50:200", "--log", "--r0", "3", "--out", str(out)]) == 0
    cols = read_columns(out.with_suffix(".csv"))
    assert len(cols["mu_star"]) == 200
    assert np.all(np.diff(cols["mu_star"]) < 0)
    assert np.all(cols["mu_star_decreasing"] == 1)
    meta = json.loads(out.with_suffix(".json").read_text())
    assert meta["critical_radius"] == pytest.approx(2.412305, abs=1e-5)


def test_threshold_map_single_point(tmp_path):
    out = tmp_path / "one"
    assert main(["threshold-map", "--alpha", "1", "--out", str(out)]) == 0
    assert len(read_columns(out.with_suffix(".csv"))["alpha"]) == 1


def test_modes_command(tmp_path):
    out = tmp_path / "m"
    assert main(["modes", "--modes", "1,2", "--t-end", "2", "--dt", "0.1", "--out", str(out)]) == 0
    cols = read_columns(out.with_suffix(".csv"))
    assert len(cols["t"]) == 42
    meta = json.loads(out.with_suffix(".json").read_text())
    assert meta["mode1_mu_n"] == "inf"
    assert abs(meta["mode1_rate"]) < 1e-14


def test_simulate_command(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--r-init", "1.2", "--t-end", "1", "--dt", "0.01", "--out", str(out)]) == 0
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["step_count"] == 100
    cols = read_columns(out.with_suffix(".csv"))
    assert cols["radius"][-1] == summary["limit_radius"]


def test_json_format(tmp_path):
    out = tmp_path / "j"
    assert main(["threshold-map", "--alpha", "1:2:3", "--r0", "2", "--format", "json", "--out", str(out)]) == 0
    payload = json.loads(out.with_suffix(".json").read_text())
    assert len(payload["rows"]) == 3
    assert not out.with_suffix(".csv").exists()


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("alpha = 2  # angiogenesis\nsigma-tilde = 0.3\nmu = 5\n")
    out = tmp_path / "c"
    assert main(["stationary", "--config", str(cfg), "--mu", "2", "--out", str(out)]) == 0
    rep = json.loads(out.with_suffix(".json").read_text())
    assert rep["param_alpha"] == 2.0 and rep["param_sigma_tilde"] == 0.3 and rep["param_mu"] == 2.0


def test_missing_config(tmp_path):
    assert main(["stationary", "--config", str(tmp_path / "none.cfg"), "--out", str(tmp_path / "x")]) == 2


def test_parameter_sweep_parallel_matches_serial(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["stationary", "--alpha", "0.5:2:4", "--out", str(a)]) == 0
    assert main(["stationary", "--alpha", "0.5:2:4", "--jobs", "2", "--out", str(b)]) == 0
    assert a.with_suffix(".csv").read_text() == b.with_suffix(".csv").read_text()


def test_unsupported_sweep(tmp_path):
    assert main(["simulate", "--alpha", "1:2:3", "--out", str(tmp_path / "x")]) == 2


def test_verify_exit_codes(tmp_path, capsys):
    out = tmp_path / "v"
    assert main(["verify", "--out", str(out)]) == 0
    report = json.loads(out.with_suffix(".json").read_text())
    assert report["all_passed"] is True
    assert main(["verify", "--inject-fault", "pn-seed", "--out", str(out)]) == 1
    assert "FAIL pn_matches_bessel_ratio" in capsys.readouterr().out


def test_csv_round_trip_17_digits(tmp_path):
    out = tmp_path / "st"
    main(["stationary", "--out", str(out)])
    text = (tmp_path / "st_profiles.csv").read_text().splitlines()
    cols = read_columns(tmp_path / "st_profiles.csv")
    first = text[2].split(",")
    assert [float(v) for v in first] == [cols[k][1] for k in cols]
    assert all(f"{float(v):.17g}" == v for v in first)


def test_deterministic_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["modes", "--t-end", "1", "--dt", "0.1", "--out", str(a)])
    main(["modes", "--t-end", "1", "--dt", "0.1", "--out", str(b)])
    assert a.with_suffix(".csv").read_bytes() == b.with_suffix(".csv").read_bytes()
    assert a.with_suffix(".json").read_bytes() == b.with_suffix(".json").read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "tumordelay", "threshold-map", "--alpha", "1",
                           "--out", str(tmp_path / "m")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "m.csv").exists()
