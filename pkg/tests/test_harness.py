import json

import numpy as np
import pytest

from bohmscatter.cli import main as cli_main
from bohmscatter.harness import (
    ConfigError,
    ExperimentConfig,
    PhysicsError,
    oracle_csv,
    run_experiment,
    scaling_study,
    write_outputs,
)
from conftest import smoke_config_dict


def test_config_validation_rejects_unknown_keys():
    d = smoke_config_dict()
    d["grid"]["typo"] = 1
    with pytest.raises(ConfigError, match="unknown key grid.typo"):
        ExperimentConfig.from_dict(d)
    d = smoke_config_dict()
    d["mystery"] = {}
    with pytest.raises(ConfigError, match="unknown section"):
        ExperimentConfig.from_dict(d)


def test_config_validation_field_messages():
    d = smoke_config_dict()
    del d["potential"]
    with pytest.raises(ConfigError, match="missing section 'potential'"):
        ExperimentConfig.from_dict(d)

    d = smoke_config_dict()
    d["detector"]["radii"] = [20.0]
    with pytest.raises(ConfigError, match="boundary shell"):
        ExperimentConfig.from_dict(d)

    d = smoke_config_dict()
    d["evolution"]["dt"] = 0.5
    with pytest.raises(ConfigError, match="stability bound"):
        ExperimentConfig.from_dict(d)

    d = smoke_config_dict()
    d["packet"]["sigma"] = 4.0
    with pytest.raises(ConfigError, match="too wide"):
        ExperimentConfig.from_dict(d)

    d = smoke_config_dict()
    d["beam"]["d_cut"] = 11.0
    with pytest.raises(ConfigError, match="outer nodes"):
        ExperimentConfig.from_dict(d)


def test_config_hash_stable_and_seed_override():
    a = ExperimentConfig.from_dict(smoke_config_dict())
    b = ExperimentConfig.from_dict(smoke_config_dict())
    assert a.config_hash() == b.config_hash()
    c = a.with_seed(123)
    assert c.seed == 123
    assert c.config_hash() != a.config_hash()


def test_bound_state_rejection():
    d = smoke_config_dict(v0=-3.0)
    cfg = ExperimentConfig.from_dict(d)
    with pytest.raises(PhysicsError, match="bound state"):
        run_experiment(cfg, with_diagnostics=False, with_lln=False)


def test_smoke_report_structure(smoke_report, smoke_config):
    data = smoke_report.data
    assert data["provenance"]["config_hash"] == smoke_config.config_hash()
    assert data["provenance"]["seed"] == 7
    bins = data["sigma"]["bins"]
    assert len(bins) == 7
    for b in bins:
        assert set(b) >= {"sigma_emp", "sigma_emp_se", "sigma_pw", "sigma_born", "ratio_emp_pw"}
    diag = data["diagnostics"]
    assert len(diag["equivariance"]) == 3
    assert diag["norm_drift"] < 1e-9
    assert "fast" in diag and "n_minus_trend" in diag and "prop4" in diag
    assert "lln" in data
    assert -0.75 < data["lln"]["fitted_exponent"] < -0.25
    assert data["gates"]["passed"] in (True, False)


def test_sigma_csv_exact_header(smoke_report):
    csv = smoke_report.sigma_csv()
    assert csv.splitlines()[0] == (
        "bin_id,theta_lo_deg,theta_hi_deg,phi_lo_deg,phi_hi_deg,"
        "sigma_emp,sigma_emp_se,sigma_pw,sigma_born,ratio_emp_pw"
    )
    assert len(csv.splitlines()) == 8


def test_write_outputs(tmp_path, smoke_report, smoke_config):
    paths = write_outputs(smoke_report, tmp_path / "out", amp_csv=oracle_csv(smoke_config))
    for key in ("report", "sigma", "flux", "oracle"):
        assert key in paths
    flux_lines = (tmp_path / "out" / "flux.csv").read_text().splitlines()
    assert flux_lines[0] == (
        "bin_id,theta_lo,theta_hi,phi_lo,phi_hi,signed_flux,abs_flux,cone_integral,rel_diff"
    )
    assert flux_lines[-1].startswith("-2,")
    oracle_lines = (tmp_path / "out" / "oracle.csv").read_text().splitlines()
    assert oracle_lines[0] == "theta_deg,re_f,im_f,sigma_diff"


def test_determinism_same_seed_bitwise(smoke_config, smoke_report):
    rep2 = run_experiment(smoke_config, workers=1)
    assert rep2.to_json() == smoke_report.to_json()
    assert rep2.sigma_csv() == smoke_report.sigma_csv()


def test_determinism_parallel_equals_serial(smoke_config, smoke_report):
    rep_par = run_experiment(smoke_config, workers=2)
    assert rep_par.to_json() == smoke_report.to_json()


def test_seed_changes_results(smoke_config, smoke_report):
    other = run_experiment(smoke_config.with_seed(8), workers=1, with_diagnostics=False, with_lln=False)
    a = [n["p_det"] for n in other.data["sigma"]["nodes"]]
    b = [n["p_det"] for n in smoke_report.data["sigma"]["nodes"]]
    assert a != b


def test_scaling_degenerate_schedule_matches_run(smoke_config, smoke_report):
    table = scaling_study(smoke_config, [0.5], [8.0], workers=1)
    assert len(table["rows"]) == 1
    row = table["rows"][0]
    assert row["bins"] == smoke_report.data["sigma"]["bins"]


def test_cli_run_and_exit_codes(tmp_path, smoke_json):
    out = tmp_path / "cli_out"
    rc = cli_main(["run", "--config", str(smoke_json), "--out", str(out)])
    assert rc == 0
    assert (out / "report.json").exists()
    assert (out / "sigma.csv").exists()

    # byte-identical re-run
    first = (out / "report.json").read_bytes()
    rc = cli_main(["run", "--config", str(smoke_json), "--out", str(out)])
    assert rc == 0
    assert (out / "report.json").read_bytes() == first

    # invalid config -> 2
    bad = tmp_path / "bad.json"
    d = smoke_config_dict()
    d["grid"]["n"] = 33
    bad.write_text(json.dumps(d))
    assert cli_main(["run", "--config", str(bad), "--out", str(out)]) == 2

    # bound state -> 3
    bound = tmp_path / "bound.json"
    d = smoke_config_dict(v0=-3.0)
    bound.write_text(json.dumps(d))
    assert cli_main(["run", "--config", str(bound), "--out", str(out)]) == 3


def test_cli_oracle_only(tmp_path, smoke_json):
    out = tmp_path / "oracle_out"
    rc = cli_main(["oracle", "--config", str(smoke_json), "--out", str(out)])
    assert rc == 0
    assert (out / "oracle.csv").exists()
    assert not (out / "report.json").exists()


def test_cli_lln_from_report(tmp_path, smoke_json, smoke_report):
    out = tmp_path / "lln_out"
    rep_path = tmp_path / "report.json"
    rep_path.write_text(smoke_report.to_json())
    rc = cli_main(["lln", "--config", str(smoke_json), "--from-report", str(rep_path), "--out", str(out)])
    assert rc == 0
    payload = json.loads((out / "lln.json").read_text())
    assert -0.75 < payload["fitted_exponent"] < -0.25
