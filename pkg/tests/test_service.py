import json
from pathlib import Path

import numpy as np
import pytest

import cli
from src.bandedge.service import execute
from src.core.artifacts import sha256_of
from src.core.errors import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, SearchError
from src.core.scenario import scenario_for


def _data(path: Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", comments="#", ndmin=2)


def test_osc_run_writes_artifacts(tmp_path):
    scenario = scenario_for("osc", ["grid.tau_max=2", "osc.q0=2,1"])
    result = execute(scenario, out_dir=str(tmp_path))
    out = Path(result["out_dir"])
    assert out == tmp_path / "osc"
    csv = out / "oscillator_delta+0.csv"
    header = csv.read_text().splitlines()[:4]
    assert header[1] == "# columns: tau,population,B_re,B_im,mandel_q_2,mandel_q_1"
    assert "collective time" in header[3]
    data = _data(csv)
    assert data.shape == (201, 6)
    np.testing.assert_allclose(data[:, 4], data[:, 1] + 1.0, atol=1e-11)
    row = result["summary"]["oscillator"]["delta+0"]
    assert row["localized_fraction"] == pytest.approx(4.0 / 9.0, abs=1e-10)
    assert json.loads((out / "summary.json").read_text())["command"] == "osc"


def test_manifest_checksums(tmp_path):
    result = execute(scenario_for("spectrum", ["detuning.values=-1,0,1", "spectrum.points=101"]), out_dir=str(tmp_path))
    out = Path(result["out_dir"])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "spectrum"
    assert manifest["config"]["spectrum"]["points"] == 101
    assert manifest["checksums"]["spectrum.csv"] == sha256_of(out / "spectrum.csv")
    assert set(manifest["checksums"]) == {"spectrum.csv", "summary.json"}


def test_identical_runs_are_byte_identical(tmp_path):
    overrides = ["model.kind=free_space", "grid.tau_max=10", "ensemble.n_atoms=100",
                 "ensemble.n_realizations=16", "ensemble.chunk_size=4", "ensemble.snapshots=5", "run.seed=8"]
    first = execute(scenario_for("ensemble", overrides), out_dir=str(tmp_path / "a"))
    second = execute(scenario_for("ensemble", overrides), out_dir=str(tmp_path / "b"), workers=2)
    names = sorted(p.name for p in Path(first["out_dir"]).glob("*.csv"))
    assert names == [
        "ensemble_at_crossover_delta+0.csv",
        "ensemble_at_crossover_delta+0_delays.csv",
        "ensemble_at_crossover_delta+0_snapshot_t5.csv",
    ]
    for name in names:
        assert (Path(first["out_dir"]) / name).read_bytes() == (Path(second["out_dir"]) / name).read_bytes()
    manifest = json.loads((Path(first["out_dir"]) / "manifest.json").read_text())
    assert manifest["seeds"]["master_seed"] == 8
    assert manifest["seeds"]["chunk_size"] == 4


def test_free_space_meanfield_summary(tmp_path):
    scenario = scenario_for(
        "meanfield",
        ["model.kind=free_space", "grid.tau_max=15", "grid.dtau=0.005", "init.r=0.001", "run.convergence_check=true"],
    )
    row = execute(scenario, out_dir=str(tmp_path))["summary"]["meanfield"]["delta+0"]
    assert row["max_deviation_from_analytic"] < 1e-3
    assert row["dtau_halving_change"] < 1e-3
    assert row["final_j3"] == pytest.approx(-1.0, abs=1e-3)


def test_kernel_run_for_anisotropic_edge(tmp_path):
    scenario = scenario_for("kernel", ["model.kind=anisotropic", "kernel.lags=0.5,1,2"])
    result = execute(scenario, out_dir=str(tmp_path))
    data = _data(Path(result["out_dir"]) / "kernel_delta+0.csv")
    assert data.shape == (3, 6)
    assert "delta+0" in result["summary"]["kernel"]


def test_noise_run(tmp_path):
    overrides = ["grid.tau_max=2", "noise.n_terms=100", "noise.n_paths=10", "noise.lags=0.1,0.5", "run.seed=2"]
    result = execute(scenario_for("noise", overrides), out_dir=str(tmp_path))
    data = _data(Path(result["out_dir"]) / "autocorrelation.csv")
    assert data.shape == (2, 4)
    assert result["summary"]["noise"]["n_paths"] == 10


def test_free_space_oracle_compare(tmp_path):
    overrides = ["model.kind=free_space", "grid.tau_max=5", "grid.dtau=0.05", "oracle.n_modes=200"]
    result = execute(scenario_for("oracle-compare", overrides), out_dir=str(tmp_path))
    row = result["summary"]["oracle"]["results"]["delta+0"]
    assert row["max_abs_deviation"] < 2e-2
    assert row["calibration_mismatch"] < 1e-3
    assert not row["truncated"]


def test_cli_success(tmp_path, capsys):
    code = cli.main(["osc", "--set", "grid.tau_max=1", "--out", str(tmp_path), "--seed", "3"])
    assert code == EXIT_OK
    assert "OSC RESULTS" in capsys.readouterr().out
    manifest = json.loads((tmp_path / "osc" / "manifest.json").read_text())
    assert manifest["config"]["run"]["seed"] == 3


def test_cli_config_file(tmp_path):
    scenario = tmp_path / "run.ini"
    scenario.write_text("[run]\ncommand = spectrum\n\n[spectrum]\npoints = 11\n")
    assert cli.main(["spectrum", "--config", str(scenario), "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "spectrum" / "spectrum.csv").exists()


@pytest.mark.parametrize(
    "argv",
    [
        ["kernel", "--set", "model.kind=free_space"],
        ["osc", "--set", "grid.bogus=1"],
        ["osc", "--set", "no_dot=1"],
        ["osc", "--config", "missing.ini"],
        [],
    ],
)
def test_cli_configuration_errors(tmp_path, argv):
    if argv:
        argv = argv + ["--out", str(tmp_path)]
    assert cli.main(argv) == EXIT_CONFIG


def test_cli_numeric_failure(tmp_path, monkeypatch):
    def fail(*_args, **_kwargs):
        raise SearchError("no sign change")

    monkeypatch.setattr(cli, "execute", fail)
    assert cli.main(["transparent", "--out", str(tmp_path)]) == EXIT_NUMERIC


def test_cli_overrides_from_flags():
    args = cli.build_parser().parse_args(
        ["oracle-compare", "--case", "gain", "--seed", "5", "--workers", "2", "--convergence-check"]
    )
    overrides = cli.build_overrides(args)
    assert overrides == [
        "run.command=oracle-compare",
        "run.seed=5",
        "run.workers=2",
        "run.convergence_check=true",
        "oracle.case=gain",
    ]
