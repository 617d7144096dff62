import json
import subprocess
import sys

import numpy as np
import pytest

from helidiff.cli import main
from helidiff.config import (BUILTIN_SCENARIOS, ScenarioConfig,
                             apply_overrides, apply_paper_scale,
                             builtin_scenario)
from helidiff.errors import ConfigurationError
from helidiff.grid import DensityGrid

MINI = ["--set", "solver.particles=2000", "--set", "integrator.steps=200",
        "--set", "integrator.snapshot_every=100",
        "--set", "integrator.tracker_every=50",
        "--set", "solver.grid_shape=[16,16,16]",
        "--set", "solver.grid_t_final=0.05",
        "--set", "comparison.shape=[8,8,8]"]


def test_builtin_scenarios_parse_and_map_to_figures():
    figures = set()
    for name in BUILTIN_SCENARIOS:
        cfg = builtin_scenario(name)
        assert cfg.name == name
        assert cfg.figure
        figures.add(cfg.figure)
    assert len(figures) == len(BUILTIN_SCENARIOS)  # one figure per scenario


def test_toml_round_trip_is_identity():
    for name in ("fig2b", "fig6", "fig7", "fig10"):
        cfg = builtin_scenario(name)
        text = cfg.to_toml()
        again = ScenarioConfig.from_toml(text)
        assert again == cfg
        assert ScenarioConfig.from_toml(again.to_toml()) == again


def test_partial_toml_fills_defaults():
    cfg = ScenarioConfig.from_toml('name = "mini"\n[operator]\nname = "beltrami"\n')
    assert cfg.integrator.dt == 1e-3
    assert cfg.integrator.steps == 200_000
    assert cfg.solver.particles == 200_000
    assert cfg.noise.amplitude == 1.0
    assert cfg.domain.side == pytest.approx(2.0 * np.pi)
    assert cfg.noise.active_axes is None


def test_validation_rejects_bad_configs():
    with pytest.raises(ConfigurationError):
        ScenarioConfig.from_toml('name = "x"\n[operator]\nname = "vortex"\n')
    with pytest.raises(ConfigurationError):
        ScenarioConfig.from_toml('[operator]\nname = "beltrami"\n')
    with pytest.raises(ConfigurationError):
        ScenarioConfig.from_toml(
            'name = "x"\nbogus = 1\n[operator]\nname = "beltrami"\n')
    with pytest.raises(ConfigurationError):
        ScenarioConfig.from_toml(
            'name = "x"\n[operator]\nname = "beltrami"\n[integrator]\ndt = -0.1\n')
    with pytest.raises(ConfigurationError):
        ScenarioConfig.from_toml(
            'name = "x"\n[operator]\nname = "beltrami"\n'
            '[domain]\nkind = "unbounded"\n[init]\nkind = "flat"\n')


def test_overrides_and_paper_scale():
    cfg = builtin_scenario("fig7")
    apply_overrides(cfg, ["integrator.steps=500", "noise.amplitude=0.5",
                          "solver.kind=particles"])
    assert cfg.integrator.steps == 500
    assert cfg.noise.amplitude == 0.5
    with pytest.raises(ConfigurationError):
        apply_overrides(cfg, ["nope.nope=1"])
    with pytest.raises(ConfigurationError):
        apply_overrides(cfg, ["integrator.steps=abc"])
    cfg2 = apply_paper_scale(builtin_scenario("fig4"))
    assert cfg2.solver.particles == 8_000_000
    assert cfg2.domain.side == 6.0


def test_cli_run_produces_manifest_and_artifacts(tmp_path):
    out = tmp_path / "run4"
    code = main(["run", "fig4", "--out", str(out)] + MINI)
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["schema_version"] == 1
    assert manifest["scenario"] == "fig4"
    assert manifest["figure"] == "fig4"
    names = {o["path"] for o in manifest["outputs"]}
    assert "histogram_final.bin" in names
    assert "comparison.json" in names
    assert "config_echo.json" in names
    for o in manifest["outputs"]:
        assert len(o["sha256"]) == 64
        assert (out / o["path"]).exists()
    hist = DensityGrid.load(out / "histogram_final.bin")
    assert abs(hist.mass() - 1.0) < 1e-9


def test_cli_manifest_is_deterministic(tmp_path):
    hashes = []
    for tag in ("a", "b"):
        out = tmp_path / f"run{tag}"
        assert main(["run", "fig7", "--out", str(out)] + MINI) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        hashes.append({o["path"]: o["sha256"] for o in manifest["outputs"]})
    assert hashes[0] == hashes[1]


def test_cli_run_from_custom_toml(tmp_path):
    cfg = builtin_scenario("fig5")
    apply_overrides(cfg, ["solver.particles=1500", "integrator.steps=100",
                          "integrator.snapshot_every=100",
                          "integrator.tracker_every=50"])
    cfg_path = tmp_path / "mine.toml"
    cfg_path.write_text(cfg.to_toml())
    out = tmp_path / "mine_out"
    assert main(["run", str(cfg_path), "--out", str(out)]) == 0
    echo = json.loads((out / "config_echo.json").read_text())
    assert echo["solver"]["particles"] == 1500


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", "not_a_scenario"]) == 2
    bad = tmp_path / "bad.toml"
    bad.write_text('name = "x"\n[operator]\nname = "nope"\n')
    assert main(["run", str(bad)]) == 2
    assert main(["classify", "also_not_an_operator"]) == 2
    capsys.readouterr()


def test_cli_classify_stdout_and_file(tmp_path, capsys):
    assert main(["classify", "beltrami"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["label"] == "strong_beltrami"

    cfg = tmp_path / "cls.toml"
    cfg.write_text('g = "inverse_lambda"\nn_samples = 128\n'
                   '[operator]\nname = "lambda_grad_casimir"\n')
    out = tmp_path / "report.json"
    assert main(["classify", str(cfg), "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["label"] == "poisson"
    assert report["g"] == "1/lambda"
    assert report["n_samples"] == 128


def test_cli_compare_identical_files(tmp_path, capsys):
    from helidiff.grid import random_positive_grid
    g = random_positive_grid((12, 12, 12), seed=9)
    p1 = tmp_path / "a.bin"
    p2 = tmp_path / "b.bin"
    g.save(p1)
    g.save(p2)
    assert main(["compare", str(p1), str(p2)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["l1_distance"] == 0.0
    assert rep["pearson_correlation"] == 1.0


def test_cli_compare_coarsens_mismatched_shapes(tmp_path, capsys):
    from helidiff.grid import flat_grid
    flat_grid((16, 16, 16)).save(tmp_path / "fine.bin")
    flat_grid((8, 8, 8)).save(tmp_path / "coarse.bin")
    assert main(["compare", str(tmp_path / "fine.bin"),
                 str(tmp_path / "coarse.bin")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["l1_distance"] < 1e-12


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "helidiff.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "classify" in proc.stdout and "compare" in proc.stdout


def test_cli_compare_csv_slices(tmp_path, capsys):
    from helidiff.grid import random_positive_grid
    g = random_positive_grid((16, 16, 4), seed=11)
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    g.save_slice_csv(a, z=0.0)
    g.save_slice_csv(b, z=0.0)
    assert main(["compare", str(a), str(b)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["l1_distance"] == 0.0
    assert rep["shape"] == [16, 16, 1]


@pytest.mark.parametrize("name,label", [
    ("beltrami", "strong_beltrami"),
    ("grad_casimir", "poisson"),
    ("landau_lifshitz", "general_antisymmetric"),
])
def test_cli_classify_catalog_labels(name, label, tmp_path):
    out = tmp_path / "r.json"
    assert main(["classify", name, "--out", str(out)]) == 0
    assert json.loads(out.read_text())["label"] == label


def test_cli_profile_correlation_artifact(tmp_path):
    out = tmp_path / "run9"
    assert main(["run", "fig9", "--out", str(out)] + MINI) == 0
    rep = json.loads((out / "profile_correlation.json").read_text())
    assert set(rep) == {"field_strength", "field_charge"}
    assert rep["field_charge"] is None or -1.0 <= rep["field_charge"] <= 1.0
