"""cli-harness: presets, config validation, artifacts, CLI verbs."""

import json
import os
import subprocess
import sys

import pytest

from pinnlab import cli
from pinnlab.errors import ConfigError
from pinnlab.experiments import build_network, parse_config, preset_table, run


# --- presets ------------------------------------------------------------------

def test_preset_g_pinn_3x128_exists():
    table = preset_table()
    p = table["g-pinn-3x128-s0.1"]
    assert p.hidden == (128, 128, 128)
    assert p.activation.kind == "gaussian" and p.activation.param == 0.1
    net = build_network(p, input_dim=2, seed=0)
    assert net.widths() == (2, 128, 128, 128, 1)


def test_preset_eg_pinn_flags():
    for tag in ("eg-pinn-3x128", "eg-pinn-2x128"):
        p = preset_table()[tag]
        assert p.equilibrate
        assert p.activation.kind == "gaussian" and p.activation.param == 0.2


def test_preset_families_present():
    names = set(preset_table())
    for fam in ("tanh-pinn", "g-pinn", "sine-pinn", "wavelet-pinn", "eg-pinn", "rff-pinn"):
        assert any(n.startswith(fam) for n in names), fam
    for s in ("s0.1", "s0.2", "s0.4"):
        assert f"g-pinn-2x128-{s}" in names
    for f in ("f1", "f2", "f10"):
        assert f"sine-pinn-3x128-{f}" in names


def test_rff_preset_builds_embedding():
    net = build_network(preset_table()["rff-pinn-2x128"], input_dim=2, seed=1)
    assert net.rff is not None
    assert net.rff.b_matrix.shape == (128, 2)
    assert net.layers[0].weights.shape[0] == 256


# --- config parsing --------------------------------------------------------------

def write_cfg(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


TRAIN_CFG = """
[experiment]
kind = train
problem = poisson-benchmark
preset = g-pinn-2x128-s0.2
output = {out}

[sampling]
n_boundary = 2
n_residual = 40
seed = 7

[train]
epochs = 10
metric_stride = 5
test_grid = 33
"""


def test_parse_valid_config(tmp_path):
    cfg = parse_config(write_cfg(tmp_path, TRAIN_CFG.format(out="run1")))
    assert cfg["experiment"]["kind"] == "train"


def test_malformed_config_raises_and_writes_nothing(tmp_path, monkeypatch):
    monkeypatch.setenv("PINNLAB_OUTPUT_ROOT", str(tmp_path))
    bad = write_cfg(tmp_path, "[experiment]\nkind = dance\noutput = x\n")
    with pytest.raises(ConfigError):
        run(bad)
    assert not (tmp_path / "x").exists()


def test_unknown_preset_rejected(tmp_path):
    text = TRAIN_CFG.format(out="runx").replace("g-pinn-2x128-s0.2", "nope")
    with pytest.raises(ConfigError):
        parse_config(write_cfg(tmp_path, text))


def test_unknown_problem_rejected(tmp_path):
    text = TRAIN_CFG.format(out="runx").replace("poisson-benchmark", "navier-stokes")
    with pytest.raises(ConfigError):
        parse_config(write_cfg(tmp_path, text))


def test_missing_config_file():
    with pytest.raises(ConfigError):
        parse_config("/nonexistent/path.ini")


# --- run: train -------------------------------------------------------------------

def test_run_train_artifacts_and_reproducibility(tmp_path, monkeypatch):
    monkeypatch.setenv("PINNLAB_OUTPUT_ROOT", str(tmp_path))
    cfg = write_cfg(tmp_path, TRAIN_CFG.format(out="runA"))
    manifest = run(cfg)
    outdir = tmp_path / "runA"
    for name in ("metrics.csv", "plot.gp", "summary.json", "manifest.json"):
        assert (outdir / name).exists()
    assert sorted(manifest["artifacts"]) == manifest["artifacts"]
    first = (outdir / "metrics.csv").read_text()

    cfg2 = write_cfg(tmp_path, TRAIN_CFG.format(out="runB"), name="exp2.ini")
    run(cfg2)
    second = (tmp_path / "runB" / "metrics.csv").read_text()

    def strip_seconds(text):
        return ["," .join(line.split(",")[:-1]) for line in text.splitlines()]

    assert strip_seconds(first) == strip_seconds(second)


def test_plot_script_references_only_emitted_files(tmp_path, monkeypatch):
    monkeypatch.setenv("PINNLAB_OUTPUT_ROOT", str(tmp_path))
    run(write_cfg(tmp_path, TRAIN_CFG.format(out="runC")))
    outdir = tmp_path / "runC"
    script = (outdir / "plot.gp").read_text()
    manifest = json.loads((outdir / "manifest.json").read_text())
    emitted = set(manifest["artifacts"])
    for token in script.split("'"):
        if token.endswith(".csv"):
            assert token in emitted, token


def test_summary_reports_replica_stats(tmp_path, monkeypatch):
    monkeypatch.setenv("PINNLAB_OUTPUT_ROOT", str(tmp_path))
    text = TRAIN_CFG.format(out="runD") + "replicas = 2\n"
    run(write_cfg(tmp_path, text))
    summary = json.loads((tmp_path / "runD" / "summary.json").read_text())
    stats = summary["final_rel_l2_test"]
    assert len(stats["values"]) == 2
    assert stats["mean"] is not None and stats["sd"] is not None
    assert (tmp_path / "runD" / "metrics_r0.csv").exists()
    assert (tmp_path / "runD" / "metrics_r1.csv").exists()


# --- run: other kinds ------------------------------------------------------------------

def test_run_ntk_sweep(tmp_path, monkeypatch):
    monkeypatch.setenv("PINNLAB_OUTPUT_ROOT", str(tmp_path))
    text = """
[experiment]
kind = ntk-sweep
output = sweep1

[ntk-sweep]
widths = 16 32
n_train = 6
replicas = 2
seed = 3
activations = gaussian:0.1 tanh
input_dim = 3
head_width = 4
"""
    run(write_cfg(tmp_path, text))
    outdir = tmp_path / "sweep1"
    lines = (outdir / "sweep.csv").read_text().strip().splitlines()
    assert lines[0] == "activation,width,replica,lambda_min,seconds"
    assert len(lines) == 9
    slopes = json.loads((outdir / "slopes.json").read_text())
    assert {s["activation"] for s in slopes} == {"gaussian(s=0.1)", "tanh"}


def test_run_precond_verify(tmp_path, monkeypatch):
    monkeypatch.setenv("PINNLAB_OUTPUT_ROOT", str(tmp_path))
    text = """
[experiment]
kind = precond-verify
output = pv

[precond]
n_matrices = 60
n_diagonals = 20
size = 6
seed = 11
"""
    run(write_cfg(tmp_path, text))
    report = json.loads((tmp_path / "pv" / "precond_summary.json").read_text())
    assert report["violations"]["kappa_le_u"] == 0
    assert report["violations"]["vds_sqrt_n"] == 0


def test_run_lipschitz(tmp_path, monkeypatch):
    monkeypatch.setenv("PINNLAB_OUTPUT_ROOT", str(tmp_path))
    text = """
[experiment]
kind = lipschitz
output = lip

[lipschitz]
widths = 3 8 8 1
n_samples = 20
seed = 2
activation = gaussian:0.2
"""
    run(write_cfg(tmp_path, text))
    body = (tmp_path / "lip" / "lipschitz.csv").read_text()
    assert body.startswith("widths,activation,n_samples,elip")


def test_run_landscape(tmp_path, monkeypatch):
    monkeypatch.setenv("PINNLAB_OUTPUT_ROOT", str(tmp_path))
    text = """
[experiment]
kind = landscape
problem = poisson-benchmark
preset = g-pinn-2x128-s0.2
output = land

[sampling]
n_boundary = 2
n_residual = 15
seed = 5

[landscape]
grid_half_width = 0.2
grid_points = 3
lanczos_iters = 4
"""
    run(write_cfg(tmp_path, text))
    outdir = tmp_path / "land"
    assert (outdir / "landscape.csv").read_text().startswith("alpha,beta,loss")
    side = json.loads((outdir / "landscape.json").read_text())
    assert {"eig1", "eig2", "center_loss"} <= set(side)


# --- CLI verbs ----------------------------------------------------------------------

def test_cli_version(capsys):
    assert cli.main(["version"]) == 0
    assert capsys.readouterr().out.strip()


def test_cli_presets(capsys):
    assert cli.main(["presets"]) == 0
    out = capsys.readouterr().out
    assert "eg-pinn-2x128" in out and "equilibrated" in out


def test_cli_verify_small(capsys):
    rc = cli.main(["verify", "--n-matrices", "40", "--n-diagonals", "10"])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["violations"]["kappa_le_u"] == 0


def test_cli_run_exit_codes(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PINNLAB_OUTPUT_ROOT", str(tmp_path))
    bad = write_cfg(tmp_path, "[experiment]\nkind = bogus\noutput = q\n")
    assert cli.main(["run", bad]) == 2
    good = write_cfg(tmp_path, TRAIN_CFG.format(out="cliRun"), name="ok.ini")
    assert cli.main(["run", good]) == 0
    out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert "artifacts" in out


def test_cli_entrypoint_subprocess(tmp_path):
    env = dict(os.environ, PINNLAB_OUTPUT_ROOT=str(tmp_path))
    proc = subprocess.run([sys.executable, "-m", "pinnlab.cli", "version"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0
