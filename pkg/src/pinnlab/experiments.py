"""Configuration-driven experiment runner.

A run is described by a flat INI-style config (section headers, key = value)
and produces one output directory containing every artifact plus a manifest
listing them next to the fully resolved configuration. CSV artifacts are
deterministic under the config seed; wall-clock timing lives in the seconds
columns and the summary JSON and is excluded from reproducibility
comparisons. Plot scripts are gnuplot text referencing only files emitted by
the same run.

Experiment kinds: train, ntk-sweep, lipschitz, landscape, precond-verify.
The output root defaults to the current directory and can be overridden with
the PINNLAB_OUTPUT_ROOT environment variable.
"""

from __future__ import annotations

import configparser
import json
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from . import __version__ as _version
from . import precond
from .activations import Activation, gaussian, identity, sine, tanh, wavelet
from .errors import ConfigError
from .network import init_fanin_uniform, init_he
from .ntk import min_eigenvalue_sweep, save_slopes_json, save_sweep_csv
from .pde import PROBLEM_BUILDERS, get_problem
from .training import (
    TrainConfig,
    landscape_slice,
    make_samples,
    pinn_loss_closures,
    save_landscape,
    save_metrics_csv,
    train,
)

OUTPUT_ROOT_ENV = "PINNLAB_OUTPUT_ROOT"


@dataclass(frozen=True)
class Preset:
    name: str
    hidden: tuple
    activation: Activation
    equilibrate: bool = False
    rff_features: int = 0
    rff_scale: float = 1.0

    def widths(self, input_dim: int) -> tuple:
        return (input_dim,) + self.hidden + (1,)


def preset_table() -> dict:
    """Built-in architecture presets keyed by name."""
    presets = []
    for depth_tag, hidden in (("3x128", (128, 128, 128)), ("2x128", (128, 128))):
        presets.append(Preset(f"tanh-pinn-{depth_tag}", hidden, tanh()))
        for s in (0.1, 0.2, 0.4):
            presets.append(Preset(f"g-pinn-{depth_tag}-s{s:g}", hidden, gaussian(s)))
        for f in (1, 2, 10):
            presets.append(Preset(f"sine-pinn-{depth_tag}-f{f:g}", hidden, sine(f)))
        presets.append(Preset(f"wavelet-pinn-{depth_tag}", hidden, wavelet(1.0)))
        presets.append(Preset(f"eg-pinn-{depth_tag}", hidden, gaussian(0.2), equilibrate=True))
        presets.append(Preset(f"rff-pinn-{depth_tag}", hidden, tanh(),
                              rff_features=128, rff_scale=1.0))
    return {p.name: p for p in presets}


def build_network(preset: Preset, input_dim: int, seed: int,
                  init: str = "fanin-uniform"):
    """Instantiate a preset. init: "fanin-uniform" (benchmark default) or "he".

    Fan-in uniform is the training default because zero-bias He starts every
    first-layer feature centered at the origin, which measurably starves the
    PDE benchmarks; the NTK width sweep keeps He per its own protocol.
    """
    initializer = {"fanin-uniform": init_fanin_uniform, "he": init_he}[init]
    return initializer(
        preset.widths(input_dim), preset.activation, seed,
        equilibrate_inner=preset.equilibrate,
        rff_features=preset.rff_features, rff_scale=preset.rff_scale,
    )


# ---------------------------------------------------------------------------
# config parsing

_KINDS = ("train", "ntk-sweep", "lipschitz", "landscape", "precond-verify")


def parse_config(path) -> dict:
    """Parse and validate an experiment config file into plain dicts."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        read = cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not read:
        raise ConfigError(f"config file {path} not found or empty")
    if "experiment" not in cp:
        raise ConfigError("missing [experiment] section")
    exp = dict(cp["experiment"])
    kind = exp.get("kind")
    if kind not in _KINDS:
        raise ConfigError(f"kind must be one of {_KINDS}, got {kind!r}")
    cfg = {"experiment": exp}
    for sec in cp.sections():
        cfg[sec] = dict(cp[sec])
    _validate(cfg)
    return cfg


def _get(cfg, sec, key, cast, default=None, required=False):
    raw = cfg.get(sec, {}).get(key)
    if raw is None:
        if required:
            raise ConfigError(f"missing {sec}.{key}")
        return default
    try:
        if cast is bool:
            lower = str(raw).strip().lower()
            if lower in ("1", "true", "yes", "on"):
                return True
            if lower in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return cast(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {sec}.{key}: {raw!r}") from exc


def _parse_activation(token: str) -> Activation:
    name, _, param = token.partition(":")
    name = name.strip().lower()
    if name == "tanh":
        return tanh()
    if name == "identity":
        return identity()
    if name == "gaussian":
        return gaussian(float(param or 0.1))
    if name == "sine":
        return sine(float(param or 1.0))
    if name == "wavelet":
        return wavelet(float(param or 1.0))
    raise ConfigError(f"unknown activation token {token!r}")


def _validate(cfg):
    exp = cfg["experiment"]
    kind = exp["kind"]
    if kind in ("train", "landscape"):
        problem = exp.get("problem")
        if problem not in PROBLEM_BUILDERS:
            raise ConfigError(f"unknown problem {problem!r}; have {sorted(PROBLEM_BUILDERS)}")
        preset = exp.get("preset")
        if preset not in preset_table():
            raise ConfigError(f"unknown preset {preset!r}")
        if _get(cfg, "sampling", "n_boundary", int, 100) < 1:
            raise ConfigError("sampling.n_boundary must be >= 1")
        if _get(cfg, "sampling", "n_residual", int, 1000) < 1:
            raise ConfigError("sampling.n_residual must be >= 1")
        if _get(cfg, "train", "epochs", int, required=(kind == "train")) is not None \
                and _get(cfg, "train", "epochs", int) < 0:
            raise ConfigError("train.epochs must be >= 0")
    if kind == "ntk-sweep":
        widths = [int(w) for w in cfg.get("ntk-sweep", {}).get("widths", "").split()]
        if not widths:
            raise ConfigError("ntk-sweep.widths is required")
        for tok in cfg.get("ntk-sweep", {}).get("activations", "gaussian:0.1 tanh").split():
            _parse_activation(tok)
    if "output" not in exp:
        raise ConfigError("experiment.output is required")


def output_root() -> str:
    return os.environ.get(OUTPUT_ROOT_ENV, os.getcwd())


# ---------------------------------------------------------------------------
# runner


def run(config_path) -> dict:
    """Execute one experiment config; returns the manifest dict.

    Raises ConfigError before any artifact is written when the config is
    invalid. Numeric failures propagate after partial artifacts may exist.
    """
    cfg = parse_config(config_path)
    exp = cfg["experiment"]
    outdir = os.path.join(output_root(), exp["output"])
    os.makedirs(outdir, exist_ok=True)
    kind = exp["kind"]
    artifacts = []
    summary = {}
    t0 = time.perf_counter()
    if kind == "train":
        artifacts, summary = _run_train(cfg, outdir)
    elif kind == "ntk-sweep":
        artifacts, summary = _run_sweep(cfg, outdir)
    elif kind == "lipschitz":
        artifacts, summary = _run_lipschitz(cfg, outdir)
    elif kind == "landscape":
        artifacts, summary = _run_landscape(cfg, outdir)
    elif kind == "precond-verify":
        artifacts, summary = _run_precond(cfg, outdir)
    summary["wall_seconds"] = time.perf_counter() - t0
    summary["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, default=float)
        fh.write("\n")
    manifest = {
        "version": _version,
        "config": cfg,
        "artifacts": sorted(artifacts + ["summary.json"]),
        "output_dir": outdir,
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


def _run_train(cfg, outdir):
    exp = cfg["experiment"]
    problem = get_problem(exp["problem"])
    preset = preset_table()[exp["preset"]]
    seed = _get(cfg, "sampling", "seed", int, 1)
    n_b = _get(cfg, "sampling", "n_boundary", int, 100)
    n_r = _get(cfg, "sampling", "n_residual", int, 1000)
    replicas = _get(cfg, "train", "replicas", int, 1)
    tc = TrainConfig(
        epochs=_get(cfg, "train", "epochs", int, required=True),
        learning_rate=_get(cfg, "train", "learning_rate", float, 1e-4),
        adam_beta1=_get(cfg, "train", "adam_beta1", float, 0.9),
        adam_beta2=_get(cfg, "train", "adam_beta2", float, 0.999),
        adam_eps=_get(cfg, "train", "adam_eps", float, 1e-8),
        seed=seed,
        equilibrate_every_step=_get(cfg, "train", "equilibrate_every_step", bool, True),
        metric_stride=_get(cfg, "train", "metric_stride", int, 100),
        test_grid=tuple(int(t) for t in cfg.get("train", {}).get("test_grid", "256 100").split()),
    )
    artifacts = []
    finals = []
    for rep in range(replicas):
        rep_seed = seed + rep
        net = build_network(preset, problem.input_dim, rep_seed)
        samples = make_samples(problem, n_b, n_r, rep_seed)
        records, net = train(net, problem, samples, replace(tc, seed=rep_seed))
        if records:
            name = f"metrics_r{rep}.csv" if replicas > 1 else "metrics.csv"
            save_metrics_csv(os.path.join(outdir, name), records)
            artifacts.append(name)
        finals.append(records[-1] if records else None)
    rels = [r.rel_l2_test_error for r in finals if r is not None]
    losses = [r.loss_total for r in finals if r is not None]
    summary = {
        "kind": "train", "problem": problem.name, "preset": preset.name,
        "replicas": replicas, "epochs": tc.epochs,
        "final_rel_l2_test": {"mean": float(np.mean(rels)) if rels else None,
                              "sd": float(np.std(rels)) if rels else None,
                              "median": float(np.median(rels)) if rels else None,
                              "values": rels},
        "final_loss_total": {"mean": float(np.mean(losses)) if losses else None,
                             "sd": float(np.std(losses)) if losses else None,
                             "values": losses},
    }
    plot = _train_plot_script(artifacts)
    with open(os.path.join(outdir, "plot.gp"), "w") as fh:
        fh.write(plot)
    artifacts.append("plot.gp")
    return artifacts, summary


def _train_plot_script(csv_names):
    lines = [
        "# gnuplot script; run from this directory",
        "set datafile separator ','",
        "set logscale y",
        "set xlabel 'epoch'",
        "set ylabel 'loss / error'",
        "set key outside",
        "set terminal pngcairo size 900,600",
        "set output 'training.png'",
    ]
    plots = []
    for name in csv_names:
        stem = name.rsplit(".", 1)[0]
        plots.append(f"'{name}' using 1:2 with lines title 'loss ({stem})'")
        plots.append(f"'{name}' using 1:6 with lines title 'rel L2 ({stem})'")
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def _run_sweep(cfg, outdir):
    sec = cfg.get("ntk-sweep", {})
    widths = [int(w) for w in sec["widths"].split()]
    acts = [_parse_activation(tok) for tok in sec.get("activations", "gaussian:0.1 tanh").split()]
    n_train = int(sec.get("n_train", 100))
    replicas = int(sec.get("replicas", 1))
    seed = int(sec.get("seed", 1))
    input_dim = int(sec["input_dim"]) if "input_dim" in sec else None
    head_width = int(sec["head_width"]) if "head_width" in sec else None
    result = min_eigenvalue_sweep(widths, n_train, acts, seed, replicas,
                                  input_dim=input_dim, head_width=head_width)
    save_sweep_csv(os.path.join(outdir, "sweep.csv"), result)
    save_slopes_json(os.path.join(outdir, "slopes.json"), result)
    with open(os.path.join(outdir, "plot.gp"), "w") as fh:
        fh.write(
            "set datafile separator ','\nset logscale xy\n"
            "set xlabel 'width n1'\nset ylabel 'lambda_min(K_uu)'\n"
            "set terminal pngcairo size 900,600\nset output 'sweep.png'\n"
            "plot 'sweep.csv' using 2:4 with points title 'lambda_min'\n"
        )
    summary = {"kind": "ntk-sweep", "slopes": result.slopes,
               "lambda_table": {a: {str(w): v for w, v in ws.items()}
                                for a, ws in result.lambda_table().items()}}
    return ["sweep.csv", "slopes.json", "plot.gp"], summary


def _run_lipschitz(cfg, outdir):
    sec = cfg.get("lipschitz", {})
    widths = tuple(int(w) for w in sec.get("widths", "200 64 64 512 1").split())
    n_samples = int(sec.get("n_samples", 1000))
    seed = int(sec.get("seed", 1))
    act = _parse_activation(sec.get("activation", "gaussian:0.1"))
    from .ntk import empirical_lipschitz
    net = init_he(widths, act, seed)
    value = empirical_lipschitz(net, n_samples, seed + 1)
    rows = ["widths,activation,n_samples,elip"]
    rows.append(f"{'x'.join(str(w) for w in widths)},{act.label()},{n_samples},{value:.17g}")
    with open(os.path.join(outdir, "lipschitz.csv"), "w") as fh:
        fh.write("\n".join(rows) + "\n")
    return ["lipschitz.csv"], {"kind": "lipschitz", "elip": value}


def _run_landscape(cfg, outdir):
    exp = cfg["experiment"]
    problem = get_problem(exp["problem"])
    preset = preset_table()[exp["preset"]]
    seed = _get(cfg, "sampling", "seed", int, 1)
    n_b = _get(cfg, "sampling", "n_boundary", int, 100)
    n_r = _get(cfg, "sampling", "n_residual", int, 200)
    warm = _get(cfg, "landscape", "warmup_epochs", int, 0)
    net = build_network(preset, problem.input_dim, seed)
    samples = make_samples(problem, n_b, n_r, seed)
    if warm:
        train(net, problem, samples, TrainConfig(epochs=warm, seed=seed,
                                                 metric_stride=max(warm, 1)))
    loss, loss_grad = pinn_loss_closures(net, problem, samples)
    from .network import flat_params
    slc = landscape_slice(
        loss, loss_grad, flat_params(net),
        grid_half_width=_get(cfg, "landscape", "grid_half_width", float, 0.5),
        grid_points=_get(cfg, "landscape", "grid_points", int, 11),
        lanczos_iters=_get(cfg, "landscape", "lanczos_iters", int, 16),
        seed=seed,
    )
    save_landscape(os.path.join(outdir, "landscape.csv"),
                   os.path.join(outdir, "landscape.json"), slc)
    with open(os.path.join(outdir, "plot.gp"), "w") as fh:
        fh.write(
            "set datafile separator ','\nset xlabel 'alpha'\nset ylabel 'beta'\n"
            "set terminal pngcairo size 700,600\nset output 'landscape.png'\n"
            "set dgrid3d 21,21\nset pm3d\nsplot 'landscape.csv' using 1:2:3 with pm3d\n"
        )
    summary = {"kind": "landscape", "center_loss": slc.center_loss,
               "eig1": slc.top_eigenvalues[0], "eig2": slc.top_eigenvalues[1]}
    return ["landscape.csv", "landscape.json", "plot.gp"], summary


def _run_precond(cfg, outdir):
    sec = cfg.get("precond", {})
    report = precond.verify_precond_suite(
        n_matrices=int(sec.get("n_matrices", 10_000)),
        n_diagonals=int(sec.get("n_diagonals", 100)),
        size=int(sec.get("size", 6)),
        seed=int(sec.get("seed", 2024)),
    )
    with open(os.path.join(outdir, "precond_summary.json"), "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return ["precond_summary.json"], {"kind": "precond-verify", **report}
