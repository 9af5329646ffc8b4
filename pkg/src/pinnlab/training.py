"""Full-batch Adam training of PINNs with conditioning diagnostics.

The training objective is the composite loss L_b + L_r with

    L_b = (1/2N_b) sum |u(x_b) - g(x_b)|^2,
    L_r = (1/2N_r) sum |r(x_r)|^2,

accumulated full-batch in a fixed order, so identical (seed, config, problem)
reproduce bit-identical metric streams. Equilibrated networks refresh their
row-scaling diagonals after every optimizer step; the diagonals are constants
of each step's gradient (stop-gradient).

Beyond the loop itself this module tracks per-layer weight condition numbers,
relative L2 test errors on a uniform grid, finite-difference Hessian-vector
products, and loss-landscape slices along the two most curved Hessian
eigenvectors.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (
    DimensionMismatchError,
    NoExactSolutionError,
    NonFiniteLossError,
    SingularMatrixError,
)
from .network import (
    Network,
    ParamGradient,
    _backward,
    _forward,
    clone,
    effective_weight,
    equilibrate_weights,
    flat_params,
    forward,
    set_flat_params,
)
from .ntk import ntk_loss_gap
from .pde import PdeProblem, sample_boundary, sample_latin_hypercube


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    equilibrate_every_step: bool = True
    metric_stride: int = 100
    test_grid: tuple = (256, 100)   # nodes per axis; trailing axes dropped for 1-D

    def __post_init__(self):
        if self.epochs < 0 or self.learning_rate <= 0 or self.adam_eps <= 0:
            raise ValueError("need epochs >= 0, learning_rate > 0, eps > 0")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.metric_stride < 1:
            raise ValueError("metric_stride >= 1")


@dataclass(frozen=True)
class RunRecord:
    epoch: int
    loss_total: float
    loss_boundary: float
    loss_residual: float
    l2_train_error: float
    rel_l2_test_error: float
    per_layer_condition: tuple
    wall_seconds: float


@dataclass(frozen=True)
class SampleSet:
    boundary_points: np.ndarray
    boundary_targets: np.ndarray
    residual_points: np.ndarray
    seed: int


def make_samples(problem: PdeProblem, n_boundary: int, n_residual: int, seed: int) -> SampleSet:
    """Boundary/initial points plus Latin-hypercube interior collocation points."""
    bp, bt = sample_boundary(problem, n_boundary, seed)
    rp = sample_latin_hypercube(problem.lo, problem.hi, n_residual, seed + 1)
    return SampleSet(bp, bt, rp, seed)


# ---------------------------------------------------------------------------
# loss and gradient


# residual batches are processed in fixed-size chunks: the jet state of a
# 128-wide layer at 1e4 points is ~20 MB per array, which thrashes the cache
# across the elementwise chain; ~1e3-point chunks stay resident. Chunk order
# is fixed, so results remain deterministic.
RESIDUAL_CHUNK = 1024


def _residual_loss_and_grads(net, problem, xr):
    from .ntk import _jet_from_state
    gd, hd = problem.grad_dims, problem.hess_dims
    nr = xr.shape[0]
    sq_sum = 0.0
    total = None
    for lo in range(0, nr, RESIDUAL_CHUNK):
        xs = xr[lo: lo + RESIDUAL_CHUNK]
        v, g, h, ctx = _forward(net, xs, grad_dims=gd, hess_dims=hd, keep=True)
        jet = _jet_from_state(xs, v, g, h, gd, hd, net.input_dim)
        r = problem.residual(xs, jet)
        sq_sum += float(r @ r)
        c0, c1, c2 = problem.residual_cotangent(xs, jet)
        scale = r / nr
        b = xs.shape[0]
        vbar = (scale * c0)[:, None]
        gbar = scale[:, None, None] * c1[:, list(gd), None] if gd else np.zeros((b, 0, 1))
        hbar = scale[:, None, None] * c2[:, list(hd), None] if hd else np.zeros((b, 0, 1))
        grads = _backward(net, ctx, vbar, gbar, hbar)
        if total is None:
            total = grads.per_layer
        else:
            for (dw, db), (cw, cb) in zip(total, grads.per_layer):
                dw += cw
                db += cb
    return 0.5 * sq_sum / nr, ParamGradient(total)


def _loss_and_grads(net: Network, problem: PdeProblem, samples: SampleSet):
    """(loss_b, loss_r, grads) with grads summed over both batches."""
    xb, gb = samples.boundary_points, samples.boundary_targets
    nb = xb.shape[0]

    loss_r, grads_r = _residual_loss_and_grads(net, problem, samples.residual_points)

    v, _, _, ctx = _forward(net, xb, keep=True)
    res_b = v[:, 0] - gb
    loss_b = 0.5 * float(res_b @ res_b) / nb
    vbar = (res_b / nb)[:, None]
    grads_b = _backward(net, ctx, vbar, np.zeros((nb, 0, 1)), np.zeros((nb, 0, 1)))

    merged = [(dwr + dwb, dbr + dbb)
              for (dwr, dbr), (dwb, dbb) in zip(grads_r.per_layer, grads_b.per_layer)]
    return loss_b, loss_r, ParamGradient(merged)


def composite_loss(net: Network, problem: PdeProblem, samples: SampleSet):
    """(total, boundary, residual); total = boundary + residual exactly."""
    xb, gb = samples.boundary_points, samples.boundary_targets
    xr = samples.residual_points
    from .ntk import _jet_from_state
    gd, hd = problem.grad_dims, problem.hess_dims
    v, g, h, _ = _forward(net, xr, grad_dims=gd, hess_dims=hd)
    jet = _jet_from_state(xr, v, g, h, gd, hd, net.input_dim)
    r = problem.residual(xr, jet)
    loss_r = 0.5 * float(r @ r) / xr.shape[0]
    u = forward(net, xb)[:, 0]
    res_b = u - gb
    loss_b = 0.5 * float(res_b @ res_b) / xb.shape[0]
    return loss_b + loss_r, loss_b, loss_r


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def for_network(cls, net: Network) -> "AdamState":
        m = []
        v = []
        for layer in net.layers:
            m.extend([np.zeros_like(layer.weights), np.zeros_like(layer.bias)])
            v.extend([np.zeros_like(layer.weights), np.zeros_like(layer.bias)])
        return cls(m, v)


def adam_step(net: Network, state: AdamState, grads: ParamGradient, config: TrainConfig) -> None:
    """Bias-corrected Adam update, in place."""
    b1, b2, eps, lr = config.adam_beta1, config.adam_beta2, config.adam_eps, config.learning_rate
    flat = []
    for dw, db in grads.per_layer:
        flat.extend([dw, db])
    params = []
    for layer in net.layers:
        params.extend([layer.weights, layer.bias])
    if len(flat) != len(state.m):
        raise DimensionMismatchError("gradient does not match optimizer state")
    state.t += 1
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g_, m_, v_ in zip(params, flat, state.m, state.v):
        if p.shape != g_.shape:
            raise DimensionMismatchError(f"gradient shape {g_.shape} vs parameter {p.shape}")
        m_ *= b1
        m_ += (1.0 - b1) * g_
        v_ *= b2
        v_ += (1.0 - b2) * g_ * g_
        p -= lr * (m_ / c1) / (np.sqrt(v_ / c2) + eps)


# ---------------------------------------------------------------------------
# evaluation


def evaluation_grid(problem: PdeProblem, nodes) -> np.ndarray:
    """Uniform tensor grid over the problem box (flattened to (N, n0))."""
    nodes = tuple(nodes)[: problem.input_dim]
    axes = [np.linspace(problem.lo[d], problem.hi[d], nodes[d]) for d in range(problem.input_dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def test_errors(net: Network, problem: PdeProblem, grid_nodes=(256, 100), *,
                exact_values: np.ndarray | None = None, grid: np.ndarray | None = None):
    """(l2_abs, l2_rel) against the exact solution on a uniform grid.

    l2_abs is the root-mean-square mismatch over grid nodes and l2_rel the
    ratio of 2-norms. A precomputed grid and exact-value vector can be passed
    to amortize an expensive reference (the Burgers quadrature oracle).
    """
    if problem.exact is None and exact_values is None:
        raise NoExactSolutionError(f"{problem.name} has no exact solution")
    pts = evaluation_grid(problem, grid_nodes) if grid is None else grid
    ue = problem.exact(pts) if exact_values is None else exact_values
    un = forward(net, pts)[:, 0]
    diff = un - ue
    l2_abs = float(np.sqrt(np.mean(diff ** 2)))
    denom = float(np.linalg.norm(ue))
    l2_rel = float(np.linalg.norm(diff) / denom) if denom > 0 else float(np.linalg.norm(diff))
    return l2_abs, l2_rel


def weight_condition_track(net: Network):
    """Per-layer condition numbers; equilibrated layers report kappa(P W^T).

    Returns (kappa_raw, kappa_effective): kappa of the stored weights and of
    the effective (scaled) weights. Singular layers record +inf.
    """
    raw = []
    eff = []
    for k, layer in enumerate(net.layers):
        try:
            raw.append(linalg.condition_number(layer.weights))
        except SingularMatrixError:
            raw.append(float("inf"))
        if net.p_diag[k] is not None:
            try:
                eff.append(linalg.condition_number(effective_weight(net, k)))
            except SingularMatrixError:
                eff.append(float("inf"))
        else:
            eff.append(raw[-1])
    return raw, eff


# ---------------------------------------------------------------------------
# training loop


def train(net: Network, problem: PdeProblem, samples: SampleSet, config: TrainConfig,
          on_record=None, eq5_monitor: bool = False):
    """Full-batch Adam; returns (records, net). Mutates `net` in place.

    A RunRecord is emitted every `metric_stride` epochs and at the final
    epoch. Non-finite losses abort with NonFiniteLossError carrying the last
    finite checkpoint and the records emitted so far. With eq5_monitor, each
    emission also asserts the gradient-norm inequality against the boundary
    NTK's minimum eigenvalue (slack -1e-8).
    """
    state = AdamState.for_network(net)
    records = []
    grid = None
    exact_vals = None
    if problem.exact is not None:
        grid = evaluation_grid(problem, config.test_grid)
        exact_vals = problem.exact(grid)
    t_start = time.perf_counter()
    last_good = clone(net)

    def emit(epoch, loss_b, loss_r):
        total = loss_b + loss_r
        nb = samples.boundary_points.shape[0]
        nr = samples.residual_points.shape[0]
        l2_train = float(np.sqrt(2.0 * (loss_b * nb + loss_r * nr) / (nb + nr)))
        if exact_vals is not None:
            _, rel = test_errors(net, problem, grid=grid, exact_values=exact_vals)
        else:
            rel = float("nan")
        _, eff = weight_condition_track(net)
        rec = RunRecord(epoch, total, loss_b, loss_r, l2_train, rel, tuple(eff),
                        time.perf_counter() - t_start)
        records.append(rec)
        if eq5_monitor:
            _, _, ratio = ntk_loss_gap(net, samples.boundary_points,
                                       samples.boundary_targets)
            if ratio < 1.0 - 1e-8:
                raise AssertionError(f"NTK-loss inequality violated at epoch {epoch}: {ratio}")
        if on_record is not None:
            on_record(rec)

    if config.epochs == 0:
        return records, net
    for epoch in range(1, config.epochs + 1):
        loss_b, loss_r, grads = _loss_and_grads(net, problem, samples)
        if not np.isfinite(loss_b + loss_r):
            raise NonFiniteLossError(epoch, checkpoint=last_good, records=records)
        adam_step(net, state, grads, config)
        if net.equilibrate_inner and config.equilibrate_every_step:
            equilibrate_weights(net)
        if epoch % config.metric_stride == 0 or epoch == config.epochs:
            emit(epoch, *_current_losses(net, problem, samples))
            last_good = clone(net)
    return records, net


def _current_losses(net, problem, samples):
    _, loss_b, loss_r = composite_loss(net, problem, samples)
    return loss_b, loss_r


def save_metrics_csv(path, records) -> None:
    """Header epoch,loss_total,...,kappa_l<i>,...,seconds; one row per record."""
    if not records:
        raise ValueError("no records to write")
    n_layers = len(records[0].per_layer_condition)
    kappa_cols = ",".join(f"kappa_l{i + 1}" for i in range(n_layers))
    with open(path, "w") as fh:
        fh.write(f"epoch,loss_total,loss_boundary,loss_residual,l2_train,rel_l2_test,{kappa_cols},seconds\n")
        for r in records:
            kappas = ",".join(f"{k:.17g}" for k in r.per_layer_condition)
            fh.write(f"{r.epoch},{r.loss_total:.17g},{r.loss_boundary:.17g},"
                     f"{r.loss_residual:.17g},{r.l2_train_error:.17g},"
                     f"{r.rel_l2_test_error:.17g},{kappas},{r.wall_seconds:.6f}\n")


# ---------------------------------------------------------------------------
# Hessian-vector products and landscape slices


def hessian_vector(loss_grad, theta: np.ndarray, v: np.ndarray, h: float | None = None) -> np.ndarray:
    """Central-difference HVP: (grad(theta + h v) - grad(theta - h v)) / 2h.

    `loss_grad(theta)` returns the flat loss gradient. v must be unit-norm;
    h defaults to 1e-3 * (1 + max|theta|), balancing truncation against
    cancellation for float64 gradients.
    """
    v = np.asarray(v, dtype=np.float64)
    nv = float(np.sqrt(v @ v))
    if abs(nv - 1.0) > 1e-8:
        raise ValueError(f"direction must be unit norm, got |v| = {nv}")
    if h is None:
        h = 1e-3 * (1.0 + float(np.max(np.abs(theta))))
    if h <= 0:
        raise ValueError("h must be positive")
    gp = np.asarray(loss_grad(theta + h * v), dtype=np.float64)
    gm = np.asarray(loss_grad(theta - h * v), dtype=np.float64)
    if not (np.all(np.isfinite(gp)) and np.all(np.isfinite(gm))):
        raise NonFiniteLossError(-1)
    return (gp - gm) / (2.0 * h)


@dataclass(frozen=True)
class LandscapeSlice:
    center_loss: float
    directions: tuple                 # (v1, v2), orthonormal
    grid: np.ndarray                  # rows (alpha, beta, loss)
    top_eigenvalues: tuple

    def extremal_ratio(self, bottom_estimate: float) -> float:
        return self.top_eigenvalues[0] / bottom_estimate


def pinn_loss_closures(net: Network, problem: PdeProblem, samples: SampleSet):
    """(loss(theta), loss_grad(theta)) over the flat parameter vector.

    Evaluations restore the network's original parameters afterwards.
    """
    theta0 = flat_params(net)

    def loss(theta):
        set_flat_params(net, theta)
        try:
            total, _, _ = composite_loss(net, problem, samples)
        finally:
            set_flat_params(net, theta0)
        return total

    def loss_grad(theta):
        set_flat_params(net, theta)
        try:
            _, _, grads = _loss_and_grads(net, problem, samples)
        finally:
            set_flat_params(net, theta0)
        return grads.flat()

    return loss, loss_grad


def landscape_slice(loss, loss_grad, theta: np.ndarray, *,
                    grid_half_width: float, grid_points: int,
                    lanczos_iters: int = 24, seed: int = 0) -> LandscapeSlice:
    """Loss surface on the plane of the two most curved Hessian eigenvectors.

    grid_points must be odd so the center theta sits on the grid; the top two
    Hessian eigenpairs come from Lanczos over central-difference HVPs.
    """
    if grid_points < 3 or grid_points % 2 == 0:
        raise ValueError("grid_points must be odd and >= 3")
    theta = np.asarray(theta, dtype=np.float64)
    dim = theta.size
    iters = min(lanczos_iters, dim)
    res = linalg.lanczos_extremal(
        lambda v: hessian_vector(loss_grad, theta, v / np.sqrt(v @ v)) * np.sqrt(v @ v),
        dim=dim, k=2, iters=iters, seed=seed,
    )
    v1 = res.top_vectors[:, 0]
    v1 = v1 / np.sqrt(v1 @ v1)
    if res.top_vectors.shape[1] > 1:
        v2 = res.top_vectors[:, 1]
    else:
        v2 = np.roll(v1, 1)
    v2 = v2 - (v2 @ v1) * v1
    v2 = v2 / np.sqrt(v2 @ v2)
    alphas = np.linspace(-grid_half_width, grid_half_width, grid_points)
    center = float(loss(theta))
    rows = []
    for a in alphas:
        for b in alphas:
            if a == 0.0 and b == 0.0:
                val = center
            else:
                val = float(loss(theta + a * v1 + b * v2))
            rows.append((a, b, val))
    top2 = (float(res.top_values[0]),
            float(res.top_values[1]) if res.top_values.size > 1 else float("nan"))
    return LandscapeSlice(center, (v1, v2), np.array(rows), top2)


def save_landscape(csv_path, json_path, slc: LandscapeSlice) -> None:
    with open(csv_path, "w") as fh:
        fh.write("alpha,beta,loss\n")
        for a, b, v in slc.grid:
            fh.write(f"{a:.17g},{b:.17g},{v:.17g}\n")
    import json as _json
    with open(json_path, "w") as fh:
        _json.dump({"eig1": slc.top_eigenvalues[0], "eig2": slc.top_eigenvalues[1],
                    "center_loss": slc.center_loss}, fh, indent=2)
        fh.write("\n")
