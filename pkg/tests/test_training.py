"""train-diagnostics: losses, Adam, training loop, HVP, landscape slices."""

import numpy as np
import pytest

from pinnlab import activations as act
from pinnlab import linalg
from pinnlab import network as nw
from pinnlab import training as tr
from pinnlab.errors import NoExactSolutionError, NonFiniteLossError
from pinnlab.pde import PdeProblem, poisson_problem


@pytest.fixture
def poisson():
    return poisson_problem("benchmark")


def small_net(seed=0, equil=False):
    return nw.init_he((1, 16, 12, 1), act.gaussian(0.3), seed=seed, equilibrate_inner=equil)


# --- composite loss ------------------------------------------------------------

def test_composite_loss_single_boundary_point(poisson):
    net = small_net()
    samples = tr.SampleSet(
        boundary_points=np.array([[1.0]]),
        boundary_targets=np.array([1.0]),
        residual_points=np.array([[0.5]]),
        seed=0,
    )
    u = nw.forward(net, np.array([1.0]))[0]
    # force u = 3 by shifting the output bias
    net.layers[-1].bias[0] += 3.0 - u
    total, lb, lr_ = tr.composite_loss(net, poisson, samples)
    assert lb == pytest.approx(2.0)   # (1/2)(3-1)^2
    assert total == lb + lr_


def test_composite_loss_matches_naive_summation(poisson, rng):
    net = small_net(3)
    samples = tr.make_samples(poisson, 2, 30, seed=5)
    total, lb, lr_ = tr.composite_loss(net, poisson, samples)
    u = nw.forward(net, samples.boundary_points)[:, 0]
    lb_naive = sum((ui - gi) ** 2 for ui, gi in zip(u, samples.boundary_targets)) / (2 * len(u))
    jets = nw.forward_jet(net, samples.residual_points)
    r = poisson.residual(samples.residual_points, jets)
    lr_naive = sum(ri ** 2 for ri in r) / (2 * len(r))
    assert lb == pytest.approx(lb_naive, rel=1e-12)
    assert lr_ == pytest.approx(lr_naive, rel=1e-12)


def test_exact_solution_gives_zero_loss():
    """Affine manufactured problem solved exactly by an identity-activation net."""
    def residual(points, jet):
        g = jet.grad[..., 0] if jet.grad.ndim == 3 else jet.grad
        return g[:, 0] - 2.0      # u_x = 2

    def cot(points, jet):
        B = points.shape[0]
        return np.zeros(B), np.full((B, 1), 1.0)[:, :], np.zeros((B, 1))

    prob = PdeProblem(
        name="affine", input_dim=1, lo=np.array([0.0]), hi=np.array([1.0]),
        residual=residual, residual_cotangent=cot, boundary_specs=(),
        exact=lambda pts: 2.0 * pts[:, 0] + 1.0, grad_dims=(0,), hess_dims=(),
    )
    layers = [nw.Layer(np.array([[2.0]]), np.zeros(1), act.identity()),
              nw.Layer(np.array([[1.0]]), np.array([1.0]), act.identity())]
    net = nw.Network(layers)
    samples = tr.SampleSet(np.array([[0.0]]), np.array([1.0]), np.array([[0.3], [0.9]]), 0)
    total, lb, lr_ = tr.composite_loss(net, prob, samples)
    assert total == 0.0 and lb == 0.0 and lr_ == 0.0


# --- adam -------------------------------------------------------------------------

def test_adam_first_step_sign_move():
    net = small_net(1)
    cfg = tr.TrainConfig(epochs=1, learning_rate=0.01)
    state = tr.AdamState.for_network(net)
    grads = nw.ParamGradient([(np.ones_like(l.weights), np.ones_like(l.bias))
                              for l in net.layers])
    before = nw.flat_params(net)
    tr.adam_step(net, state, grads, cfg)
    after = nw.flat_params(net)
    # with m_hat = g, v_hat = g^2, the first step is -lr * g/(|g| + eps) ~ -lr*sign(g)
    assert np.allclose(after - before, -0.01, rtol=1e-6)


def test_adam_zero_gradient_decays_moments():
    net = small_net(2)
    cfg = tr.TrainConfig(epochs=1, learning_rate=0.5)
    state = tr.AdamState.for_network(net)
    g1 = nw.ParamGradient([(np.ones_like(l.weights), np.ones_like(l.bias))
                           for l in net.layers])
    tr.adam_step(net, state, g1, cfg)
    before = nw.flat_params(net)
    m_before = state.m[0].copy()
    zero = nw.ParamGradient([(np.zeros_like(l.weights), np.zeros_like(l.bias))
                             for l in net.layers])
    tr.adam_step(net, state, zero, cfg)
    # moments decay toward zero; parameters still drift along stale momentum
    assert np.allclose(state.m[0], 0.9 * m_before)
    tr.adam_step(net, state, zero, cfg)
    assert np.all(np.abs(state.m[0]) < np.abs(m_before))


def test_adam_quadratic_matches_reference_trace():
    """100 steps on L = theta^2/2 against an independent scalar implementation."""
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    theta_ref = 1.7
    m = v = 0.0
    trace = []
    for t in range(1, 101):
        g = theta_ref
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta_ref -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
        trace.append(theta_ref)
    layers = [nw.Layer(np.array([[1.7]]), np.zeros(1), act.identity()),
              nw.Layer(np.array([[1.0]]), np.zeros(1), act.identity())]
    net = nw.Network(layers)
    # freeze every parameter except w1 by zeroing its gradient entries
    cfg = tr.TrainConfig(epochs=1, learning_rate=lr)
    state = tr.AdamState.for_network(net)
    got = []
    for t in range(100):
        g = net.layers[0].weights[0, 0]
        grads = nw.ParamGradient([
            (np.array([[g]]), np.zeros(1)),
            (np.zeros((1, 1)), np.zeros(1)),
        ])
        tr.adam_step(net, state, grads, cfg)
        got.append(net.layers[0].weights[0, 0])
    assert np.max(np.abs(np.array(got) - np.array(trace))) < 1e-12
    diffs = np.abs(np.array(got))
    # momentum makes |theta| non-monotone; assert decay over the warmup
    # stretch and convergence near the optimum
    assert np.all(np.diff(diffs[:15]) < 0)
    assert diffs[-1] < 2e-2 < diffs[0]


# --- train loop ----------------------------------------------------------------------

def test_train_zero_epochs(poisson):
    net = small_net(4)
    before = nw.flat_params(net)
    samples = tr.make_samples(poisson, 2, 20, seed=1)
    records, net2 = tr.train(net, poisson, samples, tr.TrainConfig(epochs=0))
    assert records == []
    assert np.array_equal(nw.flat_params(net2), before)


def test_train_deterministic_streams(poisson):
    def one():
        net = small_net(7, equil=True)
        samples = tr.make_samples(poisson, 2, 25, seed=3)
        cfg = tr.TrainConfig(epochs=40, metric_stride=10, seed=3, test_grid=(64,))
        records, net2 = tr.train(net, poisson, samples, cfg)
        return records, nw.flat_params(net2)
    ra, pa = one()
    rb, pb = one()
    assert np.array_equal(pa, pb)
    for a, b in zip(ra, rb):
        assert a.loss_total == b.loss_total
        assert a.rel_l2_test_error == b.rel_l2_test_error
        assert a.per_layer_condition == b.per_layer_condition


def test_train_loss_decomposition_and_kappa_fields(poisson):
    net = small_net(5)
    samples = tr.make_samples(poisson, 2, 25, seed=2)
    records, _ = tr.train(net, poisson, samples,
                          tr.TrainConfig(epochs=20, metric_stride=5, test_grid=(64,)))
    assert len(records) == 4
    for r in records:
        assert r.loss_total == r.loss_boundary + r.loss_residual
        assert len(r.per_layer_condition) == 3
        assert all(k >= 1.0 for k in r.per_layer_condition)
        assert r.rel_l2_test_error >= 0


def test_train_nonfinite_loss_aborts_with_checkpoint(poisson):
    net = small_net(6)
    samples = tr.make_samples(poisson, 2, 25, seed=4)
    # one enormous step drives z^2 past the float64 range inside the activation
    cfg = tr.TrainConfig(epochs=10, learning_rate=1e200, metric_stride=2, test_grid=(32,))
    with pytest.raises(NonFiniteLossError) as exc:
        tr.train(net, poisson, samples, cfg)
    err = exc.value
    assert err.epoch >= 1
    assert err.checkpoint is not None
    total, _, _ = tr.composite_loss(err.checkpoint, poisson, samples)
    assert np.isfinite(total)


def test_train_eq5_monitor_holds(poisson):
    net = small_net(8)
    samples = tr.make_samples(poisson, 2, 20, seed=6)
    cfg = tr.TrainConfig(epochs=30, metric_stride=10, test_grid=(32,))
    records, _ = tr.train(net, poisson, samples, cfg, eq5_monitor=True)
    assert len(records) == 3


# --- test errors --------------------------------------------------------------------

def test_test_errors_exact_net():
    prob = PdeProblem(
        name="line", input_dim=1, lo=np.array([0.0]), hi=np.array([1.0]),
        residual=lambda p, j: np.zeros(p.shape[0]),
        residual_cotangent=lambda p, j: (np.zeros(p.shape[0]), np.zeros((p.shape[0], 1)),
                                         np.zeros((p.shape[0], 1))),
        boundary_specs=(), exact=lambda pts: 3.0 * pts[:, 0] - 0.5,
        grad_dims=(0,), hess_dims=(),
    )
    layers = [nw.Layer(np.array([[3.0]]), np.zeros(1), act.identity()),
              nw.Layer(np.array([[1.0]]), np.array([-0.5]), act.identity())]
    net = nw.Network(layers)
    l2a, l2r = tr.test_errors(net, prob, (101,))
    assert l2a == pytest.approx(0.0, abs=1e-14)
    assert l2r == pytest.approx(0.0, abs=1e-14)


def test_test_errors_zero_net_gives_rel_one(poisson):
    layers = [nw.Layer(np.zeros((1, 4)), np.zeros(4), act.tanh()),
              nw.Layer(np.zeros((4, 1)), np.zeros(1), act.identity())]
    net = nw.Network(layers)
    _, l2r = tr.test_errors(net, poisson, (257,))
    assert l2r == pytest.approx(1.0)


def test_test_errors_matches_double_loop(poisson, rng):
    net = small_net(9)
    grid = tr.evaluation_grid(poisson, (33,))
    l2a, l2r = tr.test_errors(net, poisson, (33,))
    diffs = []
    exact = []
    for x in grid:
        u = nw.forward(net, x)[0]
        e = poisson.exact(x[None, :])[0]
        diffs.append((u - e) ** 2)
        exact.append(e ** 2)
    assert l2a == pytest.approx(np.sqrt(np.mean(diffs)), rel=1e-12)
    assert l2r == pytest.approx(np.sqrt(np.sum(diffs) / np.sum(exact)), rel=1e-12)


def test_test_errors_requires_exact():
    prob = PdeProblem(
        name="noexact", input_dim=1, lo=np.array([0.0]), hi=np.array([1.0]),
        residual=lambda p, j: np.zeros(p.shape[0]),
        residual_cotangent=lambda p, j: (np.zeros(p.shape[0]), np.zeros((p.shape[0], 1)),
                                         np.zeros((p.shape[0], 1))),
        boundary_specs=(), exact=None, grad_dims=(), hess_dims=(),
    )
    with pytest.raises(NoExactSolutionError):
        tr.test_errors(small_net(), prob, (16,))


# --- weight condition tracking ----------------------------------------------------------

def test_weight_condition_orthogonal_layer():
    q, _ = np.linalg.qr(np.random.default_rng(3).standard_normal((8, 8)))
    layers = [nw.Layer(q, np.zeros(8), act.tanh()),
              nw.Layer(np.ones((8, 1)), np.zeros(1), act.identity())]
    net = nw.Network(layers)
    raw, eff = tr.weight_condition_track(net)
    assert raw[0] == pytest.approx(1.0, abs=1e-9)


def test_weight_condition_scale_invariant():
    net = small_net(11)
    raw1, _ = tr.weight_condition_track(net)
    net.layers[1].weights *= 10.0
    raw2, _ = tr.weight_condition_track(net)
    assert raw2[1] == pytest.approx(raw1[1], rel=1e-9)


def test_equilibrated_kappa_beats_random_diagonals(rng):
    """kappa(P W^T) <= kappa(D W^T) for random positive D, per layer (sqrt-n slack)."""
    net = small_net(13, equil=True)
    _, eff = tr.weight_condition_track(net)
    k = 1  # the equilibrated inner layer
    wt = net.layers[k].weights.T
    n = wt.shape[0]
    for _ in range(100):
        d = np.exp(rng.standard_normal(n))
        kd = linalg.condition_number(d[:, None] * wt)
        assert eff[k] <= np.sqrt(n) * kd * (1 + 1e-9)


# --- HVP and landscape --------------------------------------------------------------------

def test_hessian_vector_quadratic_exact(rng):
    A = np.array([[2.0, 0.3], [0.3, 1.0]])
    theta = np.array([0.4, -0.7])
    def grad(th):
        return A @ th
    v = np.array([1.0, 0.0])
    hv = tr.hessian_vector(grad, theta, v)
    assert np.allclose(hv, A @ v, atol=1e-9)


def test_hessian_vector_requires_unit_direction():
    with pytest.raises(ValueError):
        tr.hessian_vector(lambda t: t, np.zeros(2), np.array([2.0, 0.0]))


def test_hessian_vector_symmetry_on_real_net(poisson, rng):
    net = small_net(15)
    samples = tr.make_samples(poisson, 2, 15, seed=7)
    _, loss_grad = tr.pinn_loss_closures(net, poisson, samples)
    theta = nw.flat_params(net)
    v = rng.standard_normal(theta.size); v /= np.linalg.norm(v)
    w = rng.standard_normal(theta.size); w /= np.linalg.norm(w)
    hv = tr.hessian_vector(loss_grad, theta, v)
    hw = tr.hessian_vector(loss_grad, theta, w)
    a, b = w @ hv, v @ hw
    assert abs(a - b) <= 1e-4 * max(abs(a), abs(b), 1e-12)


def test_landscape_slice_quadratic_closed_form():
    a1, a2 = 3.0, 0.5
    A = np.diag([a1, a2])
    def loss(th):
        return 0.5 * th @ A @ th
    def grad(th):
        return A @ th
    theta = np.zeros(2)
    slc = tr.landscape_slice(loss, grad, theta, grid_half_width=1.0, grid_points=5,
                             lanczos_iters=2, seed=1)
    v1, v2 = slc.directions
    assert abs(v1 @ v2) < 1e-8
    assert slc.top_eigenvalues[0] == pytest.approx(a1, rel=1e-6)
    for alpha, beta, val in slc.grid:
        d = alpha * v1 + beta * v2
        assert val == pytest.approx(0.5 * d @ A @ d, abs=1e-8)
    center_rows = [row for row in slc.grid if row[0] == 0.0 and row[1] == 0.0]
    assert center_rows[0][2] == slc.center_loss


def test_landscape_grid_points_must_be_odd():
    with pytest.raises(ValueError):
        tr.landscape_slice(lambda t: 0.0, lambda t: t, np.zeros(3),
                           grid_half_width=1.0, grid_points=4)


# --- metrics csv ------------------------------------------------------------------------

def test_metrics_csv_schema(tmp_path, poisson):
    net = small_net(17)
    samples = tr.make_samples(poisson, 2, 10, seed=8)
    records, _ = tr.train(net, poisson, samples,
                          tr.TrainConfig(epochs=6, metric_stride=3, test_grid=(16,)))
    path = tmp_path / "metrics.csv"
    tr.save_metrics_csv(path, records)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == ("epoch,loss_total,loss_boundary,loss_residual,"
                       "l2_train,rel_l2_test,kappa_l1,kappa_l2,kappa_l3,seconds")
    assert len(lines) == 3


def test_equilibration_kappa_envelope_each_epoch(poisson):
    """kappa(P W^T) <= kappa(W^T) * max||row|| / min||row|| at every record."""
    net = small_net(19, equil=True)
    samples = tr.make_samples(poisson, 2, 20, seed=9)
    cfg = tr.TrainConfig(epochs=30, metric_stride=5, learning_rate=1e-3, test_grid=(16,))
    snapshots = []

    def on_record(rec):
        raw, eff = tr.weight_condition_track(net)
        snapshots.append((tuple(raw), tuple(eff)))

    tr.train(net, poisson, samples, cfg, on_record=on_record)
    assert snapshots
    for raw, eff in snapshots:
        for k in net.inner_layer_indices():
            w = net.layers[k].weights
            norms = np.sqrt(np.sum(w * w, axis=0))
            envelope = raw[k] * norms.max() / norms.min()
            assert eff[k] <= envelope * (1 + 1e-9)
