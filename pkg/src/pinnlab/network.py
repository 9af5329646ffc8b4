"""Feedforward networks with second-order forward jets and reverse gradients.

A network is a stack of layers u -> phi(W^T u + b); the final layer is always
affine (identity activation). With `equilibrate_inner`, every layer except the
first and last applies phi(P_k W_k^T u + b) where P_k holds the inverse row
norms of W_k^T, recomputed by :func:`equilibrate_weights` (typically after
each optimizer step). P is treated as a constant of the current step during
differentiation.

Differentiation is organized around jets: a forward pass can carry, next to
values, first derivatives with respect to a chosen subset of input coordinates
and diagonal second derivatives with respect to a subset of those. Reverse
accumulation then yields parameter gradients of any scalar

    c0 * u(x) + sum_i c1[i] * du/dx_i + sum_i c2[i] * d^2u/dx_i^2,

which covers both plain outputs and PDE residual terms. Mixed second
derivatives are not propagated (every residual here needs only u_t, u_x,
u_xx-style terms), keeping memory linear in the input dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .activations import Activation, derivs3, identity
from .errors import (
    BadTopologyError,
    DimensionMismatchError,
    NonScalarOutputError,
    ZeroRowError,
)
from .rng import SplitMix64

ROW_NORM_FLOOR = 1e-300


@dataclass
class Layer:
    weights: np.ndarray  # (n_in, n_out); u @ weights implements W^T u
    bias: np.ndarray     # (n_out,)
    activation: Activation


@dataclass(frozen=True)
class RffEmbedding:
    b_matrix: np.ndarray  # (features, n0)
    scale: float


@dataclass
class Network:
    layers: list[Layer]
    equilibrate_inner: bool = False
    p_diag: list = field(default_factory=list)   # per layer: ndarray or None
    rff: RffEmbedding | None = None

    def __post_init__(self):
        if len(self.layers) < 2:
            raise BadTopologyError("need at least one hidden layer plus the affine output")
        if self.layers[-1].activation.kind != "identity":
            raise BadTopologyError("final layer must be affine (identity activation)")
        expect = 2 * self.rff.b_matrix.shape[0] if self.rff is not None else None
        for i, layer in enumerate(self.layers):
            n_in = layer.weights.shape[0]
            if expect is not None and n_in != expect:
                raise DimensionMismatchError(
                    f"layer {i} expects input width {expect}, weights say {n_in}"
                )
            expect = layer.weights.shape[1]
            if layer.bias.shape != (expect,):
                raise DimensionMismatchError(f"layer {i} bias shape {layer.bias.shape}")
        if not self.p_diag:
            self.p_diag = [None] * len(self.layers)
        if self.equilibrate_inner:
            equilibrate_weights(self)

    @property
    def input_dim(self) -> int:
        if self.rff is not None:
            return self.rff.b_matrix.shape[1]
        return self.layers[0].weights.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weights.shape[1]

    def inner_layer_indices(self) -> list[int]:
        # layers 2 .. L-1 in 1-indexed terms: everything but first and last
        return list(range(1, len(self.layers) - 1))

    def widths(self) -> tuple[int, ...]:
        return (self.input_dim,) + tuple(l.weights.shape[1] for l in self.layers)

    def parameter_count(self) -> int:
        return sum(l.weights.size + l.bias.size for l in self.layers)


@dataclass(frozen=True)
class Jet2:
    """Value with first and diagonal-second input derivatives.

    Shapes for a batch of B points through an n_L-output network:
    value (B, n_L), grad (B, n0, n_L), diag_hess (B, n0, n_L). Single-point
    calls squeeze the batch axis.
    """
    value: np.ndarray
    grad: np.ndarray
    diag_hess: np.ndarray


@dataclass(frozen=True)
class ParamGradient:
    per_layer: list  # [(dW, db), ...]

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([dw.ravel(), db.ravel()])
                               for dw, db in self.per_layer])


def init_he(widths, activation: Activation, seed: int, *,
            equilibrate_inner: bool = False,
            rff_features: int = 0, rff_scale: float = 1.0) -> Network:
    """He-initialized network: W ~ N(0, 2/fan_in), zero biases.

    `widths` lists (n0, hidden..., n_L) with at least one hidden layer. The
    draw order is fixed (RFF matrix first if requested, then each layer's
    weights row-major) so a seed pins the network bit-for-bit.
    """
    widths = tuple(int(w) for w in widths)
    if len(widths) < 3:
        raise BadTopologyError(f"widths {widths} has no hidden layer")
    if any(w < 1 for w in widths):
        raise BadTopologyError(f"widths must be >= 1, got {widths}")
    gen = SplitMix64(seed)
    rff = None
    dims = list(widths)
    if rff_features > 0:
        if rff_scale <= 0:
            raise ValueError("rff_scale must be positive")
        b = gen.normal_matrix(rff_features, widths[0], std=rff_scale)
        rff = RffEmbedding(b, float(rff_scale))
        dims[0] = 2 * rff_features
    layers = []
    for i in range(len(dims) - 1):
        n_in, n_out = dims[i], dims[i + 1]
        act = activation if i < len(dims) - 2 else identity()
        w = gen.normal_matrix(n_in, n_out, std=np.sqrt(2.0 / n_in))
        layers.append(Layer(w, np.zeros(n_out), act))
    return Network(layers, equilibrate_inner=equilibrate_inner, rff=rff)


def init_fanin_uniform(widths, activation: Activation, seed: int, *,
                       equilibrate_inner: bool = False,
                       rff_features: int = 0, rff_scale: float = 1.0) -> Network:
    """W, b ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer.

    The benchmark-training default: nonzero biases spread the first layer's
    activation bumps across the domain, which the zero-bias He scheme cannot
    do at initialization. Same draw-order determinism contract as init_he.
    """
    widths = tuple(int(w) for w in widths)
    if len(widths) < 3:
        raise BadTopologyError(f"widths {widths} has no hidden layer")
    if any(w < 1 for w in widths):
        raise BadTopologyError(f"widths must be >= 1, got {widths}")
    gen = SplitMix64(seed)
    rff = None
    dims = list(widths)
    if rff_features > 0:
        if rff_scale <= 0:
            raise ValueError("rff_scale must be positive")
        b = gen.normal_matrix(rff_features, widths[0], std=rff_scale)
        rff = RffEmbedding(b, float(rff_scale))
        dims[0] = 2 * rff_features
    layers = []
    for i in range(len(dims) - 1):
        n_in, n_out = dims[i], dims[i + 1]
        act = activation if i < len(dims) - 2 else identity()
        lim = 1.0 / np.sqrt(n_in)
        w = gen.uniform(n_in * n_out, -lim, lim).reshape(n_in, n_out)
        b = gen.uniform(n_out, -lim, lim)
        layers.append(Layer(w, b, act))
    return Network(layers, equilibrate_inner=equilibrate_inner, rff=rff)


def equilibrate_weights(net: Network):
    """Refresh p_diag = 1/||rows of W_k^T|| for the inner layers.

    First and last layers are never equilibrated. Returns the updated list
    (entries None where not applicable).
    """
    if not net.equilibrate_inner:
        raise ValueError("network was not built with equilibrate_inner")
    for k in net.inner_layer_indices():
        w = net.layers[k].weights
        col_norms = np.sqrt(np.sum(w * w, axis=0))  # rows of W^T
        bad = np.nonzero(col_norms <= ROW_NORM_FLOOR)[0]
        if bad.size:
            raise ZeroRowError(int(bad[0]), layer=k)
        net.p_diag[k] = 1.0 / col_norms
    return net.p_diag


def effective_weight(net: Network, k: int) -> np.ndarray:
    """W_k with the equilibration column scaling applied (if any)."""
    w = net.layers[k].weights
    p = net.p_diag[k]
    return w * p if p is not None else w


def rff_embed(x, b_matrix, jets: bool):
    """[sin(Bx); cos(Bx)] embedding, optionally with first/second derivatives.

    x may be (n0,) or (B, n0). With jets=True returns (v, g, h) where
    g[b, i, :] and h[b, i, :] are the first and second derivatives of the
    embedding with respect to x_i.
    """
    B = np.asarray(b_matrix, dtype=np.float64)
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != B.shape[1]:
        raise DimensionMismatchError(f"x has dim {X.shape[1]}, B expects {B.shape[1]}")
    phase = X @ B.T                      # (batch, m)
    sn, cs = np.sin(phase), np.cos(phase)
    v = np.concatenate([sn, cs], axis=1)
    if not jets:
        return v[0] if single else v
    n0 = B.shape[1]
    bt = B.T[None, :, :, ]               # (1, n0, m)
    g = np.concatenate([cs[:, None, :] * bt, -sn[:, None, :] * bt], axis=2)
    bt2 = (B.T * B.T)[None, :, :]
    h = np.concatenate([-sn[:, None, :] * bt2, -cs[:, None, :] * bt2], axis=2)
    if single:
        return v[0], g[0], h[0]
    return v, g, h


# ---------------------------------------------------------------------------
# forward / backward engine


def _initial_state(net: Network, X, grad_dims, hess_dims):
    Bn = X.shape[0]
    if net.rff is not None:
        if grad_dims:
            v, g_full, h_full = rff_embed(X, net.rff.b_matrix, jets=True)
            g = g_full[:, list(grad_dims), :]
            h = h_full[:, list(hess_dims), :] if hess_dims else np.zeros((Bn, 0, v.shape[1]))
        else:
            v = rff_embed(X, net.rff.b_matrix, jets=False)
            g = np.zeros((Bn, 0, v.shape[1]))
            h = np.zeros((Bn, 0, v.shape[1]))
        return v, g, h
    v = X.copy()
    n0 = X.shape[1]
    g = np.zeros((Bn, len(grad_dims), n0))
    for i, d in enumerate(grad_dims):
        g[:, i, d] = 1.0
    h = np.zeros((Bn, len(hess_dims), n0))
    return v, g, h


def _mm(t, w):
    """Right-multiply the last axis by w, for 2-D or 3-D t."""
    if t.ndim == 2:
        return t @ w
    B, D, n = t.shape
    if D == 0:
        return np.zeros((B, 0, w.shape[1]))
    return (t.reshape(B * D, n) @ w).reshape(B, D, w.shape[1])


def _forward(net: Network, X, grad_dims=(), hess_dims=(), keep=False):
    """Jet-forward pass. Returns (v, g, h, cache).

    grad_dims: input coordinates whose first derivatives are carried.
    hess_dims: subset of grad_dims whose diagonal second derivatives are
    carried. cache is None unless keep=True.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise DimensionMismatchError(f"expected (B, {net.input_dim}) inputs, got {X.shape}")
    grad_dims = tuple(grad_dims)
    hess_dims = tuple(hess_dims)
    if any(d not in grad_dims for d in hess_dims):
        raise ValueError("hess_dims must be a subset of grad_dims")
    hsel = [grad_dims.index(d) for d in hess_dims]
    v, g, h = _initial_state(net, X, grad_dims, hess_dims)
    cache = [] if keep else None
    # derivative order actually needed: +1 when reverse accumulation follows
    if hess_dims:
        order = 3 if keep else 2
    elif grad_dims:
        order = 2
    else:
        order = 1 if keep else 0
    for k, layer in enumerate(net.layers):
        wp = effective_weight(net, k)
        zv = v @ wp + layer.bias
        zg = _mm(g, wp)
        zh = _mm(h, wp)
        hidden = k < len(net.layers) - 1
        if hidden:
            E, d1, d2, d3 = derivs3(layer.activation, zv, order)
            if keep:
                cache.append((v, g, h, zg, zh, d1, d2, d3, wp))
            v = E
            if grad_dims:
                g = d1[:, None, :] * zg
                h = d2[:, None, :] * (zg[:, hsel, :] ** 2) + d1[:, None, :] * zh \
                    if hess_dims else zh
            else:
                g, h = zg, zh
        else:
            if keep:
                cache.append((v, g, h, zg, zh, None, None, None, wp))
            v, g, h = zv, zg, zh
    return v, g, h, (cache, grad_dims, hess_dims, hsel)


def _backward(net: Network, ctx, vbar, gbar, hbar, per_sample=False):
    """Reverse accumulation through a kept jet-forward pass.

    Cotangents pair with the final (v, g, h). Returns ParamGradient with the
    batch reduced, or a (B, P) per-sample matrix when per_sample=True.
    """
    cache, grad_dims, hess_dims, hsel = ctx
    nh = len(hess_dims)
    Bn = vbar.shape[0]
    grads = [None] * len(net.layers)
    rows = [] if per_sample else None
    for k in reversed(range(len(net.layers))):
        v_in, g_in, h_in, zg, zh, d1, d2, d3, wp = cache[k]
        hidden = k < len(net.layers) - 1
        if hidden:
            zvbar = vbar * d1
            if gbar.shape[1]:
                zvbar += np.einsum("bdn,bdn->bn", gbar, d2[:, None, :] * zg)
            if nh:
                zvbar += np.einsum("bdn,bdn->bn", hbar,
                                   d3[:, None, :] * zg[:, hsel, :] ** 2 + d2[:, None, :] * zh)
            zgbar = d1[:, None, :] * gbar
            if nh:
                zgbar[:, hsel, :] += 2.0 * d2[:, None, :] * zg[:, hsel, :] * hbar
            zhbar = d1[:, None, :] * hbar
        else:
            zvbar, zgbar, zhbar = vbar, gbar, hbar
        p = net.p_diag[k]
        if per_sample:
            dw = np.einsum("bi,bj->bij", v_in, zvbar)
            if zgbar.shape[1]:
                dw += np.einsum("bdi,bdj->bij", g_in, zgbar)
            if nh:
                dw += np.einsum("bdi,bdj->bij", h_in, zhbar)
            if p is not None:
                dw *= p
            rows.append((dw.reshape(Bn, -1), zvbar))
        else:
            dw = v_in.T @ zvbar
            if zgbar.shape[1]:
                D = zgbar.shape[1]
                dw += g_in.reshape(Bn * D, -1).T @ zgbar.reshape(Bn * D, -1)
            if nh:
                dw += h_in.reshape(Bn * nh, -1).T @ zhbar.reshape(Bn * nh, -1)
            if p is not None:
                dw = dw * p
            grads[k] = (dw, zvbar.sum(axis=0))
        if k:
            vbar = zvbar @ wp.T
            gbar = _mm(zgbar, wp.T)
            hbar = _mm(zhbar, wp.T)
    if per_sample:
        rows.reverse()
        return np.concatenate([np.concatenate([dw, db], axis=1) for dw, db in rows], axis=1)
    return ParamGradient(grads)


# ---------------------------------------------------------------------------
# public operations


def forward(net: Network, x) -> np.ndarray:
    """Network values at x; accepts a single point (n0,) or a batch (B, n0)."""
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    v, _, _, _ = _forward(net, np.atleast_2d(X))
    return v[0] if single else v


def forward_jet(net: Network, x) -> Jet2:
    """Values plus first and diagonal-second derivatives w.r.t. every input."""
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X2 = np.atleast_2d(X)
    dims = tuple(range(net.input_dim))
    v, g, h, _ = _forward(net, X2, grad_dims=dims, hess_dims=dims)
    if single:
        return Jet2(v[0], g[0], h[0])
    return Jet2(v, g, h)


def grad_params(net: Network, x, c0: float = 1.0, c1=None, c2=None) -> ParamGradient:
    """Gradient w.r.t. every weight/bias of the scalar

        c0 * u(x) + sum_i c1[i] * du/dx_i + sum_i c2[i] * d^2u/dx_i^2.

    Scalar-output networks only. Equilibration diagonals are held constant
    (stop-gradient), matching their recompute-after-step training treatment.
    """
    if net.output_dim != 1:
        raise NonScalarOutputError(f"grad_params needs n_L = 1, got {net.output_dim}")
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n0 = net.input_dim
    c1 = np.zeros(n0) if c1 is None else np.asarray(c1, dtype=np.float64)
    c2 = np.zeros(n0) if c2 is None else np.asarray(c2, dtype=np.float64)
    if c1.shape != (n0,) or c2.shape != (n0,):
        raise DimensionMismatchError(f"cotangent weights must have shape ({n0},)")
    dims = tuple(range(n0))
    v, g, h, ctx = _forward(net, X, grad_dims=dims, hess_dims=dims, keep=True)
    vbar = np.full((X.shape[0], 1), float(c0))
    gbar = np.repeat(c1[None, :, None], X.shape[0], axis=0)
    hbar = np.repeat(c2[None, :, None], X.shape[0], axis=0)
    return _backward(net, ctx, vbar, gbar, hbar)


def input_jacobian(net: Network, x) -> np.ndarray:
    """Jacobian du/dx, shape (n_L, n0) per point (batched: (B, n_L, n0))."""
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X2 = np.atleast_2d(X)
    dims = tuple(range(net.input_dim))
    _, g, _, _ = _forward(net, X2, grad_dims=dims)
    jac = np.swapaxes(g, 1, 2)
    return jac[0] if single else jac


def flat_params(net: Network) -> np.ndarray:
    return np.concatenate([np.concatenate([l.weights.ravel(), l.bias.ravel()])
                           for l in net.layers])


def set_flat_params(net: Network, vec) -> None:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (net.parameter_count(),):
        raise DimensionMismatchError(
            f"parameter vector has {vec.shape}, network needs ({net.parameter_count()},)"
        )
    pos = 0
    for layer in net.layers:
        n = layer.weights.size
        layer.weights[...] = vec[pos: pos + n].reshape(layer.weights.shape)
        pos += n
        n = layer.bias.size
        layer.bias[...] = vec[pos: pos + n]
        pos += n
    if net.equilibrate_inner:
        equilibrate_weights(net)


def clone(net: Network) -> Network:
    layers = [Layer(l.weights.copy(), l.bias.copy(), l.activation) for l in net.layers]
    out = Network(layers, equilibrate_inner=net.equilibrate_inner, rff=net.rff)
    out.p_diag = [None if p is None else p.copy() for p in net.p_diag]
    return out


# ---------------------------------------------------------------------------
# checkpoint text format


def save_checkpoint(net: Network, path) -> None:
    """Self-describing text checkpoint: header, then per-layer matrices."""
    with open(path, "w") as fh:
        fh.write("pinnlab-network 1\n")
        fh.write("widths " + " ".join(str(w) for w in net.widths()) + "\n")
        acts = {l.activation for l in net.layers[:-1]}
        act = net.layers[0].activation
        if len(acts) > 1:
            raise ValueError("checkpoint format stores a single hidden activation")
        fh.write(f"activation {act.kind} {act.param:.17g}\n")
        fh.write(f"equilibrate {int(net.equilibrate_inner)}\n")
        if net.rff is not None:
            m, n0 = net.rff.b_matrix.shape
            fh.write(f"rff {m} {n0} {net.rff.scale:.17g}\n")
        else:
            fh.write("rff 0 0 0\n")
        def write_mat(a):
            fh.write(f"{a.shape[0]} {a.shape[1]}\n")
            for row in a:
                fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")
        if net.rff is not None:
            write_mat(net.rff.b_matrix)
        for layer in net.layers:
            write_mat(layer.weights)
            write_mat(layer.bias[None, :])


def load_checkpoint(path) -> Network:
    with open(path) as fh:
        magic = fh.readline().split()
        if magic[:1] != ["pinnlab-network"]:
            raise ValueError(f"not a network checkpoint: {magic!r}")
        widths = [int(w) for w in fh.readline().split()[1:]]
        kind, param = fh.readline().split()[1:]
        act = Activation(kind, float(param))
        equil = bool(int(fh.readline().split()[1]))
        m, n0, scale = fh.readline().split()[1:]
        m, n0, scale = int(m), int(n0), float(scale)
        def read_mat():
            r, c = (int(t) for t in fh.readline().split())
            rows = [np.array(fh.readline().split(), dtype=np.float64) for _ in range(r)]
            return np.vstack(rows).reshape(r, c)
        rff = RffEmbedding(read_mat(), scale) if m > 0 else None
        layers = []
        n_layers = len(widths) - 1
        for i in range(n_layers):
            w = read_mat()
            b = read_mat()[0]
            layers.append(Layer(w, b, act if i < n_layers - 1 else identity()))
    return Network(layers, equilibrate_inner=equil, rff=rff)
