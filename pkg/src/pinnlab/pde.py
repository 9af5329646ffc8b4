"""Benchmark PDE problems, exact solutions, and collocation samplers.

Problems are axis-aligned-box collocation problems with Dirichlet-style
boundary/initial conditions (time is an extra coordinate, so an initial
condition is just the boundary face t = 0). Each problem exposes

* ``residual(points, jet)``: the PDE residual from network jets, and
* ``residual_cotangent(points, jet)``: its derivative with respect to
  (value, grad, diag_hess), which seeds reverse accumulation for residual
  gradients and residual-mode NTK rows.

The Burgers reference solution is the Cole-Hopf integral evaluated with
Gauss-Hermite quadrature (nodes from scipy); everything else has closed
forms. All samplers are deterministic under their seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_hermite

from .errors import DimensionMismatchError, QuadratureNotConvergedError
from .rng import SplitMix64

BURGERS_NU = 0.01 / math.pi
QUAD_TOL = 1e-6


@dataclass(frozen=True)
class BoundarySpec:
    """One face of the boundary/initial set.

    `measure` weighs proportional allocation when sampling the union;
    `sample(n, gen)` draws n points on the face, `target(points)` gives g.
    """
    name: str
    measure: float
    sample: callable
    target: callable


@dataclass(frozen=True)
class PdeProblem:
    name: str
    input_dim: int
    lo: np.ndarray
    hi: np.ndarray
    residual: callable             # (points (B,n0), Jet2 batch) -> (B,)
    residual_cotangent: callable   # (points, jet) -> (c0 (B,), c1 (B,n0), c2 (B,n0))
    boundary_specs: tuple
    exact: callable | None = None  # points (B,n0) -> (B,)
    exact_is_numeric: bool = False
    grad_dims: tuple = ()          # first-derivative coords the residual reads
    hess_dims: tuple = ()          # second-derivative coords the residual reads


def _squeeze_jet(jet):
    """Accept scalar-output jets as (B,), (B,n0), (B,n0) arrays."""
    v = np.asarray(jet.value)
    g = np.asarray(jet.grad)
    h = np.asarray(jet.diag_hess)
    if v.ndim == 2:
        v = v[:, 0]
        g = g[..., 0]
        h = h[..., 0]
    return v, g, h


# ---------------------------------------------------------------------------
# Poisson: -u'' = k^2 pi^2 sin(k pi x) on [-1, 1], u(+-1) = 0, u = sin(k pi x)


def poisson_problem(frequency_mode: str = "benchmark") -> PdeProblem:
    if frequency_mode == "motivation":
        k = 1.0
    elif frequency_mode == "benchmark":
        k = 5.0
    else:
        raise ValueError(f"frequency_mode must be 'motivation' or 'benchmark', got {frequency_mode!r}")
    kpi = k * math.pi

    def forcing(x):
        return kpi ** 2 * np.sin(kpi * x[:, 0])

    def residual(points, jet):
        _, _, h = _squeeze_jet(jet)
        return -h[:, 0] - forcing(points)

    def residual_cotangent(points, jet):
        B = points.shape[0]
        c0 = np.zeros(B)
        c1 = np.zeros((B, 1))
        c2 = np.full((B, 1), -1.0)
        return c0, c1, c2

    def exact(points):
        return np.sin(kpi * points[:, 0])

    def endpoint(value):
        def sample(n, gen):
            return np.full((n, 1), value)
        return sample

    specs = tuple(
        BoundarySpec(name, 1.0, endpoint(v), lambda pts: np.zeros(pts.shape[0]))
        for name, v in (("left", -1.0), ("right", 1.0))
    )
    return PdeProblem(
        name=f"poisson-{frequency_mode}", input_dim=1,
        lo=np.array([-1.0]), hi=np.array([1.0]),
        residual=residual, residual_cotangent=residual_cotangent,
        boundary_specs=specs, exact=exact,
        grad_dims=(0,), hess_dims=(0,),
    )


# ---------------------------------------------------------------------------
# high-frequency diffusion: u = e^{-t} sin(30 pi x) manufactured solution
#
# The printed equation omits its operator; consistency with the stated
# closed-form solution forces u_t = u_xx + ((30 pi)^2 - 1) e^{-t} sin(30 pi x).

DIFFUSION_FREQ = 30.0 * math.pi


def diffusion_problem() -> PdeProblem:
    w = DIFFUSION_FREQ
    coef = w * w - 1.0

    def forcing(points):
        return coef * np.exp(-points[:, 1]) * np.sin(w * points[:, 0])

    def residual(points, jet):
        _, g, h = _squeeze_jet(jet)
        return g[:, 1] - h[:, 0] - forcing(points)

    def residual_cotangent(points, jet):
        B = points.shape[0]
        c0 = np.zeros(B)
        c1 = np.zeros((B, 2))
        c1[:, 1] = 1.0
        c2 = np.zeros((B, 2))
        c2[:, 0] = -1.0
        return c0, c1, c2

    def exact(points):
        return np.exp(-points[:, 1]) * np.sin(w * points[:, 0])

    def initial_sample(n, gen):
        pts = np.zeros((n, 2))
        pts[:, 0] = gen.uniform(n, -1.0, 1.0)
        return pts

    def wall(x_value):
        def sample(n, gen):
            pts = np.empty((n, 2))
            pts[:, 0] = x_value
            pts[:, 1] = gen.uniform(n, 0.0, 1.0)
            return pts
        return sample

    specs = (
        BoundarySpec("initial", 2.0, initial_sample,
                     lambda pts: np.sin(w * pts[:, 0])),
        BoundarySpec("x=-1", 1.0, wall(-1.0), lambda pts: np.zeros(pts.shape[0])),
        BoundarySpec("x=+1", 1.0, wall(1.0), lambda pts: np.zeros(pts.shape[0])),
    )
    return PdeProblem(
        name="diffusion", input_dim=2,
        lo=np.array([-1.0, 0.0]), hi=np.array([1.0, 1.0]),
        residual=residual, residual_cotangent=residual_cotangent,
        boundary_specs=specs, exact=exact,
        grad_dims=(0, 1), hess_dims=(0,),
    )


# ---------------------------------------------------------------------------
# viscous Burgers: u_t + u u_x = nu u_xx, u(x,0) = -sin(pi x), u(+-1,t) = 0


def _cole_hopf_values(x, t, nodes, weights):
    """Vectorized Cole-Hopf quotient at strictly positive times.

    Substituting eta = 2 sqrt(nu t) z turns both integrals into Hermite form;
    the common exp max is factored out of numerator and denominator before
    exponentiation (the exponents reach +-1/(2 pi nu) ~ 50).
    """
    c = 2.0 * np.sqrt(BURGERS_NU * t)                      # (B,)
    arg = np.pi * (x[:, None] - c[:, None] * nodes[None, :])
    expo = -np.cos(arg) / (2.0 * math.pi * BURGERS_NU)
    expo -= expo.max(axis=1, keepdims=True)
    f = np.exp(expo) * weights[None, :]
    den = f.sum(axis=1)
    num = -(np.sin(arg) * f).sum(axis=1)
    return num / den


def cole_hopf_burgers(x: float, t: float, quad_nodes: int = 256) -> float:
    """Reference Burgers solution at one point via Gauss-Hermite quadrature.

    Requires t > 0 and quad_nodes >= 32. The value at quad_nodes is compared
    against the 2*quad_nodes refinement; a discrepancy above 1e-6 raises
    QuadratureNotConvergedError rather than returning a silently unconverged
    number.
    """
    if not t > 0.0:
        raise ValueError(f"cole_hopf_burgers needs t > 0, got t={t}")
    if quad_nodes < 32:
        raise ValueError(f"quad_nodes must be >= 32, got {quad_nodes}")
    xs = np.array([float(x)])
    ts = np.array([float(t)])
    vals = []
    for n in (quad_nodes, 2 * quad_nodes):
        z, w = roots_hermite(n)
        vals.append(float(_cole_hopf_values(xs, ts, z, w)[0]))
    delta = abs(vals[0] - vals[1])
    if delta > QUAD_TOL:
        raise QuadratureNotConvergedError(x, t, quad_nodes, delta, QUAD_TOL)
    return vals[0]


def burgers_exact_grid(points, quad_nodes: int = 256) -> np.ndarray:
    """Batch Cole-Hopf evaluation; rows with t = 0 use the initial condition."""
    pts = np.asarray(points, dtype=np.float64)
    out = np.empty(pts.shape[0])
    t0 = pts[:, 1] <= 0.0
    out[t0] = -np.sin(np.pi * pts[t0, 0])
    if np.any(~t0):
        z, w = roots_hermite(quad_nodes)
        out[~t0] = _cole_hopf_values(pts[~t0, 0], pts[~t0, 1], z, w)
    return out


def burgers_problem(quad_nodes: int = 256) -> PdeProblem:
    nu = BURGERS_NU

    def residual(points, jet):
        v, g, h = _squeeze_jet(jet)
        return g[:, 1] + v * g[:, 0] - nu * h[:, 0]

    def residual_cotangent(points, jet):
        v, g, _ = _squeeze_jet(jet)
        B = points.shape[0]
        c0 = g[:, 0].copy()
        c1 = np.zeros((B, 2))
        c1[:, 0] = v
        c1[:, 1] = 1.0
        c2 = np.zeros((B, 2))
        c2[:, 0] = -nu
        return c0, c1, c2

    def initial_sample(n, gen):
        pts = np.zeros((n, 2))
        pts[:, 0] = gen.uniform(n, -1.0, 1.0)
        return pts

    def wall(x_value):
        def sample(n, gen):
            pts = np.empty((n, 2))
            pts[:, 0] = x_value
            pts[:, 1] = gen.uniform(n, 0.0, 1.0)
            return pts
        return sample

    specs = (
        BoundarySpec("initial", 2.0, initial_sample,
                     lambda pts: -np.sin(np.pi * pts[:, 0])),
        BoundarySpec("x=-1", 1.0, wall(-1.0), lambda pts: np.zeros(pts.shape[0])),
        BoundarySpec("x=+1", 1.0, wall(1.0), lambda pts: np.zeros(pts.shape[0])),
    )
    return PdeProblem(
        name="burgers", input_dim=2,
        lo=np.array([-1.0, 0.0]), hi=np.array([1.0, 1.0]),
        residual=residual, residual_cotangent=residual_cotangent,
        boundary_specs=specs,
        exact=lambda pts: burgers_exact_grid(pts, quad_nodes),
        exact_is_numeric=True,
        grad_dims=(0, 1), hess_dims=(0,),
    )


PROBLEM_BUILDERS = {
    "poisson-motivation": lambda: poisson_problem("motivation"),
    "poisson-benchmark": lambda: poisson_problem("benchmark"),
    "diffusion": diffusion_problem,
    "burgers": burgers_problem,
}


def get_problem(name: str) -> PdeProblem:
    try:
        return PROBLEM_BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; have {sorted(PROBLEM_BUILDERS)}") from None


# ---------------------------------------------------------------------------
# samplers


def sample_latin_hypercube(lo, hi, n: int, seed: int) -> np.ndarray:
    """n stratified points in the box: one per stratum along every axis."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if lo.shape != hi.shape or lo.ndim != 1:
        raise DimensionMismatchError(f"bad box {lo.shape} vs {hi.shape}")
    if n < 1:
        raise ValueError("need n >= 1")
    gen = SplitMix64(seed)
    d = lo.shape[0]
    pts = np.empty((n, d))
    for axis in range(d):
        strata = (gen.permutation(n) + gen.uniform(n)) / n
        pts[:, axis] = lo[axis] + (hi[axis] - lo[axis]) * strata
    return pts


def sample_boundary(problem: PdeProblem, n: int, seed: int):
    """(points, targets) over the union of boundary faces.

    Allocation is proportional to each face's measure, largest remainders
    first so exactly n points come back.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    gen = SplitMix64(seed)
    measures = np.array([s.measure for s in problem.boundary_specs])
    quota = n * measures / measures.sum()
    counts = np.floor(quota).astype(int)
    rem = n - counts.sum()
    if rem:
        order = np.argsort(-(quota - counts), kind="stable")
        counts[order[:rem]] += 1
    pts, tgt = [], []
    for spec, c in zip(problem.boundary_specs, counts):
        if c == 0:
            continue
        p = spec.sample(int(c), gen)
        pts.append(p)
        tgt.append(spec.target(p))
    points = np.vstack(pts)
    return points, np.concatenate(tgt)


# ---------------------------------------------------------------------------
# reference-solution CSV (header "x,t,u", rows sorted by (t, x))


def save_reference_csv(path, x_grid, t_grid, u_values) -> None:
    """u_values[i, j] = u(x_grid[i], t_grid[j]); rows are written t-major."""
    x_grid = np.asarray(x_grid)
    t_grid = np.asarray(t_grid)
    U = np.asarray(u_values)
    if U.shape != (x_grid.size, t_grid.size):
        raise DimensionMismatchError(f"u_values {U.shape} vs grid {(x_grid.size, t_grid.size)}")
    with open(path, "w") as fh:
        fh.write("x,t,u\n")
        for j, t in enumerate(t_grid):
            for i, x in enumerate(x_grid):
                fh.write(f"{x:.17g},{t:.17g},{U[i, j]:.17g}\n")


def load_reference_csv(path):
    """Returns (x_grid, t_grid, u_values) after validating grid monotonicity."""
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if raw.shape[1] != 3:
        raise ValueError(f"reference CSV needs 3 columns, got {raw.shape[1]}")
    x = np.unique(raw[:, 0])
    t = np.unique(raw[:, 1])
    if raw.shape[0] != x.size * t.size:
        raise ValueError("reference CSV is not a full tensor grid")
    expect_t = np.repeat(t, x.size)
    expect_x = np.tile(x, t.size)
    if not (np.array_equal(raw[:, 1], expect_t) and np.array_equal(raw[:, 0], expect_x)):
        raise ValueError("reference CSV rows must be sorted t-major with x increasing")
    U = raw[:, 2].reshape(t.size, x.size).T
    return x, t, U
