"""Row equilibration, Jacobi scaling, and condition-number bounds.

The bounds implemented here:

* ``upper_bound_u``: kappa(A) <= U(A) = (2 / |det A|) (||A||_F^2 / n)^(n/2),
  computed in log-space so n ~ 20 does not overflow.
* ``reduction_factor``: the exact factor by which row equilibration shrinks
  U(A); always <= 1 by AM-GM, and U(PA) = factor * U(A) identically.
* ``lower_bound_pair`` / ``lower_bound_global``: kappa lower bounds from the
  angle between two rows. The hypotheses (cos(theta) strictly inside (0, 1))
  are enforced as AngleOutOfRangeError rather than silent NaN.

``van_der_sluis_ratios`` supports the randomized optimality study of row
equilibration against arbitrary positive diagonal scalings. Note the exact
theorem for the spectral-norm condition number carries a sqrt(n) factor
(kappa(EA) <= sqrt(n) * kappa(DA)); the unfactored inequality is a strong
empirical tendency, not an identity, and the suite reports both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import AngleOutOfRangeError, SingularMatrixError, ZeroDiagonalError, ZeroRowError
from .rng import SplitMix64

ROW_NORM_FLOOR = 1e-300


@dataclass(frozen=True)
class EquilibrationResult:
    p_diag: np.ndarray        # diagonal of P
    preconditioned: np.ndarray  # P A


def row_equilibrate(a) -> EquilibrationResult:
    """Scale each row of `a` to unit Euclidean norm; P = diag(1/||A_i||)."""
    A = linalg.as_matrix(a)
    norms = np.sqrt(np.sum(A * A, axis=1))
    bad = np.nonzero(norms <= ROW_NORM_FLOOR)[0]
    if bad.size:
        raise ZeroRowError(int(bad[0]))
    p = 1.0 / norms
    return EquilibrationResult(p, A * p[:, None])


def jacobi_precondition(a) -> EquilibrationResult:
    """P = diag(A)^(-1); the preconditioned matrix has unit diagonal."""
    A = linalg.as_matrix(a)
    if A.shape[0] != A.shape[1]:
        raise linalg.DimensionMismatchError(f"jacobi_precondition needs square, got {A.shape}")
    d = np.diag(A)
    bad = np.nonzero(np.abs(d) <= ROW_NORM_FLOOR)[0]
    if bad.size:
        raise ZeroDiagonalError(int(bad[0]))
    p = 1.0 / d
    return EquilibrationResult(p.copy(), A * p[:, None])


def _require_square_nonsingular(a):
    A = linalg.as_matrix(a)
    if A.shape[0] != A.shape[1]:
        raise linalg.DimensionMismatchError(f"expected square, got {A.shape}")
    logdet = linalg.log_abs_determinant(A)
    if not np.isfinite(logdet) or logdet < math.log(ROW_NORM_FLOOR):
        raise SingularMatrixError("det underflows; bound undefined")
    return A, logdet


def upper_bound_u(a) -> float:
    """Guggenheimer-style bound U(A) = (2/|det A|) (||A||_F^2/n)^(n/2)."""
    A, logdet = _require_square_nonsingular(a)
    n = A.shape[0]
    log_u = math.log(2.0) - logdet + 0.5 * n * math.log(np.sum(A * A) / n)
    return math.exp(log_u)


def reduction_factor(a) -> float:
    """prod_i ||A_i|| / (||A||_F^2/n)^(n/2); satisfies U(PA) = factor * U(A)."""
    A, _ = _require_square_nonsingular(a)
    n = A.shape[0]
    norms = np.sqrt(np.sum(A * A, axis=1))
    log_f = float(np.sum(np.log(norms))) - 0.5 * n * math.log(np.sum(A * A) / n)
    return math.exp(log_f)


def _pair_geometry(x1, x2):
    v1 = np.asarray(x1, dtype=np.float64).ravel()
    v2 = np.asarray(x2, dtype=np.float64).ravel()
    if v1.shape != v2.shape:
        raise linalg.DimensionMismatchError(f"row shapes differ: {v1.shape} vs {v2.shape}")
    n1 = np.sqrt(v1 @ v1)
    n2 = np.sqrt(v2 @ v2)
    if n1 <= ROW_NORM_FLOOR or n2 <= ROW_NORM_FLOOR:
        raise ZeroRowError(0 if n1 <= ROW_NORM_FLOOR else 1)
    cos = float(np.clip((v1 @ v2) / (n1 * n2), -1.0, 1.0))
    return n1, n2, cos


def lower_bound_pair(x1, x2) -> float:
    """kappa lower bound for the 2xn stack of x1, x2 from their angle.

    Requires cos(theta) in (0, 1), i.e. eps = 1 - cos(theta) in (0, 1);
    outside that range the underlying lemma says nothing and the call raises.
    """
    n1, n2, cos = _pair_geometry(x1, x2)
    if not (0.0 < cos < 1.0):
        raise AngleOutOfRangeError(
            f"cos(theta) = {cos:.6g} outside (0, 1); rows parallel or at >= 90 degrees"
        )
    eps = 1.0 - cos
    r = n1 / n2
    return math.sqrt((r + 1.0 / r + 2.0) / (4.0 * eps * (2.0 - eps)))


def lower_bound_global(a, pair_selection: str = "min_cosine") -> float:
    """(2/(n(n-1))) * lower_bound_pair over a selected row pair of `a`.

    `pair_selection` picks which pair anchors the bound: "min_cosine" follows
    the literal epsilon-as-minimum-cosine convention, "max_cosine" reads
    epsilon = 1 - cos as in the pair bound (so the minimizing epsilon). Both
    yield valid lower bounds since every hypothesis-satisfying pair does.
    """
    A = linalg.as_matrix(a)
    n = A.shape[0]
    if A.shape[0] != A.shape[1] or n < 2:
        raise linalg.DimensionMismatchError(f"need square n >= 2, got {A.shape}")
    if pair_selection not in ("min_cosine", "max_cosine"):
        raise ValueError(f"unknown pair_selection {pair_selection!r}")
    norms = np.sqrt(np.sum(A * A, axis=1))
    if np.any(norms <= ROW_NORM_FLOOR):
        raise ZeroRowError(int(np.argmin(norms)))
    C = np.clip((A @ A.T) / np.outer(norms, norms), -1.0, 1.0)
    iu = np.triu_indices(n, k=1)
    cosines = C[iu]
    outside = (cosines <= 0.0) | (cosines >= 1.0)
    if np.any(outside):
        k = int(np.nonzero(outside)[0][0])
        pair = (int(iu[0][k]), int(iu[1][k]))
        raise AngleOutOfRangeError(
            f"row pair {pair} has cos(theta) = {cosines[k]:.6g} outside (0, 1)", pair=pair
        )
    k = int(np.argmin(cosines)) if pair_selection == "min_cosine" else int(np.argmax(cosines))
    i, j = int(iu[0][k]), int(iu[1][k])
    return 2.0 / (n * (n - 1)) * lower_bound_pair(A[i], A[j])


def pair_bound_stack_kappa(x1, x2) -> float:
    """Exact kappa of the 2xn stack [x1; x2] via its 2x2 Gram eigenvalues."""
    v1 = np.asarray(x1, dtype=np.float64).ravel()
    v2 = np.asarray(x2, dtype=np.float64).ravel()
    a = v1 @ v1
    b = v2 @ v2
    c = v1 @ v2
    mean = 0.5 * (a + b)
    disc = math.sqrt(max(0.25 * (a - b) ** 2 + c * c, 0.0))
    lo = mean - disc
    if lo <= linalg.SINGULAR_RTOL * (mean + disc):
        raise SingularMatrixError("stacked rows numerically dependent")
    return math.sqrt((mean + disc) / lo)


# ---------------------------------------------------------------------------
# randomized verification suite


def van_der_sluis_ratios(n_matrices: int, n_diagonals: int, size: int, seed: int,
                         row_spread: float = 0.0, diag_spread: float = 1.0) -> np.ndarray:
    """kappa(EA)/kappa(DA) for random A and random positive diagonals D.

    A has i.i.d. standard-normal entries with per-row log-normal scale
    exp(row_spread * N(0,1)); D entries are exp(diag_spread * N(0,1)).
    Returns the flat array of all n_matrices * n_diagonals ratios.
    """
    gen = SplitMix64(seed)
    out = np.empty(n_matrices * n_diagonals)
    pos = 0
    for _ in range(n_matrices):
        A = gen.normal_matrix(size, size)
        if row_spread:
            A *= np.exp(row_spread * gen.standard_normal(size))[:, None]
        kEA = condition_number_after_equilibration(A)
        D = np.exp(diag_spread * gen.normal_matrix(n_diagonals, size))
        kDA = linalg.condition_numbers_batch(D[:, :, None] * A[None, :, :])
        out[pos: pos + n_diagonals] = kEA / kDA
        pos += n_diagonals
    return out


def condition_number_after_equilibration(a) -> float:
    return linalg.condition_number(row_equilibrate(a).preconditioned)


def verify_precond_suite(n_matrices: int = 10_000, n_diagonals: int = 100,
                         size: int = 6, seed: int = 2024) -> dict:
    """Randomized checks of the bound inequalities on one seeded ensemble.

    Returns violation counts for: kappa <= U, U(PA) = factor * U(A) (1e-10
    relative), factor <= 1, the pair and global lower bounds, L(PA) <= L(A),
    the strict kappa(EA) <= kappa(DA) comparison, and its sqrt(n)-weakened
    theorem form. Matrices are i.i.d. standard normal; diagonals log-normal.
    """
    gen = SplitMix64(seed)
    viol = {
        "kappa_le_u": 0, "reduction_identity": 0, "factor_le_one": 0,
        "pair_lower_bound": 0, "global_lower_bound": 0, "global_lower_bound_maxcos": 0,
        "equilibrated_L_le_L": 0, "vds_strict": 0, "vds_sqrt_n": 0,
    }
    checked = dict.fromkeys(viol, 0)
    worst_vds = 0.0
    sqn = math.sqrt(size)
    for _ in range(n_matrices):
        A = gen.normal_matrix(size, size)
        try:
            kA = linalg.condition_number(A)
            U = upper_bound_u(A)
        except SingularMatrixError:
            continue
        checked["kappa_le_u"] += 1
        if kA > U * (1.0 + 1e-9):
            viol["kappa_le_u"] += 1
        f = reduction_factor(A)
        checked["factor_le_one"] += 1
        if f > 1.0 + 1e-12:
            viol["factor_le_one"] += 1
        PA = row_equilibrate(A).preconditioned
        checked["reduction_identity"] += 1
        if abs(upper_bound_u(PA) - f * U) > 1e-10 * f * U:
            viol["reduction_identity"] += 1
        try:
            L_A = lower_bound_global(A)
            L_PA = lower_bound_global(PA)
            checked["global_lower_bound"] += 1
            if kA < L_A * (1.0 - 1e-9):
                viol["global_lower_bound"] += 1
            checked["equilibrated_L_le_L"] += 1
            if L_PA > L_A * (1.0 + 1e-9):
                viol["equilibrated_L_le_L"] += 1
            checked["global_lower_bound_maxcos"] += 1
            if kA < lower_bound_global(A, "max_cosine") * (1.0 - 1e-9):
                viol["global_lower_bound_maxcos"] += 1
        except AngleOutOfRangeError:
            pass
        try:
            bound = lower_bound_pair(A[0], A[1])
            checked["pair_lower_bound"] += 1
            if pair_bound_stack_kappa(A[0], A[1]) < bound * (1.0 - 1e-9):
                viol["pair_lower_bound"] += 1
        except (AngleOutOfRangeError, SingularMatrixError):
            pass
        kEA = linalg.condition_number(PA)
        D = np.exp(gen.normal_matrix(n_diagonals, size))
        kDA = linalg.condition_numbers_batch(D[:, :, None] * A[None, :, :])
        ratios = kEA / kDA
        worst_vds = max(worst_vds, float(ratios.max()))
        checked["vds_strict"] += n_diagonals
        viol["vds_strict"] += int(np.sum(ratios > 1.0 + 1e-9))
        checked["vds_sqrt_n"] += n_diagonals
        viol["vds_sqrt_n"] += int(np.sum(ratios > sqn * (1.0 + 1e-9)))
    return {
        "n_matrices": n_matrices, "n_diagonals": n_diagonals, "size": size, "seed": seed,
        "violations": viol, "checked": checked, "worst_vds_ratio": worst_vds,
    }
