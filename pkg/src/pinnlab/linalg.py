"""Dense real linear algebra on float64 numpy arrays.

Matrices are plain 2-D C-order float64 arrays validated by :func:`as_matrix`
(finite entries, at least 1x1). The symmetric eigensolver is a cyclic Jacobi
sweep with a threshold schedule, chosen for unconditional accuracy at the
few-thousand-row scales this library needs; singular values come from the
eigendecomposition of the smaller Gram matrix, and determinants from LU with
partial pivoting. A batched eigenvalue-only Jacobi handles stacks of small
matrices (the randomized preconditioning suite evaluates ~1e6 of them).

Fixed tolerances (module constants, not configurable):

==================  =======  =====================================================
SYMMETRY_RTOL       1e-10    max |A - A^T| relative to max |A| accepted as symmetric
OFFDIAG_STOP_RTOL   1e-13    Jacobi stops when off(A) <= rtol * ||A||_F
SINGULAR_RTOL       1e-14    sigma_min <= rtol * sigma_max reported as singular
MAX_SWEEPS          64       hard cap on Jacobi sweeps
==================  =======  =====================================================
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NonSymmetricError, SingularMatrixError
from .rng import SplitMix64

SYMMETRY_RTOL = 1e-10
OFFDIAG_STOP_RTOL = 1e-13
SINGULAR_RTOL = 1e-14
MAX_SWEEPS = 64


def as_matrix(a) -> np.ndarray:
    """Validate and return `a` as a 2-D float64 array with finite entries."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-D array, got ndim={m.ndim}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionMismatchError(f"empty matrix shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return np.ascontiguousarray(m)


@dataclass(frozen=True)
class SymEigResult:
    eigenvalues: np.ndarray   # descending
    eigenvectors: np.ndarray  # column i pairs with eigenvalues[i]


def _round_robin_rounds(n):
    """Tournament schedule: n-1 rounds of disjoint index pairs covering all pairs."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a != -1 and b != -1:
                pairs.append((min(a, b), max(a, b)))
        rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _apply_round(A, V, p_idx, q_idx, thresh):
    """One parallel-ordered Jacobi round: disjoint rotations as J^T A J, V J."""
    apq = A[p_idx, q_idx]
    live = np.abs(apq) > thresh
    if not np.any(live):
        return
    app = A[p_idx, p_idx]
    aqq = A[q_idx, q_idx]
    theta = np.zeros(apq.shape)
    with np.errstate(over="ignore", invalid="ignore"):
        np.divide(aqq - app, 2.0 * apq, out=theta, where=live)
        # theta -> +-inf collapses t to 0, which is the right limit
        t = np.where(theta == 0.0, 1.0,
                     np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0)))
    t = np.where(live, t, 0.0)
    c = 1.0 / np.sqrt(t * t + 1.0)
    s = t * c
    cb = c[:, None]
    sb = s[:, None]
    Ap = A[p_idx, :].copy()
    Aq = A[q_idx, :].copy()
    A[p_idx, :] = cb * Ap - sb * Aq
    A[q_idx, :] = sb * Ap + cb * Aq
    Ap = A[:, p_idx].copy()
    Aq = A[:, q_idx].copy()
    A[:, p_idx] = Ap * c - Aq * s
    A[:, q_idx] = Ap * s + Aq * c
    A[p_idx[live], q_idx[live]] = 0.0
    A[q_idx[live], p_idx[live]] = 0.0
    if V is not None:
        Vp = V[:, p_idx].copy()
        Vq = V[:, q_idx].copy()
        V[:, p_idx] = Vp * c - Vq * s
        V[:, q_idx] = Vp * s + Vq * c


def _offdiag_norm(A):
    return np.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))


def sym_eig(a) -> SymEigResult:
    """Full spectrum of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps use the round-robin parallel ordering (disjoint rotations per
    round applied as one orthogonal similarity), which is algebraically a
    cyclic Jacobi sweep with vectorizable rounds. Eigenvalues come back
    descending with orthonormal eigenvector columns. Raises NonSymmetricError
    when the relative asymmetry exceeds SYMMETRY_RTOL and
    DimensionMismatchError for non-square input.
    """
    A = as_matrix(a)
    n, m = A.shape
    if n != m:
        raise DimensionMismatchError(f"sym_eig needs a square matrix, got {A.shape}")
    scale = np.max(np.abs(A)) if n else 0.0
    if scale > 0 and np.max(np.abs(A - A.T)) > SYMMETRY_RTOL * scale:
        raise NonSymmetricError(
            f"asymmetry {np.max(np.abs(A - A.T)):.3e} exceeds {SYMMETRY_RTOL:.0e} * max|A|"
        )
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    if n == 1:
        return SymEigResult(A[0, :1].copy(), V)
    fro = np.sqrt(np.sum(A * A))
    stop = OFFDIAG_STOP_RTOL * fro if fro > 0 else 0.0
    rounds = _round_robin_rounds(n)
    for sweep in range(MAX_SWEEPS):
        off = _offdiag_norm(A)
        if off <= stop:
            break
        # threshold schedule: early sweeps skip rotations too small to matter
        thresh = off / (n * n) if sweep < 3 else 0.0
        for p_idx, q_idx in rounds:
            _apply_round(A, V, p_idx, q_idx, thresh)
    order = np.argsort(np.diag(A))[::-1]
    return SymEigResult(np.diag(A)[order].copy(), np.ascontiguousarray(V[:, order]))


def sym_eigvals(a) -> np.ndarray:
    """Eigenvalues only (descending); same sweeps minus eigenvector updates."""
    A = as_matrix(a)
    n, m = A.shape
    if n != m:
        raise DimensionMismatchError(f"sym_eigvals needs a square matrix, got {A.shape}")
    scale = np.max(np.abs(A)) if n else 0.0
    if scale > 0 and np.max(np.abs(A - A.T)) > SYMMETRY_RTOL * scale:
        raise NonSymmetricError("matrix is not symmetric to tolerance")
    A = 0.5 * (A + A.T)
    if n == 1:
        return A[0, :1].copy()
    fro = np.sqrt(np.sum(A * A))
    stop = OFFDIAG_STOP_RTOL * fro if fro > 0 else 0.0
    rounds = _round_robin_rounds(n)
    for sweep in range(MAX_SWEEPS):
        off = _offdiag_norm(A)
        if off <= stop:
            break
        thresh = off / (n * n) if sweep < 3 else 0.0
        for p_idx, q_idx in rounds:
            _apply_round(A, None, p_idx, q_idx, thresh)
    return -np.sort(-np.diag(A))


def sym_eigvals_batch(stack) -> np.ndarray:
    """Eigenvalues (descending) of a (B, n, n) stack of symmetric matrices.

    Same cyclic Jacobi rotations as :func:`sym_eig`, index-synchronized across
    the batch; intended for small n (the preconditioning suite uses n <= 16).
    """
    A = np.array(stack, dtype=np.float64)
    if A.ndim != 3 or A.shape[1] != A.shape[2]:
        raise DimensionMismatchError(f"expected (B, n, n), got {A.shape}")
    A = 0.5 * (A + np.swapaxes(A, 1, 2))
    B, n, _ = A.shape
    if n == 1:
        return A[:, :, 0].copy()
    fro = np.sqrt(np.sum(A * A, axis=(1, 2)))
    stop = OFFDIAG_STOP_RTOL * np.max(fro) if B else 0.0
    idx = np.arange(B)
    for _ in range(MAX_SWEEPS):
        off2 = np.sum(A * A, axis=(1, 2)) - np.sum(np.diagonal(A, axis1=1, axis2=2) ** 2, axis=1)
        if np.sqrt(np.max(off2)) <= stop:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[:, p, q]
                live = apq != 0.0
                theta = np.zeros(B)
                with np.errstate(over="ignore"):
                    np.divide(A[:, q, q] - A[:, p, p], 2.0 * apq, out=theta, where=live)
                t = np.where(
                    theta == 0.0, 1.0,
                    np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0)),
                )
                t = np.where(live, t, 0.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                cb = c[:, None]
                sb = s[:, None]
                Ap = A[:, p, :].copy()
                Aq = A[:, q, :].copy()
                A[:, p, :] = cb * Ap - sb * Aq
                A[:, q, :] = sb * Ap + cb * Aq
                Ap = A[:, :, p].copy()
                Aq = A[:, :, q].copy()
                A[:, :, p] = cb * Ap - sb * Aq
                A[:, :, q] = sb * Ap + cb * Aq
                A[idx, p, q] = 0.0
                A[idx, q, p] = 0.0
    vals = np.diagonal(A, axis1=1, axis2=2)
    return -np.sort(-vals, axis=1)


def singular_values(a) -> np.ndarray:
    """Singular values, descending, via the smaller Gram matrix's spectrum."""
    A = as_matrix(a)
    m, n = A.shape
    gram = A.T @ A if n <= m else A @ A.T
    return np.sqrt(np.clip(sym_eigvals(gram), 0.0, None))


def singular_values_batch(stack) -> np.ndarray:
    A = np.asarray(stack, dtype=np.float64)
    if A.ndim != 3:
        raise DimensionMismatchError(f"expected (B, m, n), got {A.shape}")
    m, n = A.shape[1], A.shape[2]
    gram = np.einsum("bji,bjk->bik", A, A) if n <= m else np.einsum("bij,bkj->bik", A, A)
    return np.sqrt(np.clip(sym_eigvals_batch(gram), 0.0, None))


def condition_number(a) -> float:
    """sigma_max / sigma_min; raises SingularMatrixError near rank deficiency."""
    s = singular_values(a)
    if not np.all(np.isfinite(s)):
        raise SingularMatrixError("Gram spectrum overflowed; matrix treated as singular")
    if s[-1] <= SINGULAR_RTOL * s[0]:
        raise SingularMatrixError(
            f"sigma_min {s[-1]:.3e} <= {SINGULAR_RTOL:.0e} * sigma_max {s[0]:.3e}"
        )
    return float(s[0] / s[-1])


def condition_numbers_batch(stack) -> np.ndarray:
    """Batched condition numbers; singular members come back as +inf."""
    s = singular_values_batch(stack)
    smax, smin = s[:, 0], s[:, -1]
    out = np.full(s.shape[0], np.inf)
    ok = smin > SINGULAR_RTOL * smax
    out[ok] = smax[ok] / smin[ok]
    return out


def lu_factor(a):
    """LU with partial pivoting. Returns (LU, pivots, sign); LU packs both factors."""
    A = as_matrix(a).copy()
    n, m = A.shape
    if n != m:
        raise DimensionMismatchError(f"lu_factor needs a square matrix, got {A.shape}")
    piv = np.arange(n)
    sign = 1.0
    for k in range(n - 1):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if p != k:
            A[[k, p], :] = A[[p, k], :]
            piv[[k, p]] = piv[[p, k]]
            sign = -sign
        akk = A[k, k]
        if akk == 0.0:
            continue
        A[k + 1:, k] /= akk
        A[k + 1:, k + 1:] -= np.outer(A[k + 1:, k], A[k, k + 1:])
    return A, piv, sign


def determinant(a) -> float:
    """Determinant via LU with partial pivoting."""
    LU, _, sign = lu_factor(a)
    return float(sign * np.prod(np.diag(LU)))


def log_abs_determinant(a) -> float:
    """log|det A|; -inf for an exactly singular matrix."""
    LU, _, _ = lu_factor(a)
    d = np.abs(np.diag(LU))
    if np.any(d == 0.0):
        return -np.inf
    return float(np.sum(np.log(d)))


@dataclass(frozen=True)
class LanczosResult:
    top_values: np.ndarray
    top_vectors: np.ndarray      # columns
    bottom_values: np.ndarray    # ascending (bottom_values[0] is the smallest)
    bottom_vectors: np.ndarray
    restarts: int


def lanczos_extremal(apply, dim: int, k: int, iters: int, seed: int) -> LanczosResult:
    """Extremal eigenpair estimates of a symmetric linear operator.

    `apply(v) -> A v` is only probed through matvecs. Full reorthogonalization
    keeps the Krylov basis numerically orthogonal; when beta underflows the
    basis is padded with a fresh random direction and the restart is counted
    in the result rather than raised (the operator may simply be low-rank).
    """
    if not (1 <= k <= iters <= dim):
        raise DimensionMismatchError(f"need 1 <= k <= iters <= dim, got k={k}, iters={iters}, dim={dim}")
    gen = SplitMix64(seed)
    restarts = 0
    Q = np.empty((dim, iters))
    alpha = np.zeros(iters)
    beta = np.zeros(iters)
    v = gen.standard_normal(dim)
    v /= np.sqrt(v @ v)
    j = 0
    while j < iters:
        Q[:, j] = v
        w = np.asarray(apply(v), dtype=np.float64)
        if w.shape != (dim,):
            raise DimensionMismatchError(f"operator returned shape {w.shape}, expected ({dim},)")
        alpha[j] = v @ w
        w -= alpha[j] * v
        if j > 0:
            w -= beta[j - 1] * Q[:, j - 1]
        # full reorthogonalization (twice is enough)
        for _ in range(2):
            w -= Q[:, : j + 1] @ (Q[:, : j + 1].T @ w)
        b = np.sqrt(w @ w)
        if j + 1 == iters:
            j += 1
            break
        if b <= 1e-13 * max(1.0, abs(alpha[j])):
            # Krylov space exhausted: restart with a fresh orthogonalized vector
            restarts += 1
            w = gen.standard_normal(dim)
            w -= Q[:, : j + 1] @ (Q[:, : j + 1].T @ w)
            b = np.sqrt(w @ w)
            if b == 0.0:
                j += 1
                break
            beta[j] = 0.0
        else:
            beta[j] = b
        v = w / b
        j += 1
    m = j
    T = np.diag(alpha[:m])
    for i in range(m - 1):
        T[i, i + 1] = T[i + 1, i] = beta[i]
    eig = sym_eig(T)
    ritz_vecs = Q[:, :m] @ eig.eigenvectors
    kk = min(k, m)
    top_vals = eig.eigenvalues[:kk]
    top_vecs = ritz_vecs[:, :kk]
    bot_vals = eig.eigenvalues[::-1][:kk]
    bot_vecs = ritz_vecs[:, ::-1][:, :kk]
    return LanczosResult(top_vals.copy(), top_vecs.copy(), bot_vals.copy(), bot_vecs.copy(), restarts)


def save_matrix_text(path, a) -> None:
    """Write `a` as 'rows cols' header plus one 17-significant-digit row per line."""
    A = as_matrix(a)
    with open(path, "w") as fh:
        fh.write(f"{A.shape[0]} {A.shape[1]}\n")
        for row in A:
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def load_matrix_text(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"bad matrix header {header!r}")
        rows, cols = int(header[0]), int(header[1])
        data = np.loadtxt(fh, dtype=np.float64, ndmin=2)
    if data.shape != (rows, cols):
        raise DimensionMismatchError(f"header {(rows, cols)} but body is {data.shape}")
    return as_matrix(data)
