"""Dense linear-algebra kernels with pinned, deterministic conventions.

Everything in this package that needs an eigendecomposition or a linear
solve goes through the four routines here rather than a BLAS-backed call,
because the caching and cross-run reproducibility story depends on
bit-identical outputs for identical inputs. The matrices involved are tiny
(8x8 and below), so plain numpy loops are plenty fast.

Conventions:

* ``sym_eigen`` returns eigenvalues in ascending order with orthonormal
  eigenvector columns; each column is signed so its largest-magnitude
  component is positive (first such index on ties).
* ``complex_eigen`` sorts eigenvalues by (real, imag) ascending and fixes
  each unit eigenvector's phase so its largest-magnitude component is real
  and positive.
"""

from __future__ import annotations

import math

import numpy as np

_DEFLATE_EPS = 1e-15


class LinAlgError(Exception):
    """Base class for kernel failures."""


class SingularMatrixError(LinAlgError):
    """Raised when elimination hits a pivot too small to trust.

    The offending row index (in the original matrix ordering) is stored on
    the ``row`` attribute.
    """

    def __init__(self, row: int, detail: str = ""):
        self.row = int(row)
        msg = f"matrix is singular to working precision (pivot row {row})"
        if detail:
            msg += ": " + detail
        super().__init__(msg)


class IterationLimitError(LinAlgError):
    """Eigenvalue iteration failed to deflate within its sweep budget."""


def _givens(a: float, b: float) -> tuple[float, float]:
    # rotation [[c, s], [-s, c]] @ [a, b] = [r, 0]
    if b == 0.0:
        return 1.0, 0.0
    r = math.hypot(a, b)
    return a / r, b / r


def _householder_tridiagonalize(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = S.shape[0]
    T = S.copy()
    Q = np.eye(n)
    for k in range(n - 2):
        x = T[k + 1 :, k].copy()
        nx = math.sqrt(float(x @ x))
        if nx == 0.0:
            continue
        alpha = -nx if x[0] >= 0.0 else nx
        v = x.copy()
        v[0] -= alpha
        nv = math.sqrt(float(v @ v))
        if nv < 1e-300:
            continue
        v /= nv
        # T <- P T P with P = I - 2 v v^T acting on the trailing block
        w = T[k + 1 :, :] .T @ v
        T[k + 1 :, :] -= 2.0 * np.outer(v, w)
        w = T[:, k + 1 :] @ v
        T[:, k + 1 :] -= 2.0 * np.outer(w, v)
        w = Q[:, k + 1 :] @ v
        Q[:, k + 1 :] -= 2.0 * np.outer(w, v)
    return T, Q


def sym_eigen(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a real symmetric matrix.

    Householder tridiagonalization followed by explicitly shifted QR sweeps
    using the Wilkinson shift (the eigenvalue of the trailing 2x2 block
    closest to the corner entry). A subdiagonal entry h[k+1,k] is deflated
    to zero once |h[k+1,k]| <= 1e-15 * (|h[k,k]| + |h[k+1,k+1]|).

    Returns ``(w, V)`` with ``S @ V == V @ diag(w)``, ``w`` ascending and
    ``V`` orthonormal. Raises IterationLimitError after 30*n sweeps.
    """
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    if n == 0:
        return np.empty(0), np.empty((0, 0))
    if n == 1:
        return S[0].copy(), np.ones((1, 1))

    T, V = _householder_tridiagonalize(S)
    max_sweeps = 30 * n
    sweeps = 0
    hi = n - 1
    while hi > 0:
        # deflate any negligible subdiagonals in the active window
        for k in range(hi):
            if abs(T[k + 1, k]) <= _DEFLATE_EPS * (abs(T[k, k]) + abs(T[k + 1, k + 1])):
                T[k + 1, k] = 0.0
                T[k, k + 1] = 0.0
        if T[hi, hi - 1] == 0.0:
            hi -= 1
            continue
        lo = hi - 1
        while lo > 0 and T[lo, lo - 1] != 0.0:
            lo -= 1

        if sweeps >= max_sweeps:
            raise IterationLimitError(
                f"symmetric QR failed to converge in {max_sweeps} sweeps"
            )
        sweeps += 1

        # Wilkinson shift from the trailing 2x2 of the active block
        a, b, c = T[hi - 1, hi - 1], T[hi - 1, hi], T[hi, hi]
        mid = 0.5 * (a + c)
        disc = math.sqrt(max(0.25 * (a - c) ** 2 + b * b, 0.0))
        mu1, mu2 = mid + disc, mid - disc
        mu = mu1 if abs(mu1 - c) <= abs(mu2 - c) else mu2

        # explicit shifted QR step on the active block: T-mu*I = QR, T <- RQ+mu*I
        m = hi - lo + 1
        W = T[lo : hi + 1, lo : hi + 1] - mu * np.eye(m)
        rots = []
        for k in range(m - 1):
            cg, sg = _givens(W[k, k], W[k + 1, k])
            rows = W[k : k + 2, :].copy()
            W[k, :] = cg * rows[0] + sg * rows[1]
            W[k + 1, :] = -sg * rows[0] + cg * rows[1]
            rots.append((cg, sg))
        for k, (cg, sg) in enumerate(rots):
            cols = W[:, k : k + 2].copy()
            W[:, k] = cg * cols[:, 0] + sg * cols[:, 1]
            W[:, k + 1] = -sg * cols[:, 0] + cg * cols[:, 1]
            vcols = V[:, lo + k : lo + k + 2].copy()
            V[:, lo + k] = cg * vcols[:, 0] + sg * vcols[:, 1]
            V[:, lo + k + 1] = -sg * vcols[:, 0] + cg * vcols[:, 1]
        W += mu * np.eye(m)
        # re-symmetrize the block to kill the rounding skew QR introduces
        W = 0.5 * (W + W.T)
        T[lo : hi + 1, lo : hi + 1] = W

    w = np.diag(T).copy()
    order = np.argsort(w, kind="stable")
    w = w[order]
    V = V[:, order]
    for j in range(n):
        idx = int(np.argmax(np.abs(V[:, j])))
        if V[idx, j] < 0.0:
            V[:, j] = -V[:, j]
    return w, V


def solve_lu(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A @ x = b by LU with partial pivoting (real or complex).

    ``b`` may be a vector or a matrix of stacked right-hand sides. A pivot
    smaller than 1e-14 times the infinity norm of A raises
    SingularMatrixError carrying the offending row index.
    """
    A = np.asarray(A)
    b = np.asarray(b)
    dtype = np.result_type(A.dtype, b.dtype, np.float64)
    n = A.shape[0]
    if A.shape[1] != n:
        raise LinAlgError(f"matrix must be square, got {A.shape}")
    U = A.astype(dtype, copy=True)
    vector_rhs = b.ndim == 1
    X = b.reshape(n, -1).astype(dtype, copy=True)
    ninf = float(np.abs(A).sum(axis=1).max()) if n else 0.0
    tol = 1e-14 * ninf
    perm = np.arange(n)

    for k in range(n):
        p = k + int(np.argmax(np.abs(U[k:, k])))
        if abs(U[p, k]) <= tol:
            raise SingularMatrixError(int(perm[p]))
        if p != k:
            U[[k, p], :] = U[[p, k], :]
            X[[k, p], :] = X[[p, k], :]
            perm[[k, p]] = perm[[p, k]]
        if k + 1 < n:
            factors = U[k + 1 :, k] / U[k, k]
            U[k + 1 :, k:] -= np.outer(factors, U[k, k:])
            X[k + 1 :, :] -= np.outer(factors, X[k, :])

    for k in range(n - 1, -1, -1):
        X[k, :] -= U[k, k + 1 :] @ X[k + 1 :, :]
        X[k, :] /= U[k, k]

    return X[:, 0] if vector_rhs else X


def cond_2norm(A: np.ndarray) -> float:
    """2-norm condition number sigma_max/sigma_min via sym_eigen on A^T A.

    Returns +inf when the smallest eigenvalue of A^T A is nonpositive to
    within rounding tolerance (twice machine epsilon relative to the
    largest eigenvalue). Exactly singular matrices land at or below one
    epsilon of rounding noise, while condition numbers up to several 1e7
    still sit measurably above it, so this floor separates the two; past
    roughly 5e7 the squared route cannot tell them apart at all.
    """
    A = np.asarray(A, dtype=float)
    G = A.T @ A
    G = 0.5 * (G + G.T)
    w, _ = sym_eigen(G)
    floor = 2.0 * np.finfo(float).eps * max(w[-1], 0.0)
    if w[0] <= floor:
        return math.inf
    return math.sqrt(w[-1] / w[0])


# --------------------------------------------------------------------------
# general complex eigensolver: balance -> Hessenberg -> shifted QR ->
# triangular back-substitution for the right eigenvectors
# --------------------------------------------------------------------------

def _balance(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Parlett-Reinsch diagonal balancing with radix-2 scale factors
    n = A.shape[0]
    B = A.copy()
    scale = np.ones(n)
    radix = 2.0
    for _ in range(100):
        converged = True
        for i in range(n):
            c = float(np.abs(B[:, i]).sum() - abs(B[i, i]))
            r = float(np.abs(B[i, :]).sum() - abs(B[i, i]))
            if c == 0.0 or r == 0.0:
                continue
            f = 1.0
            s = c + r
            while c < r / radix:
                c *= radix
                r /= radix
                f *= radix
            while c >= r * radix:
                c /= radix
                r *= radix
                f /= radix
            if (c + r) < 0.95 * s and f != 1.0:
                converged = False
                scale[i] *= f
                B[i, :] /= f
                B[:, i] *= f
        if converged:
            break
    return B, scale


def _hessenberg(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = A.shape[0]
    H = A.copy()
    Q = np.eye(n, dtype=complex)
    for k in range(n - 2):
        x = H[k + 1 :, k].copy()
        nx = float(np.linalg.norm(x))
        if nx == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0.0 else 1.0
        v = x.copy()
        v[0] += phase * nx
        nv = float(np.linalg.norm(v))
        if nv < 1e-300:
            continue
        v /= nv
        H[k + 1 :, :] -= 2.0 * np.outer(v, v.conj() @ H[k + 1 :, :])
        H[:, k + 1 :] -= 2.0 * np.outer(H[:, k + 1 :] @ v, v.conj())
        Q[:, k + 1 :] -= 2.0 * np.outer(Q[:, k + 1 :] @ v, v.conj())
    return H, Q


def _givens_c(a: complex, b: complex) -> tuple[float, complex]:
    # unitary [[c, s], [-conj(s), c]] with real c, sending [a, b] -> [r, 0]
    if b == 0.0:
        return 1.0, 0.0 + 0.0j
    if a == 0.0:
        return 0.0, b.conjugate() / abs(b)
    r = math.hypot(abs(a), abs(b))
    c = abs(a) / r
    s = (a / abs(a)) * b.conjugate() / r
    return c, s


def _wilkinson_c(H: np.ndarray, hi: int) -> complex:
    a, b = H[hi - 1, hi - 1], H[hi - 1, hi]
    c, d = H[hi, hi - 1], H[hi, hi]
    tr = a + d
    det = a * d - b * c
    disc = np.sqrt(0.25 * tr * tr - det + 0j)
    mu1 = 0.5 * tr + disc
    mu2 = 0.5 * tr - disc
    return mu1 if abs(mu1 - d) <= abs(mu2 - d) else mu2


def complex_eigen(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and right eigenvectors of a general complex matrix.

    Pipeline: diagonal balancing, Householder reduction to upper Hessenberg
    form, explicitly shifted QR with Wilkinson shifts (plus a deterministic
    exceptional shift every tenth sweep on a stalled block), then
    back-substitution on the triangular factor for the eigenvectors.

    Returns ``(w, V)`` with eigenvalues sorted ascending by (real, imag),
    V's columns unit 2-norm right eigenvectors in matching order, phase
    fixed so each column's largest-magnitude component is real positive.
    """
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    if n == 0:
        return np.empty(0, complex), np.empty((0, 0), complex)
    if n == 1:
        return A[0].astype(complex), np.ones((1, 1), complex)

    B, scale = _balance(A)
    H, Q = _hessenberg(B)

    hi = n - 1
    sweeps_on_block = 0
    total = 0
    limit = 40 * n
    while hi > 0:
        for k in range(hi):
            if abs(H[k + 1, k]) <= _DEFLATE_EPS * (abs(H[k, k]) + abs(H[k + 1, k + 1])):
                H[k + 1, k] = 0.0
        if H[hi, hi - 1] == 0.0:
            hi -= 1
            sweeps_on_block = 0
            continue
        lo = hi - 1
        while lo > 0 and H[lo, lo - 1] != 0.0:
            lo -= 1
        if total >= limit:
            raise IterationLimitError(
                f"complex QR failed to converge in {limit} sweeps"
            )
        total += 1
        sweeps_on_block += 1
        if sweeps_on_block % 10 == 0:
            mu = H[hi, hi] + 0.75 * abs(H[hi, hi - 1])
        else:
            mu = _wilkinson_c(H, hi)

        # explicit shifted QR step restricted to the active block, with the
        # row/column updates spanning the full matrix to keep H similar to A
        rots = []
        H[lo, lo] -= mu
        for k in range(lo, hi):
            H[k + 1, k + 1] -= mu
            c, s = _givens_c(H[k, k], H[k + 1, k])
            rows = H[k : k + 2, lo:].copy()
            H[k, lo:] = c * rows[0] + s * rows[1]
            H[k + 1, lo:] = -np.conj(s) * rows[0] + c * rows[1]
            rots.append((c, s))
        for k, (c, s) in enumerate(rots, start=lo):
            cols = H[: min(k + 3, hi + 1), k : k + 2].copy()
            H[: cols.shape[0], k] = c * cols[:, 0] + np.conj(s) * cols[:, 1]
            H[: cols.shape[0], k + 1] = -s * cols[:, 0] + c * cols[:, 1]
            qcols = Q[:, k : k + 2].copy()
            Q[:, k] = c * qcols[:, 0] + np.conj(s) * qcols[:, 1]
            Q[:, k + 1] = -s * qcols[:, 0] + c * qcols[:, 1]
        for k in range(lo, hi + 1):
            H[k, k] += mu

    # H is now upper triangular (the Schur factor); eigenvectors by
    # back-substitution, columns transformed back through Q and the balance
    w = np.diag(H).copy()
    tnorm = float(np.abs(H).max())
    V = np.zeros((n, n), dtype=complex)
    for j in range(n):
        lam = w[j]
        y = np.zeros(n, dtype=complex)
        y[j] = 1.0
        for i in range(j - 1, -1, -1):
            denom = H[i, i] - lam
            if abs(denom) < 1e-300 + _DEFLATE_EPS * tnorm:
                denom = _DEFLATE_EPS * max(tnorm, 1.0)
            y[i] = -(H[i, i + 1 : j + 1] @ y[i + 1 : j + 1]) / denom
        v = Q @ y
        v = v * scale  # undo balancing (rows of A were scaled by 1/scale)
        V[:, j] = v

    order = np.lexsort((w.imag, w.real))
    w = w[order]
    V = V[:, order]
    for j in range(n):
        nv = float(np.linalg.norm(V[:, j]))
        if nv == 0.0:
            V[j % n, j] = 1.0
            nv = 1.0
        V[:, j] /= nv
        idx = int(np.argmax(np.abs(V[:, j])))
        piv = V[idx, j]
        if piv != 0.0:
            V[:, j] *= piv.conjugate() / abs(piv)
            V[idx, j] = abs(V[idx, j])  # kill the rounding-level imaginary dust
    return w, V
