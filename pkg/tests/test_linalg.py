from __future__ import annotations

import math

import numpy as np
import pytest

from porowave import linalg

RNG_SEED = 20260816


# --------------------------------------------------------------------------
# Independent eigenvalue oracle: bisection on the characteristic polynomial,
# with the eigenvalue count below x obtained from the inertia of S - x*I
# (number of negative pivots in an LDL^T elimination). No QR anywhere.
# --------------------------------------------------------------------------

def _eigs_below(S: np.ndarray, x: float) -> int:
    n = S.shape[0]
    W = S - x * np.eye(n)
    neg = 0
    for k in range(n):
        piv = W[k, k]
        if piv == 0.0:
            piv = 1e-300
        if piv < 0.0:
            neg += 1
        if k + 1 < n:
            col = W[k + 1 :, k].copy()
            W[k + 1 :, k + 1 :] -= np.outer(col, col) / piv
    return neg


def _bisection_eigenvalues(S: np.ndarray, tol: float = 5e-13) -> np.ndarray:
    n = S.shape[0]
    radius = float(np.abs(S).sum(axis=1).max()) + 1.0
    out = np.empty(n)
    for i in range(n):
        lo, hi = -radius, radius
        while hi - lo > tol * max(1.0, radius):
            mid = 0.5 * (lo + hi)
            if _eigs_below(S, mid) >= i + 1:
                hi = mid
            else:
                lo = mid
        out[i] = 0.5 * (lo + hi)
    return out


def _random_symmetric(rng: np.random.Generator, n: int) -> np.ndarray:
    A = rng.normal(size=(n, n))
    return (A + A.T) / 2.0


# --------------------------------------------------------------------------
# sym_eigen
# --------------------------------------------------------------------------

def test_sym_eigen_frozen_tridiagonal():
    S = np.array([[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]])
    w, V = linalg.sym_eigen(S)
    s2 = math.sqrt(2.0)
    np.testing.assert_allclose(w, [2.0 - s2, 2.0, 2.0 + s2], rtol=0, atol=1e-12)
    # outer columns have a unique largest-magnitude component (index 1), so
    # their sign is pinned; the middle column's two extremes tie analytically
    # and the winner depends on last-bit rounding, so check it up to sign
    np.testing.assert_allclose(V[:, 0], [-0.5, s2 / 2.0, -0.5], rtol=0, atol=1e-12)
    np.testing.assert_allclose(V[:, 2], [0.5, s2 / 2.0, 0.5], rtol=0, atol=1e-12)
    mid = V[:, 1].copy()
    if mid[0] < 0:
        mid = -mid
    np.testing.assert_allclose(mid, [s2 / 2.0, 0.0, -s2 / 2.0], rtol=0, atol=1e-12)
    idx = int(np.argmax(np.abs(V[:, 1])))
    assert V[idx, 1] > 0.0


def test_sym_eigen_identity_and_diagonal():
    w, V = linalg.sym_eigen(np.eye(4))
    np.testing.assert_allclose(w, np.ones(4), atol=1e-15)
    np.testing.assert_allclose(V, np.eye(4), atol=1e-15)

    D = np.diag([3.0, -1.0, 2.0])
    w, V = linalg.sym_eigen(D)
    np.testing.assert_allclose(w, [-1.0, 2.0, 3.0], atol=1e-15)
    # columns are signed unit vectors picking out the sorted diagonal
    np.testing.assert_allclose(np.abs(V), np.eye(3)[:, [1, 2, 0]], atol=1e-15)


def test_sym_eigen_thousand_random_vs_bisection():
    rng = np.random.default_rng(RNG_SEED)
    for trial in range(1000):
        n = 2 + trial % 3
        S = _random_symmetric(rng, n)
        w, V = linalg.sym_eigen(S)
        ref = _bisection_eigenvalues(S)
        scale = max(1.0, float(np.abs(S).sum(axis=1).max()))
        np.testing.assert_allclose(w, ref, rtol=0, atol=1e-10 * scale)
        # ascending order
        assert np.all(np.diff(w) >= -1e-14 * scale)
        # orthonormal columns
        np.testing.assert_allclose(V.T @ V, np.eye(n), rtol=0, atol=1e-12)
        # residual bound
        ninf = float(np.abs(S).sum(axis=1).max())
        res = np.abs(S @ V - V * w).max()
        assert res <= 1e-12 * max(ninf, 1e-30)
        # sign convention: largest-magnitude component positive, tie -> first
        for j in range(n):
            idx = int(np.argmax(np.abs(V[:, j])))
            assert V[idx, j] > 0.0


def test_sym_eigen_matches_numpy_on_larger_matrices():
    rng = np.random.default_rng(RNG_SEED + 1)
    for _ in range(50):
        S = _random_symmetric(rng, 8)
        w, V = linalg.sym_eigen(S)
        ref = np.linalg.eigvalsh(S)
        np.testing.assert_allclose(w, ref, rtol=0, atol=1e-10)
        res = np.abs(S @ V - V * w).max()
        assert res <= 1e-12 * float(np.abs(S).sum(axis=1).max())


def test_sym_eigen_bit_determinism():
    rng = np.random.default_rng(RNG_SEED + 2)
    S = _random_symmetric(rng, 6)
    w1, V1 = linalg.sym_eigen(S)
    w2, V2 = linalg.sym_eigen(S.copy())
    assert np.array_equal(w1, w2)
    assert np.array_equal(V1, V2)


def test_sym_eigen_near_degenerate_cluster():
    # two eigenvalues 1e-13 apart must still give an orthonormal basis
    Q, _ = np.linalg.qr(np.random.default_rng(RNG_SEED + 3).normal(size=(4, 4)))
    w_true = np.array([1.0, 2.0, 2.0 + 1e-13, 5.0])
    S = (Q * w_true) @ Q.T
    S = (S + S.T) / 2
    w, V = linalg.sym_eigen(S)
    np.testing.assert_allclose(V.T @ V, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(np.sort(w), np.sort(w_true), rtol=0, atol=1e-10)


# --------------------------------------------------------------------------
# solve_lu
# --------------------------------------------------------------------------

def test_solve_lu_real_roundtrip():
    rng = np.random.default_rng(RNG_SEED + 4)
    for n in (1, 2, 5, 8):
        A = rng.normal(size=(n, n))
        x = rng.normal(size=n)
        b = A @ x
        got = linalg.solve_lu(A, b)
        ninf = float(np.abs(A).sum(axis=1).max())
        res = float(np.abs(A @ got - b).max())
        assert res < 1e-10 * (ninf * float(np.abs(got).max()) + float(np.abs(b).max()))
        np.testing.assert_allclose(got, x, rtol=1e-9, atol=1e-12)


def test_solve_lu_complex_and_multiple_rhs():
    rng = np.random.default_rng(RNG_SEED + 5)
    A = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    X = rng.normal(size=(6, 3)) + 1j * rng.normal(size=(6, 3))
    B = A @ X
    got = linalg.solve_lu(A, B)
    np.testing.assert_allclose(got, X, rtol=1e-9, atol=1e-12)


def test_solve_lu_needs_pivoting():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    b = np.array([2.0, 3.0])
    np.testing.assert_allclose(linalg.solve_lu(A, b), [3.0, 2.0], atol=1e-14)


def test_solve_lu_singular_raises_with_row():
    A = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 5.0]])
    with pytest.raises(linalg.SingularMatrixError) as exc:
        linalg.solve_lu(A, np.ones(3))
    assert isinstance(exc.value.row, int)
    assert 0 <= exc.value.row < 3


# --------------------------------------------------------------------------
# cond_2norm
# --------------------------------------------------------------------------

def test_cond_2norm_diagonal():
    c = linalg.cond_2norm(np.diag([1.0, 1e-6]))
    assert abs(c - 1e6) < 1e-2


def test_cond_2norm_orthogonal_is_one():
    th = 0.3
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    assert abs(linalg.cond_2norm(R) - 1.0) < 1e-10


def test_cond_2norm_singular_is_inf():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert linalg.cond_2norm(A) == math.inf


def test_cond_2norm_matches_numpy():
    rng = np.random.default_rng(RNG_SEED + 6)
    for _ in range(25):
        A = rng.normal(size=(6, 6))
        ref = np.linalg.cond(A, 2)
        got = linalg.cond_2norm(A)
        assert abs(got - ref) < 1e-6 * ref


# --------------------------------------------------------------------------
# complex_eigen
# --------------------------------------------------------------------------

def _sorted_eig_match(A: np.ndarray, w: np.ndarray, tol: float):
    ref = np.linalg.eigvals(A)
    ref = ref[np.lexsort((ref.imag, ref.real))]
    np.testing.assert_allclose(w, ref, rtol=0, atol=tol)


def test_complex_eigen_frozen_rotation():
    A = np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=complex)
    w, V = linalg.complex_eigen(A)
    np.testing.assert_allclose(w, [-1j, 1j], atol=1e-14)
    s2 = math.sqrt(2.0)
    np.testing.assert_allclose(V[:, 0], [1 / s2, -1j / s2], atol=1e-14)
    np.testing.assert_allclose(V[:, 1], [1 / s2, 1j / s2], atol=1e-14)


def test_complex_eigen_random_residuals():
    rng = np.random.default_rng(RNG_SEED + 7)
    for n in (2, 3, 4, 6, 8):
        for _ in range(20):
            A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            w, V = linalg.complex_eigen(A)
            a2 = float(np.linalg.norm(A, 2))
            _sorted_eig_match(A, w, 1e-10 * a2)
            for j in range(n):
                assert abs(np.linalg.norm(V[:, j]) - 1.0) < 1e-12
                res = float(np.linalg.norm(A @ V[:, j] - w[j] * V[:, j]))
                assert res <= 1e-10 * a2


def test_complex_eigen_real_input_conjugate_pairs():
    rng = np.random.default_rng(RNG_SEED + 8)
    A = rng.normal(size=(5, 5)).astype(complex)
    w, V = linalg.complex_eigen(A)
    a2 = float(np.linalg.norm(A, 2))
    _sorted_eig_match(A, w, 1e-10 * a2)


def test_complex_eigen_hermitian_gives_real_spectrum():
    rng = np.random.default_rng(RNG_SEED + 9)
    B = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    A = (B + B.conj().T) / 2
    w, _ = linalg.complex_eigen(A)
    assert np.abs(w.imag).max() < 1e-10 * np.linalg.norm(A, 2)


def test_complex_eigen_jordan_block_degenerate():
    A = np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex)
    w, V = linalg.complex_eigen(A)
    np.testing.assert_allclose(w, [1.0, 1.0], atol=1e-12)
    for j in range(2):
        res = float(np.linalg.norm(A @ V[:, j] - w[j] * V[:, j]))
        assert res <= 1e-10 * np.linalg.norm(A, 2)


def test_complex_eigen_bit_determinism():
    rng = np.random.default_rng(RNG_SEED + 10)
    A = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    w1, V1 = linalg.complex_eigen(A)
    w2, V2 = linalg.complex_eigen(A.copy())
    assert np.array_equal(w1, w2)
    assert np.array_equal(V1, V2)


def test_complex_eigen_badly_scaled_needs_balancing():
    # entries spanning ~12 orders of magnitude; balancing keeps this accurate
    A = np.array(
        [
            [1.0e-6, 2.0e3, 0.0],
            [3.0e-9, 4.0, 5.0e6],
            [0.0, 6.0e-6, 7.0],
        ],
        dtype=complex,
    )
    w, V = linalg.complex_eigen(A)
    ref = np.linalg.eigvals(A)
    ref = ref[np.lexsort((ref.imag, ref.real))]
    np.testing.assert_allclose(w, ref, rtol=1e-9, atol=1e-9)
