"""Dense complex kernels: A = alpha*S + H, Hermitian Cholesky, LU inversion.

Written out by hand on purpose; matrices are small (n <= 16 at desk scale) and
the pivot checks are part of the program's contract.
"""
from __future__ import annotations

import numpy as np


class NotHPDError(ArithmeticError):
    """Base for the two not-HPD verdicts."""


class NotHermitianError(NotHPDError):
    def __init__(self, defect: float, bound: float, index: tuple[int, int]):
        self.defect = defect
        self.bound = bound
        self.index = index
        super().__init__(
            f"not Hermitian: ||M - M^H||_F = {defect:.3e} > {bound:.3e} (worst entry {index})"
        )


class NotPositiveDefiniteError(NotHPDError):
    def __init__(self, index: int, pivot: float, threshold: float):
        self.index = index
        self.pivot = pivot
        self.threshold = threshold
        super().__init__(f"not positive definite: pivot {index} = {pivot:.6e} <= {threshold:.3e}")


class SingularMatrixError(ArithmeticError):
    def __init__(self, column: int, pivot: float, iteration: int | None = None):
        self.column = column
        self.pivot = pivot
        self.iteration = iteration
        where = f" at iteration {iteration}" if iteration is not None else ""
        super().__init__(f"singular matrix{where}: pivot |{pivot:.3e}| in column {column}")


def as_matrix(m) -> np.ndarray:
    a = np.array(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def frob(a: np.ndarray) -> float:
    return float(np.sqrt(np.sum(a.real**2 + a.imag**2)))


def build_A(alpha: complex, S: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Entry-wise ``alpha*S + H``."""
    if S.shape != H.shape:
        raise ValueError(f"dimension mismatch: S {S.shape} vs H {H.shape}")
    return alpha * S + H


def cholesky_hpd(M: np.ndarray, tol_h: float = 1e-12, scale: float | None = None) -> np.ndarray:
    """Return lower-triangular L with L @ L^H == M, or raise a not-HPD verdict.

    M must be Hermitian within ``tol_h`` relative to its Frobenius norm, and
    every pivot must exceed ``tol_h`` times the largest diagonal magnitude.
    ``scale`` replaces both reference magnitudes; callers checking a family of
    matrices pass the family's norm so a vanishing member is not judged against
    itself.
    """
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {M.shape}")

    skew = M - M.conj().T
    defect = frob(skew)
    bound = tol_h * (frob(M) if scale is None else scale)
    if defect > bound:
        worst = np.unravel_index(int(np.argmax(np.abs(skew))), skew.shape)
        raise NotHermitianError(defect, bound, (int(worst[0]), int(worst[1])))

    ref = float(np.max(np.abs(np.diag(M)))) if scale is None else scale
    threshold = tol_h * ref
    L = np.zeros_like(M)
    for j in range(n):
        d = M[j, j].real - sum(abs(L[j, k]) ** 2 for k in range(j))
        if not d > threshold:
            raise NotPositiveDefiniteError(j, float(d), threshold)
        ljj = np.sqrt(d)
        L[j, j] = ljj
        for i in range(j + 1, n):
            s = M[i, j] - sum(L[i, k] * L[j, k].conjugate() for k in range(j))
            L[i, j] = s / ljj
    return L


def lu_factor(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """LU with partial pivoting; returns (LU packed, permutation).

    Raises SingularMatrixError when the best available pivot is below
    ``n * eps * max|A|``.
    """
    LU = np.array(A, dtype=complex)
    n = LU.shape[0]
    perm = np.arange(n)
    tiny = n * np.finfo(float).eps * max(float(np.max(np.abs(LU))), np.finfo(float).tiny)
    for k in range(n):
        p = k + int(np.argmax(np.abs(LU[k:, k])))
        if abs(LU[p, k]) <= tiny:
            raise SingularMatrixError(k, float(abs(LU[p, k])))
        if p != k:
            LU[[k, p]] = LU[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        LU[k + 1 :, k] /= LU[k, k]
        LU[k + 1 :, k + 1 :] -= np.outer(LU[k + 1 :, k], LU[k, k + 1 :])
    return LU, perm


def lu_solve(LU: np.ndarray, perm: np.ndarray, B: np.ndarray) -> np.ndarray:
    n = LU.shape[0]
    X = np.array(B, dtype=complex)[perm]
    for i in range(1, n):  # forward, unit lower
        X[i] -= LU[i, :i] @ X[:i]
    for i in range(n - 1, -1, -1):  # backward
        X[i] = (X[i] - LU[i, i + 1 :] @ X[i + 1 :]) / LU[i, i]
    return X


def inverse(A: np.ndarray) -> np.ndarray:
    LU, perm = lu_factor(A)
    return lu_solve(LU, perm, np.eye(A.shape[0], dtype=complex))
