"""Jacobi-preconditioned conjugate gradients for the assembled SPD systems."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = ["SparseSystem", "SolverError", "cg_solve"]


class SolverError(RuntimeError):
    """CG failed to reach the requested residual, or the matrix is unusable."""

    def __init__(self, msg, residual=None, iterations=None):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


@dataclass
class SparseSystem:
    """CSR matrix (row pointers, column indices, values) and right-hand side."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    rhs: np.ndarray

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n, self.n))

    def diagonal(self) -> np.ndarray:
        return self.to_scipy().diagonal()

    @classmethod
    def from_dense(cls, A, b) -> "SparseSystem":
        M = sp.csr_matrix(np.asarray(A, dtype=float))
        M.sort_indices()
        return cls(M.shape[0], M.indptr.astype(np.int64), M.indices.astype(np.int64),
                   M.data.copy(), np.asarray(b, dtype=float).copy())


def cg_solve(system: SparseSystem, tol_rel: float = 1e-10, max_iter: int | None = None,
             x0: np.ndarray | None = None) -> tuple[np.ndarray, int, float]:
    """Solve ``A x = b`` to ``||b - A x|| <= tol_rel ||b||``.

    Returns ``(x, iterations, final_residual_norm)``; raises SolverError when
    ``max_iter`` (default ``20 n``) is exhausted or a diagonal entry is zero.
    """
    if not 0.0 < tol_rel < 1.0:
        raise ValueError("tol_rel must lie in (0, 1)")
    n = system.n
    b = np.asarray(system.rhs, dtype=float)
    if n == 0:
        return np.zeros(0), 0, 0.0
    A = system.to_scipy()
    diag = A.diagonal()
    if np.any(diag == 0):
        raise SolverError(f"zero diagonal entry at row {int(np.nonzero(diag == 0)[0][0])}")
    inv_diag = 1.0 / diag
    max_iter = 20 * n if max_iter is None else max_iter
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    target = tol_rel * bnorm

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float, copy=True)
    r = b - A @ x
    rnorm = float(np.linalg.norm(r))
    it = 0
    while rnorm > target:
        if it >= max_iter:
            raise SolverError(f"CG did not converge in {max_iter} iterations (residual {rnorm:.3e})",
                              residual=rnorm, iterations=it)
        if it == 0:
            z = inv_diag * r
            p = z.copy()
            rz = float(r @ z)
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0:
            raise SolverError("matrix is not positive definite", residual=rnorm, iterations=it)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        it += 1
        # recompute the true residual periodically to avoid drift
        if it % 50 == 0:
            r = b - A @ x
        rnorm = float(np.linalg.norm(r))
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    final = float(np.linalg.norm(b - A @ x))
    if final > target:
        # recurrence residual converged but the true one did not; keep iterating from x
        x2, it2, final = cg_solve(system, tol_rel, max_iter - it, x)
        return x2, it + it2, final
    return x, it, final
