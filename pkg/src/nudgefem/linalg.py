"""Sparse symmetric solves: direct factorization, Woodbury low-rank
corrections, and a PCG fallback.

The system matrices of the time steppers are time-independent, so each is
factored once and reused for every step. Dense low-rank nudging couplings
are handled with the Sherman-Morrison-Woodbury identity to keep the sparse
factor clean.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class FactorizationError(RuntimeError):
    pass


class SingularCoreError(RuntimeError):
    pass


class PcgNonConvergence(RuntimeError):
    def __init__(self, message: str, residuals: list[float]):
        super().__init__(message)
        self.residuals = residuals


class Factorization:
    """Direct sparse LU factorization with a residual-checked solve."""

    def __init__(self, matrix: sp.spmatrix, spd: bool = False):
        matrix = sp.csc_matrix(matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise FactorizationError("matrix must be square")
        self.matrix = matrix.tocsr()
        try:
            if spd:
                # symmetric mode with diagonal pivoting: U pivots are the
                # (permuted) Cholesky pivots, so their signs certify SPD
                self._lu = spla.splu(matrix, permc_spec="MMD_AT_PLUS_A",
                                     diag_pivot_thresh=0.0,
                                     options={"SymmetricMode": True})
            else:
                self._lu = spla.splu(matrix)
        except RuntimeError as exc:
            raise FactorizationError(f"LU factorization failed: {exc}") from exc
        if spd:
            diag_u = self._lu.U.diagonal()
            bad = np.flatnonzero(diag_u <= 0)
            if len(bad):
                raise FactorizationError(
                    f"non-positive pivot at row {int(bad[0])}: matrix is not SPD")

    @property
    def shape(self):
        return self.matrix.shape

    def solve(self, b: np.ndarray) -> np.ndarray:
        x = self._lu.solve(b)
        # one refinement step if the direct solve is not at tolerance
        r = b - self.matrix @ x
        nb = np.linalg.norm(b)
        if nb > 0 and np.linalg.norm(r) > 1e-13 * nb:
            x = x + self._lu.solve(r)
        return x

    def solve_many(self, b: np.ndarray) -> np.ndarray:
        """Solve for each column of a dense block (no refinement)."""
        return self._lu.solve(b)


def factorize(matrix: sp.spmatrix, spd: bool = False) -> Factorization:
    return Factorization(matrix, spd=spd)


@dataclass
class LowRankCorrection:
    """Low-rank term sign * U W U^T added to a sparse base matrix."""

    u_block: np.ndarray            # (n, r)
    core: np.ndarray               # (r, r), symmetric
    sign: int = 1
    core_inverse: np.ndarray | None = None   # optional W^{-1}, if cheap

    @property
    def rank(self) -> int:
        return self.u_block.shape[1]

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.rank == 0:
            return np.zeros_like(x)
        return self.sign * (self.u_block @ (self.core @ (self.u_block.T @ x)))

    @staticmethod
    def empty(n: int) -> "LowRankCorrection":
        return LowRankCorrection(u_block=np.zeros((n, 0)),
                                 core=np.zeros((0, 0)))


class WoodburySolver:
    """Solver for S = Base + sign * U W U^T given a factorization of Base."""

    def __init__(self, base: Factorization, correction: LowRankCorrection,
                 check_residual: bool = True, rtol: float = 1e-10):
        self.base = base
        self.corr = correction
        self.rtol = rtol
        self.check_residual = check_residual
        r = correction.rank
        if r == 0:
            self._core_cho = None
            return
        if correction.core_inverse is not None:
            w_inv = correction.core_inverse
        else:
            w_inv = sla.inv(correction.core)
        self._base_inv_u = base.solve_many(correction.u_block)
        core_sys = correction.sign * w_inv + correction.u_block.T @ self._base_inv_u
        try:
            self._core_cho = sla.lu_factor(core_sys)
        except (sla.LinAlgError, ValueError) as exc:
            raise SingularCoreError(f"singular Woodbury core system: {exc}") from exc

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.base.matrix @ x + self.corr.apply(x)

    def solve(self, b: np.ndarray) -> np.ndarray:
        y = self.base.solve(b)
        if self._core_cho is not None:
            t = self.corr.u_block.T @ y
            s = sla.lu_solve(self._core_cho, t)
            y = y - self._base_inv_u @ s
        if self.check_residual:
            nb = np.linalg.norm(b)
            if nb > 0:
                res = np.linalg.norm(self.apply(y) - b)
                if res > self.rtol * nb:
                    raise FactorizationError(
                        f"Woodbury solve residual {res:.3e} exceeds "
                        f"{self.rtol:.1e} * ||b||")
        return y


def smw_solve(base: Factorization, correction: LowRankCorrection,
              b: np.ndarray) -> np.ndarray:
    """One-shot Sherman-Morrison-Woodbury solve of (Base + sign*U W U^T) x = b."""
    return WoodburySolver(base, correction).solve(b)


def pcg_solve(apply, precond_diag: np.ndarray, b: np.ndarray,
              tol: float = 1e-10, maxit: int = 1000) -> np.ndarray:
    """Preconditioned conjugate gradients with a diagonal preconditioner.

    apply is a callable x -> S x for an SPD operator S. Raises
    PcgNonConvergence (with the residual history) if maxit is exceeded.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = len(b)
    x = np.zeros(n)
    r = b.copy()
    nb = np.linalg.norm(b)
    if nb == 0:
        return x
    inv_diag = 1.0 / precond_diag
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    history = [float(np.linalg.norm(r) / nb)]
    for _ in range(maxit):
        if history[-1] <= tol:
            return x
        ap = apply(p)
        alpha = rz / (p @ ap)
        x = x + alpha * p
        r = r - alpha * ap
        history.append(float(np.linalg.norm(r) / nb))
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    if history[-1] <= tol:
        return x
    raise PcgNonConvergence(
        f"PCG did not reach tol={tol:.1e} in {maxit} iterations "
        f"(final residual {history[-1]:.3e})", history)
