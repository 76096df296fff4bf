"""Dense linear-algebra kernels shared by all integrators.

Orthonormalization, truncated SVDs, basis augmentation and Gaussian
sketching. Everything works on plain float64 ndarrays; low-rank states are
carried around as `FactoredMatrix` (U S V^T with orthonormal side factors).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .rng import as_rng

# Relative threshold below which pivoted-QR diagonal entries are treated as
# rank-deficient.
RANK_TOL = 1e-12


@dataclass(frozen=True)
class SvdResult:
    """Reduced SVD: U diag(sigma) V^T with sigma nonincreasing."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return self.sigma.size

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T


@dataclass(frozen=True)
class FactoredMatrix:
    """Rank-k representation U S V^T with orthonormal U (m x k) and V (n x k)."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return (self.U.shape[0], self.V.shape[0])

    @property
    def rank(self) -> int:
        return self.S.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.U @ self.S @ self.V.T

    def transpose(self) -> "FactoredMatrix":
        return FactoredMatrix(self.V, self.S.T, self.U)

    @property
    def T(self) -> "FactoredMatrix":
        return self.transpose()

    def norm(self) -> float:
        """Frobenius norm, computed on the small core."""
        return float(np.linalg.norm(self.S))

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.S, compute_uv=False)

    def to_svd(self) -> SvdResult:
        u, s, vt = np.linalg.svd(self.S)
        return SvdResult(self.U @ u, s, self.V @ vt.T)

    @staticmethod
    def from_dense(X: np.ndarray, r: int | None = None) -> "FactoredMatrix":
        res = svd(X)
        if r is not None:
            return truncate_rank(res, r)
        return FactoredMatrix(res.U, np.diag(res.sigma), res.V)

    @staticmethod
    def identity_core(U: np.ndarray, S: np.ndarray, V: np.ndarray) -> "FactoredMatrix":
        return FactoredMatrix(U, S, V)


def to_dense(X) -> np.ndarray:
    """Dense view of a FactoredMatrix/SvdResult; passthrough for ndarrays."""
    if isinstance(X, (FactoredMatrix, SvdResult)):
        return X.reconstruct()
    return np.asarray(X, dtype=float)


def orth(M: np.ndarray, rankscale: float | None = None) -> np.ndarray:
    """Orthonormal basis of Range(M) via pivoted QR.

    Columns whose pivoted-QR diagonal falls below RANK_TOL * scale are
    dropped; `rankscale` overrides the default scale |R[0,0]| (useful when M
    is a residual of a larger matrix). An all-zero input yields a basis with
    zero columns.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] == 0:
        return M.copy()
    Q, R, _ = sla.qr(M, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    scale = rankscale if rankscale is not None else (diag[0] if diag.size else 0.0)
    if scale == 0.0:
        return np.empty((M.shape[0], 0))
    k = int(np.sum(diag > RANK_TOL * scale))
    return Q[:, :k]


def augment_basis(Q0: np.ndarray, Mnew: np.ndarray) -> np.ndarray:
    """Orthonormal basis of Range(Q0) + Range(Mnew), keeping Q0 as leading block.

    New directions are orthogonalized against Q0 (twice, for robustness) and
    appended; directions of Mnew already inside Range(Q0) are dropped.
    """
    if Q0.shape[1] == 0:
        return orth(Mnew)
    if Mnew.shape[1] == 0:
        return Q0.copy()
    scale = np.linalg.norm(Mnew, 2)
    P = Mnew - Q0 @ (Q0.T @ Mnew)
    P -= Q0 @ (Q0.T @ P)
    Qnew = orth(P, rankscale=scale)
    if Qnew.shape[1] == 0:
        return Q0.copy()
    return np.column_stack([Q0, Qnew])


def svd(M: np.ndarray) -> SvdResult:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    return SvdResult(U, s, Vt.T)


def _as_svd(X) -> SvdResult:
    if isinstance(X, SvdResult):
        return X
    if isinstance(X, FactoredMatrix):
        return X.to_svd()
    return svd(X)


def truncate_rank(X, r: int) -> FactoredMatrix:
    """Best rank-r approximation (keep leading r singular triples).

    If fewer than r triples are available, the input is returned unchanged
    (no padding). Trailing numerically-zero singular values are dropped.
    """
    if r < 1:
        raise ValueError("target rank must be >= 1")
    res = _as_svd(X)
    k = min(r, res.rank)
    # never keep a numerically-zero factorization wider than 1
    floor = RANK_TOL * (res.sigma[0] if res.rank else 0.0)
    nz = int(np.count_nonzero(res.sigma[:k] > floor))
    k = max(min(k, max(nz, 1)), 1)
    return FactoredMatrix(res.U[:, :k], np.diag(res.sigma[:k]), res.V[:, :k])


def truncate_tol(X, tau: float) -> FactoredMatrix:
    """Smallest-rank truncation with spectral-norm error <= tau.

    Keeps the shortest prefix such that the first discarded singular value is
    <= tau; ties at sigma == tau resolve to the smaller rank.
    """
    if tau < 0:
        raise ValueError("tolerance must be >= 0")
    res = _as_svd(X)
    k = int(np.sum(res.sigma > tau))
    k = max(k, 1)
    k = min(k, res.rank)
    return FactoredMatrix(res.U[:, :k], np.diag(res.sigma[:k]), res.V[:, :k])


@dataclass(frozen=True)
class SketchOperator:
    """Gaussian sketch Omega (n x s) with cached pseudoinverse (s x n)."""

    omega: np.ndarray
    pinv: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.omega.shape


def gaussian_sketch(n: int, s: int, seed) -> SketchOperator:
    """Seeded i.i.d. standard-normal sketch with pseudoinverse from the
    s x s normal equations. A numerically singular Gram matrix (probability
    ~0) triggers a redraw from the same stream, with a warning."""
    if s > n:
        raise ValueError(f"sketch size {s} exceeds dimension {n}")
    rng = as_rng(seed)
    for attempt in range(4):
        omega = rng.standard_normal((n, s))
        gram = omega.T @ omega
        try:
            pinv = sla.solve(gram, omega.T, assume_a="pos")
        except sla.LinAlgError:
            warnings.warn("singular sketch Gram matrix; redrawing", RuntimeWarning)
            continue
        return SketchOperator(omega, pinv)
    raise sla.LinAlgError("could not draw a well-conditioned Gaussian sketch")
