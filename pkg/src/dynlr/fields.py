"""Vector fields F: R^{m x n} -> R^{m x n} and their sketched evaluations.

Every integrator in this library only touches F through tall-skinny
"substeps": the right-sketched B-equation, the left-sketched C-equation and
the doubly-compressed D-equation. `SplitLinearField` implements those
without forming any m x n intermediate for the linear part, which keeps the
substeps Sylvester-shaped and amenable to exponential integration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .linalg import FactoredMatrix, to_dense


@dataclass
class Substep:
    """One reduced ODE  Ydot = rhs(t, Y).

    When the parent field is split-linear the equation has the explicit form
    Ydot = big @ Y + Y @ small + nonlin(Y) + const, recorded in the optional
    fields so that exponential integrators can exploit it.
    """

    rhs: Callable[[float, np.ndarray], np.ndarray]
    big: np.ndarray | None = None
    small: np.ndarray | None = None
    nonlin: Callable[[np.ndarray], np.ndarray] | None = None
    const: np.ndarray | None = None

    @property
    def structured(self) -> bool:
        return self.big is not None


class VectorField:
    """Generic field; sketched evaluations go through the dense F(X).

    Subclasses implement `apply(X)` on dense arrays. `stiff` selects the
    substep solver downstream (exponential vs explicit adaptive RK).
    """

    def __init__(self, m: int, n: int, stiff: bool = False):
        self.m = m
        self.n = n
        self.stiff = stiff

    def apply(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def eval_full(self, X) -> np.ndarray:
        return self.apply(to_dense(X))

    def __call__(self, X) -> np.ndarray:
        return self.eval_full(X)

    # sketched entry points -------------------------------------------------

    def sketch_right(self, B: np.ndarray, right: np.ndarray, cosketch: np.ndarray) -> np.ndarray:
        """F(B @ right) @ cosketch, with right @ cosketch = I."""
        return self.apply(B @ right) @ cosketch

    def sketch_left(self, C: np.ndarray, Q: np.ndarray) -> np.ndarray:
        """F(Q C^T)^T Q."""
        return self.apply(Q @ C.T).T @ Q

    def sketch_both(self, D: np.ndarray, Q: np.ndarray, W: np.ndarray) -> np.ndarray:
        """Q^T F(Q D W^T) W."""
        return Q.T @ self.apply(Q @ D @ W.T) @ W

    def transpose(self) -> "VectorField":
        return TransposedField(self)

    # substep construction ---------------------------------------------------

    def right_substep(self, right: np.ndarray, cosketch: np.ndarray) -> Substep:
        return Substep(rhs=lambda t, B: self.sketch_right(B, right, cosketch))

    def left_substep(self, Q: np.ndarray) -> Substep:
        return Substep(rhs=lambda t, C: self.sketch_left(C, Q))

    def both_substep(self, Q: np.ndarray, W: np.ndarray, sign: float = 1.0) -> Substep:
        return Substep(rhs=lambda t, D: sign * self.sketch_both(D, Q, W))


class TransposedField(VectorField):
    """(F^T)(X) := F(X^T)^T; swaps the roles of range and corange."""

    def __init__(self, base: VectorField):
        super().__init__(base.n, base.m, base.stiff)
        self.base = base

    def apply(self, X: np.ndarray) -> np.ndarray:
        return self.base.apply(X.T).T

    def transpose(self) -> VectorField:
        return self.base


class LambdaField(VectorField):
    """Field defined by a plain callable on dense arrays."""

    def __init__(self, m: int, n: int, fn: Callable[[np.ndarray], np.ndarray], stiff: bool = False):
        super().__init__(m, n, stiff)
        self.fn = fn

    def apply(self, X: np.ndarray) -> np.ndarray:
        return self.fn(X)


class SplitLinearField(VectorField):
    """F(X) = A1 X + X A2^T + G(X), with G(X) = nonlinear(X) + source.

    A1 (m x m) and A2 (n x n) are dense arrays; symmetric ones get a cached
    eigendecomposition for exponential substep solvers. `nonlinear` acts
    elementwise-style on dense reconstructions (None if absent); `source` is
    a constant matrix (None if absent).
    """

    def __init__(
        self,
        a1: np.ndarray,
        a2: np.ndarray,
        nonlinear: Callable[[np.ndarray], np.ndarray] | None = None,
        source: np.ndarray | None = None,
        stiff: bool = False,
    ):
        a1 = np.asarray(a1, dtype=float)
        a2 = np.asarray(a2, dtype=float)
        super().__init__(a1.shape[0], a2.shape[0], stiff)
        self.a1 = a1
        self.a2 = a2
        self.nonlinear = nonlinear
        self.source = source
        self._eig_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def apply(self, X: np.ndarray) -> np.ndarray:
        out = self.a1 @ X + X @ self.a2.T
        if self.nonlinear is not None:
            out += self.nonlinear(X)
        if self.source is not None:
            out += self.source
        return out

    def sym_eig(self, which: str) -> tuple[np.ndarray, np.ndarray] | None:
        """Cached (eigenvalues, eigenvectors) of a1/a2 if symmetric, else None."""
        mat = self.a1 if which == "a1" else self.a2
        key = id(mat)
        if key not in self._eig_cache:
            if np.allclose(mat, mat.T, atol=1e-13 * max(1.0, np.abs(mat).max())):
                self._eig_cache[key] = sla.eigh(mat)
            else:
                self._eig_cache[key] = None
        return self._eig_cache[key]

    def transpose(self) -> "SplitLinearField":
        nl = None
        if self.nonlinear is not None:
            base_nl = self.nonlinear
            nl = lambda X: base_nl(X.T).T  # noqa: E731
        src = None if self.source is None else self.source.T
        out = SplitLinearField(self.a2, self.a1, nl, src, self.stiff)
        # share eigendecompositions between F and F^T
        out._eig_cache = self._eig_cache
        return out

    # structured sketched evaluations ---------------------------------------

    def sketch_right(self, B, right, cosketch):
        out = self.a1 @ B + B @ (right @ (self.a2.T @ cosketch))
        if self.nonlinear is not None:
            out += self.nonlinear(B @ right) @ cosketch
        if self.source is not None:
            out += self.source @ cosketch
        return out

    def sketch_left(self, C, Q):
        out = self.a2 @ C + C @ (Q.T @ (self.a1.T @ Q))
        if self.nonlinear is not None:
            out += self.nonlinear(Q @ C.T).T @ Q
        if self.source is not None:
            out += self.source.T @ Q
        return out

    def sketch_both(self, D, Q, W):
        out = (Q.T @ (self.a1 @ Q)) @ D + D @ (W.T @ (self.a2.T @ W))
        if self.nonlinear is not None:
            out += Q.T @ self.nonlinear(Q @ D @ W.T) @ W
        if self.source is not None:
            out += Q.T @ self.source @ W
        return out

    # structured substeps ----------------------------------------------------

    def right_substep(self, right, cosketch) -> Substep:
        small = right @ (self.a2.T @ cosketch)
        nonlin = None
        if self.nonlinear is not None:
            nl = self.nonlinear
            nonlin = lambda B: nl(B @ right) @ cosketch  # noqa: E731
        const = None if self.source is None else self.source @ cosketch
        rhs = lambda t, B: self.sketch_right(B, right, cosketch)  # noqa: E731
        return Substep(rhs=rhs, big=self.a1, small=small, nonlin=nonlin, const=const)

    def left_substep(self, Q) -> Substep:
        small = Q.T @ (self.a1.T @ Q)
        nonlin = None
        if self.nonlinear is not None:
            nl = self.nonlinear
            nonlin = lambda C: nl(Q @ C.T).T @ Q  # noqa: E731
        const = None if self.source is None else self.source.T @ Q
        rhs = lambda t, C: self.sketch_left(C, Q)  # noqa: E731
        return Substep(rhs=rhs, big=self.a2, small=small, nonlin=nonlin, const=const)

    def both_substep(self, Q, W, sign: float = 1.0) -> Substep:
        big = sign * (Q.T @ (self.a1 @ Q))
        small = sign * (W.T @ (self.a2.T @ W))
        nonlin = None
        if self.nonlinear is not None:
            nl = self.nonlinear
            nonlin = lambda D: sign * (Q.T @ nl(Q @ D @ W.T) @ W)  # noqa: E731
        const = None if self.source is None else sign * (Q.T @ self.source @ W)
        rhs = lambda t, D: sign * self.sketch_both(D, Q, W)  # noqa: E731
        return Substep(rhs=rhs, big=big, small=small, nonlin=nonlin, const=const)


def initial_sketch(Y0, omega: np.ndarray) -> np.ndarray:
    """Y0 @ omega without reconstructing Y0 when it is factored."""
    if isinstance(Y0, FactoredMatrix):
        return Y0.U @ (Y0.S @ (Y0.V.T @ omega))
    return np.asarray(Y0) @ omega
