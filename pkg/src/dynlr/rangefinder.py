"""Range estimation: static (HMT) rangefinder, dynamical rangefinder with
dynamical power iterations, and the tolerance-driven adaptive variant.

The dynamical rangefinder estimates the range of the unknown flow A(h) by
solving a single tall-skinny ODE, sketched through a Gaussian Omega with its
pseudoinverse; see `dynamical_rangefinder` for the exact update sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield

import numpy as np

from . import linalg
from .fields import VectorField, initial_sketch
from .linalg import FactoredMatrix, gaussian_sketch, orth
from .odes import SolverSpec, solve_substep
from .rng import as_rng


class RangefinderNonconvergence(RuntimeError):
    """Adaptive rangefinder exceeded its basis-size cap."""


@dataclass(frozen=True)
class RangefinderConfig:
    rank: int
    oversampling: int = 0
    power_iterations: int = 0
    solver: SolverSpec = dfield(default_factory=SolverSpec)

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("target rank must be >= 1")
        if self.oversampling < 0 or self.power_iterations < 0:
            raise ValueError("oversampling and power iterations must be >= 0")

    @property
    def sketch_size(self) -> int:
        return self.rank + self.oversampling


@dataclass(frozen=True)
class AdaptiveConfig:
    tolerance: float
    failure_prob: float = 1e-4
    max_basis: int | None = None  # default: min(m, n) // 2
    solver: SolverSpec = dfield(default_factory=SolverSpec)

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if not 0 < self.failure_prob < 1:
            raise ValueError("failure probability must be in (0, 1)")

    @property
    def block_size(self) -> int:
        """K = -ceil(log(beta) / log(10))."""
        return max(1, -math.ceil(math.log10(self.failure_prob)))

    @property
    def estimate_tol(self) -> float:
        """eps = sqrt(pi/2) * tau / 10."""
        return math.sqrt(math.pi / 2.0) * self.tolerance / 10.0


def static_rangefinder(A: np.ndarray, cfg: RangefinderConfig, seed) -> np.ndarray:
    """HMT rangefinder Q = orth((A A^T)^q A Omega), reorthogonalizing after
    each application of A or A^T."""
    rng = as_rng(seed)
    n = A.shape[1]
    omega = rng.standard_normal((n, cfg.sketch_size))
    Q = orth(A @ omega)
    for _ in range(cfg.power_iterations):
        W = orth(A.T @ Q)
        Q = orth(A @ W)
    return Q


def dynamical_rangefinder(field: VectorField, Y0, h: float, cfg: RangefinderConfig, seed) -> np.ndarray:
    """Estimate Range(A(h)) by solving sketched substeps of the flow.

    B-step: Bdot = F(B Omega^+) Omega, B(0) = Y0 Omega, then Q = orth(B(h)).
    Each power iteration refreshes the corange (C-step against Q) and redoes
    a B-step against the refreshed corange basis W.
    """
    rng = as_rng(seed)
    n = field.n
    sk = gaussian_sketch(n, cfg.sketch_size, rng)
    B0 = initial_sketch(Y0, sk.omega)
    B = solve_substep(field.right_substep(sk.pinv, sk.omega), B0, h, cfg.solver)
    Q = orth(B)
    Y0t = Y0.T if isinstance(Y0, FactoredMatrix) else np.asarray(Y0).T
    for _ in range(cfg.power_iterations):
        C0 = initial_sketch(Y0t, Q)
        C = solve_substep(field.left_substep(Q), C0, h, cfg.solver)
        W = orth(C)
        B0 = initial_sketch(Y0, W)
        B = solve_substep(field.right_substep(W.T, W), B0, h, cfg.solver)
        Q = orth(B)
    return Q


def adaptive_dynamical_rangefinder(field: VectorField, Y0, h: float, acfg: AdaptiveConfig, seed) -> np.ndarray:
    """Grow the estimated range in blocks of K columns until the Gaussian
    sampling error estimate drops below eps = sqrt(pi/2) tau / 10, which
    certifies a spectral projection error <= tau with probability >= 1-beta."""
    rng = as_rng(seed)
    K = acfg.block_size
    eps = acfg.estimate_tol
    cap = acfg.max_basis if acfg.max_basis is not None else min(field.m, field.n) // 2

    base = RangefinderConfig(rank=K, oversampling=0, power_iterations=0, solver=acfg.solver)
    Q = dynamical_rangefinder(field, Y0, h, base, rng)
    while True:
        sk = gaussian_sketch(field.n, K, rng)
        B0 = initial_sketch(Y0, sk.omega)
        B = solve_substep(field.right_substep(sk.pinv, sk.omega), B0, h, acfg.solver)
        resid = B - Q @ (Q.T @ B)
        E = float(np.max(np.linalg.norm(resid, axis=0)))
        if E <= eps:
            return Q
        Q = linalg.augment_basis(Q, B)
        if Q.shape[1] > cap:
            raise RangefinderNonconvergence(
                f"adaptive rangefinder basis grew past {cap} columns (estimate {E:.3e} > {eps:.3e})"
            )


def gaussian_norm_estimate(apply_m, n: int, K: int, seed, alpha: float = 10.0) -> float:
    """Randomized upper estimate of the spectral norm of an operator on R^n.

    Returns alpha * sqrt(2/pi) * max_i ||M w_i||_2 over K standard Gaussian
    probes; this exceeds ||M||_2 with probability at least 1 - alpha^-K.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if alpha <= 1:
        raise ValueError("alpha must be > 1")
    rng = as_rng(seed)
    best = 0.0
    for _ in range(K):
        w = rng.standard_normal(n)
        best = max(best, float(np.linalg.norm(apply_m(w))))
    return alpha * math.sqrt(2.0 / math.pi) * best
