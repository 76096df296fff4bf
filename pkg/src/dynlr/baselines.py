"""Baseline dynamical low-rank integrators used for comparison.

Projector-splitting (Lie-Trotter and Strang), fixed-rank BUG, augmented
(rank-adaptive) BUG, and a projected explicit Euler, plus the orthogonal
tangent-space projection they are built on. All one-step maps share the
(field, Y0, h, cfg, seed) signature of the randomized steppers so they can
be driven by `steppers.integrate`; the seed is unused (the methods are
deterministic).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .fields import VectorField
from .linalg import FactoredMatrix, augment_basis, svd, truncate_rank, truncate_tol
from .odes import solve_substep
from .rangefinder import AdaptiveConfig
from .steppers import StepperConfig


def tangent_project(Y: FactoredMatrix, Z: np.ndarray) -> np.ndarray:
    """Orthogonal projection of Z onto the tangent space of the rank-r
    manifold at Y: U U^T Z + Z V V^T - U U^T Z V V^T."""
    U, V = Y.U, Y.V
    UtZ = U.T @ Z
    ZV = Z @ V
    return U @ UtZ + (ZV - U @ (UtZ @ V)) @ V.T


def projected_euler_step(field: VectorField, Y0: FactoredMatrix, h: float,
                         cfg: StepperConfig, seed=None) -> FactoredMatrix:
    """Y1 = T_r(Y0 + h * P_Y0 F(Y0)); the first-order projected RK method."""
    Z = field.eval_full(Y0)
    dense = Y0.reconstruct() + h * tangent_project(Y0, Z)
    return truncate_rank(svd(dense), cfg.rank)


def _k_step(field, U, S, V, h, solver):
    K1 = solve_substep(field.right_substep(V.T, V), U @ S, h, solver)
    return K1


def _s_step(field, U, S, V, h, solver, sign):
    return solve_substep(field.both_substep(U, V, sign=sign), S, h, solver)


def _l_step(field, U, S, V, h, solver):
    L1 = solve_substep(field.left_substep(U), V @ S.T, h, solver)
    return L1


def ksl_step(field: VectorField, Y0: FactoredMatrix, h: float,
             cfg: StepperConfig, seed=None, order: int = 1) -> FactoredMatrix:
    """Projector-splitting integrator (KSL); order 1 (Lie-Trotter) or the
    symmetrized order-2 variant K(h/2) S(h/2) L(h) S(h/2) K(h/2)."""
    U, S, V = Y0.U, Y0.S, Y0.V
    solver = cfg.solver
    if order == 1:
        U, S = sla.qr(_k_step(field, U, S, V, h, solver), mode="economic")
        S = _s_step(field, U, S, V, h, solver, sign=-1.0)
        L1 = _l_step(field, U, S, V, h, solver)
        V, St = sla.qr(L1, mode="economic")
        return FactoredMatrix(U, St.T, V)
    if order == 2:
        U, S = sla.qr(_k_step(field, U, S, V, h / 2, solver), mode="economic")
        S = _s_step(field, U, S, V, h / 2, solver, sign=-1.0)
        L1 = _l_step(field, U, S, V, h, solver)
        V, St = sla.qr(L1, mode="economic")
        S = St.T
        S = _s_step(field, U, S, V, h / 2, solver, sign=-1.0)
        U, S = sla.qr(_k_step(field, U, S, V, h / 2, solver), mode="economic")
        return FactoredMatrix(U, S, V)
    raise ValueError("order must be 1 or 2")


def ksl2_step(field, Y0, h, cfg, seed=None):
    return ksl_step(field, Y0, h, cfg, seed, order=2)


def bug_step(field: VectorField, Y0: FactoredMatrix, h: float,
             cfg: StepperConfig, seed=None) -> FactoredMatrix:
    """Fixed-rank basis-update & Galerkin step (parallel K/L then Galerkin S)."""
    U0, S0, V0 = Y0.U, Y0.S, Y0.V
    solver = cfg.solver
    K1 = _k_step(field, U0, S0, V0, h, solver)
    L1 = _l_step(field, U0, S0, V0, h, solver)
    U1, _ = sla.qr(K1, mode="economic")
    V1, _ = sla.qr(L1, mode="economic")
    M = U1.T @ U0
    N = V1.T @ V0
    S1 = _s_step(field, U1, M @ S0 @ N.T, V1, h, solver, sign=1.0)
    return FactoredMatrix(U1, S1, V1)


def augmented_bug_step(field: VectorField, Y0: FactoredMatrix, h: float,
                       cfg, seed=None) -> FactoredMatrix:
    """Rank-adaptive BUG: augmented bases [U0, K1], [V0, L1], Galerkin step,
    then truncation back to cfg.rank (StepperConfig) or to cfg.tolerance
    (AdaptiveConfig)."""
    U0, S0, V0 = Y0.U, Y0.S, Y0.V
    solver = cfg.solver
    K1 = _k_step(field, U0, S0, V0, h, solver)
    L1 = _l_step(field, U0, S0, V0, h, solver)
    U1 = augment_basis(U0, K1)
    V1 = augment_basis(V0, L1)
    S_init = (U1.T @ U0) @ S0 @ (V0.T @ V1)
    S1 = _s_step(field, U1, S_init, V1, h, solver, sign=1.0)
    res = svd(S1)
    full = type(res)(U1 @ res.U, res.sigma, V1 @ res.V)
    if isinstance(cfg, AdaptiveConfig):
        return truncate_tol(full, cfg.tolerance)
    return truncate_rank(full, cfg.rank)


BASELINE_MAPS = {
    "ksl": ksl_step,
    "ksl2": ksl2_step,
    "bug": bug_step,
    "augmented_bug": augmented_bug_step,
    "projected_euler": projected_euler_step,
}
