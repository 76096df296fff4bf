"""Randomized dynamical low-rank time steppers.

One-step maps: DRSVD (range estimation + projected C-step + truncated SVD),
DGN (parallel range/corange estimation + three reduced ODEs + stabilized
Nystrom assembly), and their rank-adaptive counterparts ADRSVD / ADGN.
`integrate` repeats a step map over [0, T] with fresh sketches per step.
"""

from __future__ import annotations

import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field as dfield
from typing import Callable

import numpy as np
import scipy.linalg as sla

from . import linalg
from .fields import VectorField, initial_sketch
from .linalg import FactoredMatrix, augment_basis, svd, truncate_rank, truncate_tol
from .odes import SolverSpec, solve_substep
from .rangefinder import (
    AdaptiveConfig,
    RangefinderConfig,
    adaptive_dynamical_rangefinder,
    dynamical_rangefinder,
)
from .rng import derive_rng


@dataclass(frozen=True)
class StepperConfig:
    rank: int
    oversampling: int = 0        # p
    corange_oversampling: int = 0  # extra corange oversampling (DGN only)
    power_iterations: int = 0    # q
    solver: SolverSpec = dfield(default_factory=SolverSpec)
    augment: bool = True         # augment estimated bases with the initial ones

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("target rank must be >= 1")
        if min(self.oversampling, self.corange_oversampling, self.power_iterations) < 0:
            raise ValueError("oversampling and power-iteration counts must be >= 0")

    def rf(self, extra: int = 0) -> RangefinderConfig:
        return RangefinderConfig(
            rank=self.rank,
            oversampling=self.oversampling + extra,
            power_iterations=self.power_iterations,
            solver=self.solver,
        )


# Optional wall-clock accounting per algorithm phase (rangefinder /
# substeps / assembly), activated by the bench harness.
_ACTIVE_PHASES: dict[str, float] | None = None


@contextmanager
def phase_recording(store: dict[str, float]):
    """Accumulate phase wall-clock times into `store` for the duration."""
    global _ACTIVE_PHASES
    previous = _ACTIVE_PHASES
    _ACTIVE_PHASES = store
    try:
        yield store
    finally:
        _ACTIVE_PHASES = previous


@contextmanager
def _phase(name: str):
    t0 = time.perf_counter()
    try:
        yield
    finally:
        if _ACTIVE_PHASES is not None:
            _ACTIVE_PHASES[name] = _ACTIVE_PHASES.get(name, 0.0) + time.perf_counter() - t0


def _sub_rng(seed):
    """Generator from an int, a (possibly nested) tuple of ints, or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, tuple):
        flat: list[int] = []

        def _walk(s):
            if isinstance(s, tuple):
                for item in s:
                    _walk(item)
            else:
                flat.append(int(s))

        _walk(seed)
        return derive_rng(flat[0], *flat[1:])
    return derive_rng(int(seed))


def drsvd_step(field: VectorField, Y0: FactoredMatrix, h: float, cfg: StepperConfig, seed) -> FactoredMatrix:
    """One step of the dynamical randomized SVD."""
    with _phase("rangefinder"):
        Qh = dynamical_rangefinder(field, Y0, h, cfg.rf(), _sub_rng(seed))
        Q = augment_basis(Y0.U, Qh) if cfg.augment else Qh
    with _phase("substeps"):
        C0 = initial_sketch(Y0.T, Q)
        C = solve_substep(field.left_substep(Q), C0, h, cfg.solver)
    with _phase("assembly"):
        res = svd(C.T)  # C(h)^T = Utilde Sigma V^T
        full = linalg.SvdResult(Q @ res.U, res.sigma, res.V)
        return truncate_rank(full, cfg.rank)


def _nystrom_assemble(B: np.ndarray, C: np.ndarray, D_trunc: linalg.SvdResult) -> FactoredMatrix:
    """Stable assembly of B * T(D)^+ * C^T from the truncated SVD of D."""
    U1, R1 = sla.qr(B @ D_trunc.V, mode="economic")
    V1, R2 = sla.qr(C @ D_trunc.U, mode="economic")
    S1 = R1 @ np.diag(1.0 / D_trunc.sigma) @ R2.T
    return FactoredMatrix(U1, S1, V1)


def _deflate_sigma(res: linalg.SvdResult, r: int) -> linalg.SvdResult:
    """Leading-r part of an SVD, shrinking r past numerically zero values."""
    k = min(r, res.rank)
    keep = int(np.sum(res.sigma[:k] > 1e-14 * res.sigma[0])) if res.sigma[0] > 0 else 1
    keep = max(keep, 1)
    if keep < k:
        warnings.warn(f"Nystrom core is rank-deficient; deflating rank {k} -> {keep}", RuntimeWarning)
    return linalg.SvdResult(res.U[:, :keep], res.sigma[:keep], res.V[:, :keep])


def dgn_step(field: VectorField, Y0: FactoredMatrix, h: float, cfg: StepperConfig, seed) -> FactoredMatrix:
    """One step of the dynamical generalized Nystrom."""
    ft = field.transpose()
    with _phase("rangefinder"):
        Qh = dynamical_rangefinder(field, Y0, h, cfg.rf(), _sub_rng((seed, 0)))
        Wh = dynamical_rangefinder(ft, Y0.T, h, cfg.rf(cfg.corange_oversampling), _sub_rng((seed, 1)))
        Q = augment_basis(Y0.U, Qh) if cfg.augment else Qh
        W = augment_basis(Y0.V, Wh) if cfg.augment else Wh

    with _phase("substeps"):
        B = solve_substep(field.right_substep(W.T, W), initial_sketch(Y0, W), h, cfg.solver)
        C = solve_substep(field.left_substep(Q), initial_sketch(Y0.T, Q), h, cfg.solver)
        D = solve_substep(field.both_substep(Q, W), Q.T @ initial_sketch(Y0, W), h, cfg.solver)

    with _phase("assembly"):
        core = _deflate_sigma(svd(D), cfg.rank)
        return _nystrom_assemble(B, C, core)


def adrsvd_step(field: VectorField, Y0: FactoredMatrix, h: float, acfg: AdaptiveConfig, seed) -> FactoredMatrix:
    """One step of the adaptive dynamical randomized SVD."""
    with _phase("rangefinder"):
        Qh = adaptive_dynamical_rangefinder(field, Y0, h, acfg, _sub_rng(seed))
        Q = augment_basis(Y0.U, Qh)
    with _phase("substeps"):
        C0 = initial_sketch(Y0.T, Q)
        C = solve_substep(field.left_substep(Q), C0, h, acfg.solver)
    with _phase("assembly"):
        res = svd(C.T)
        full = linalg.SvdResult(Q @ res.U, res.sigma, res.V)
        return truncate_tol(full, acfg.tolerance)


def adgn_step(field: VectorField, Y0: FactoredMatrix, h: float, acfg: AdaptiveConfig, seed) -> FactoredMatrix:
    """One step of the adaptive dynamical generalized Nystrom."""
    ft = field.transpose()
    with _phase("rangefinder"):
        Qh = adaptive_dynamical_rangefinder(field, Y0, h, acfg, _sub_rng((seed, 0)))
        Wh = adaptive_dynamical_rangefinder(ft, Y0.T, h, acfg, _sub_rng((seed, 1)))
        Q = augment_basis(Y0.U, Qh)
        W = augment_basis(Y0.V, Wh)

    with _phase("substeps"):
        B = solve_substep(field.right_substep(W.T, W), initial_sketch(Y0, W), h, acfg.solver)
        C = solve_substep(field.left_substep(Q), initial_sketch(Y0.T, Q), h, acfg.solver)
        D = solve_substep(field.both_substep(Q, W), Q.T @ initial_sketch(Y0, W), h, acfg.solver)

    with _phase("assembly"):
        trunc = truncate_tol(svd(D), acfg.tolerance)
        core = linalg.SvdResult(trunc.U, np.diag(trunc.S).copy(), trunc.V)
        return _nystrom_assemble(B, C, core)


# ---------------------------------------------------------------------------
# trajectory integration

@dataclass
class Trajectory:
    times: list[float]
    states: list[FactoredMatrix]
    observables: dict[str, list]
    master_seed: int
    short_final_step: float | None = None
    failure: str | None = None

    @property
    def ranks(self) -> list[int]:
        return [s.rank for s in self.states]


STEP_MAPS: dict[str, Callable] = {
    "drsvd": drsvd_step,
    "dgn": dgn_step,
    "adrsvd": adrsvd_step,
    "adgn": adgn_step,
}


def integrate(
    field: VectorField,
    Y0: FactoredMatrix,
    T: float,
    h: float,
    method: str | Callable,
    cfg,
    master_seed: int = 0,
    observables: dict[str, Callable] | None = None,
) -> Trajectory:
    """Repeat a one-step map over [0, T] with per-step derived sketch seeds.

    A non-divisible T/h ends with a short final step, recorded in the
    trajectory metadata. Observables are callables (t, FactoredMatrix) ->
    value, evaluated at every accepted state including t=0. A step-level
    failure aborts and returns the partial trajectory with `failure` set.
    """
    step_map = STEP_MAPS[method] if isinstance(method, str) else method
    observables = observables or {}
    n_full = int(np.floor(T / h + 1e-9))
    rem = T - n_full * h
    if rem < 1e-12 * max(T, 1.0):
        rem = 0.0
    traj = Trajectory(times=[0.0], states=[Y0], observables={k: [] for k in observables},
                      master_seed=master_seed, short_final_step=rem if rem > 0 else None)
    for name, fn in observables.items():
        traj.observables[name].append(fn(0.0, Y0))

    state = Y0
    t = 0.0
    steps = [h] * n_full + ([rem] if rem > 0 else [])
    for k, hk in enumerate(steps):
        try:
            state = step_map(field, state, hk, cfg, (master_seed, k))
        except Exception as exc:  # noqa: BLE001 - partial trajectory is the contract
            traj.failure = f"step {k} at t={t:.6g}: {exc}"
            return traj
        t += hk
        traj.times.append(t)
        traj.states.append(state)
        for name, fn in observables.items():
            traj.observables[name].append(fn(t, state))
    return traj
