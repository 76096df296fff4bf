"""Time integrators for dense reference solves and reduced substep ODEs.

Three solver kinds:
  * "rk45": adaptive embedded Dormand-Prince 5(4) (scipy's RK45); setting
    `dt` instead runs the same tableau with a fixed internal step.
  * "rk4": classic fixed-step RK4.
  * "erk2": second-order exponential Runge-Kutta (ETD2RK) for substeps of
    the Sylvester form  Ydot = A Y + Y M + N(Y) + const  with symmetric A.
    Phi-functions are applied through eigendecompositions, so the linear
    part is integrated exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .fields import Substep, SplitLinearField, VectorField


class StiffnessError(RuntimeError):
    """Adaptive solver step underflow: wrong solver choice for the problem."""


class UnsupportedStructureError(TypeError):
    """Exponential solver invoked on a substep without Sylvester structure."""


@dataclass(frozen=True)
class SolverSpec:
    kind: str = "rk45"  # "rk45" | "rk4" | "erk2"
    rtol: float = 1e-12
    atol: float = 1e-12
    dt: float | None = None  # internal step for fixed-step kinds

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")
        if self.kind not in ("rk45", "rk4", "erk2"):
            raise ValueError(f"unknown solver kind {self.kind!r}")
        if self.kind in ("rk4", "erk2") and self.dt is None:
            raise ValueError(f"{self.kind} requires a fixed internal step dt")


@dataclass(frozen=True)
class OdeProblem:
    rhs: Callable[[float, np.ndarray], np.ndarray]
    y0: np.ndarray
    h: float


# ---------------------------------------------------------------------------
# explicit solvers

_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])


def _dp5_fixed(rhs, y0, h, dt):
    """Fixed-step Dormand-Prince 5th-order propagation (for order studies)."""
    nsteps = max(1, int(np.ceil(h / dt - 1e-12)))
    step = h / nsteps
    y = y0.astype(float, copy=True)
    t = 0.0
    for _ in range(nsteps):
        k = []
        for i in range(7):
            yi = y + step * sum(a * ki for a, ki in zip(_DP_A[i], k))
            k.append(rhs(t + _DP_C[i] * step, yi))
        y = y + step * sum(b * ki for b, ki in zip(_DP_B5, k))
        t += step
    return y


def _rk4_fixed(rhs, y0, h, dt):
    nsteps = max(1, int(np.ceil(h / dt - 1e-12)))
    step = h / nsteps
    y = y0.astype(float, copy=True)
    t = 0.0
    for _ in range(nsteps):
        k1 = rhs(t, y)
        k2 = rhs(t + step / 2, y + step / 2 * k1)
        k3 = rhs(t + step / 2, y + step / 2 * k2)
        k4 = rhs(t + step, y + step * k3)
        y = y + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += step
    return y


def _rk45_adaptive(rhs, y0, h, rtol, atol, t_eval=None):
    shape = y0.shape
    flat_rhs = lambda t, y: rhs(t, y.reshape(shape)).ravel()  # noqa: E731
    sol = solve_ivp(
        flat_rhs, (0.0, h), y0.ravel(), method="RK45", rtol=rtol, atol=atol,
        t_eval=t_eval, dense_output=False,
    )
    if not sol.success:
        raise StiffnessError(f"RK45 failed: {sol.message}")
    if t_eval is None:
        return sol.y[:, -1].reshape(shape)
    return [sol.y[:, i].reshape(shape) for i in range(sol.y.shape[1])]


# ---------------------------------------------------------------------------
# exponential RK2 (ETD2RK)

# cache of eigendecompositions keyed by operator identity; only operators of
# at least this size are worth caching across substeps
_EIG_CACHE: dict[int, tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]] = {}
_EIG_CACHE_MIN = 64


def _sym_eig(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scale = max(1.0, float(np.abs(mat).max()))
    if not np.allclose(mat, mat.T, atol=1e-12 * scale):
        raise UnsupportedStructureError("exponential RK2 requires a symmetric stiff operator")
    if mat.shape[0] < _EIG_CACHE_MIN:
        return sla.eigh(mat)
    key = id(mat)
    hit = _EIG_CACHE.get(key)
    if hit is not None and hit[0] is mat:
        return hit[1]
    eig = sla.eigh(mat)
    _EIG_CACHE[key] = (mat, eig)
    return eig


def _phi12(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """phi1(z) = (e^z - 1)/z and phi2(z) = (e^z - 1 - z)/z^2, stably."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-6
    zs = np.where(small, 1.0, z)
    em1 = np.expm1(zs)
    phi1 = np.where(small, 1.0 + z / 2 + z**2 / 6, em1 / zs)
    phi2 = np.where(small, 0.5 + z / 6 + z**2 / 24, (em1 - zs) / zs**2)
    return phi1, phi2


def etd2rk(substep: Substep, y0: np.ndarray, h: float, dt: float) -> np.ndarray:
    """ETD2RK over [0, h] with internal step dt on a structured substep.

    Exact on purely linear problems (up to the eigensolvers); second order
    otherwise. Complex arithmetic is used internally when the small right
    multiplier has complex eigenvalues; the result is real.
    """
    if not substep.structured:
        raise UnsupportedStructureError("substep carries no Sylvester structure")
    w, P = _sym_eig(substep.big)

    if substep.small is not None:
        ssc = max(1.0, float(np.abs(substep.small).max()))
        if np.allclose(substep.small, substep.small.T, atol=1e-12 * ssc):
            d, R = sla.eigh(substep.small)
            Rinv = R.T
        else:
            d, R = sla.eig(substep.small)
            Rinv = sla.inv(R)
    else:
        d = np.zeros(y0.shape[1])
        R = Rinv = np.eye(y0.shape[1])

    nsteps = max(1, int(np.ceil(h / dt - 1e-12)))
    step = h / nsteps
    c = w[:, None] + d[None, :]
    E = np.exp(step * c)
    phi1, phi2 = _phi12(step * c)

    const = substep.const
    nonlin = substep.nonlin

    def to_modal(X):
        return P.T @ X @ R

    def from_modal(Y):
        return np.real(P @ Y @ Rinv)

    def modal_forcing(Y):
        # nonlinear + constant forcing, evaluated in physical coordinates
        if nonlin is None and const is None:
            return None
        X = from_modal(Y)
        f = nonlin(X) if nonlin is not None else 0.0
        if const is not None:
            f = f + const
        return to_modal(f)

    Y = to_modal(y0).astype(complex)
    if nonlin is None:
        # constant (or absent) forcing: ETD2RK collapses to the exact one-stage update
        Nc = to_modal(const) if const is not None else None
        for _ in range(nsteps):
            Y = E * Y
            if Nc is not None:
                Y += step * phi1 * Nc
        return from_modal(Y)

    for _ in range(nsteps):
        N0 = modal_forcing(Y)
        A = E * Y + step * phi1 * N0
        N1 = modal_forcing(A)
        Y = A + step * phi2 * (N1 - N0)
    return from_modal(Y)


# ---------------------------------------------------------------------------
# dispatch

def solve(problem: OdeProblem, spec: SolverSpec) -> np.ndarray:
    """State at t = h for a generic (unstructured) matrix ODE."""
    y0 = np.asarray(problem.y0, dtype=float)
    if spec.kind == "rk45":
        if spec.dt is not None:
            return _dp5_fixed(problem.rhs, y0, problem.h, spec.dt)
        return _rk45_adaptive(problem.rhs, y0, problem.h, spec.rtol, spec.atol)
    if spec.kind == "rk4":
        return _rk4_fixed(problem.rhs, y0, problem.h, spec.dt)
    raise UnsupportedStructureError("erk2 needs a structured substep; use solve_substep")


def solve_substep(substep: Substep, y0: np.ndarray, h: float, spec: SolverSpec) -> np.ndarray:
    """State at t = h for a reduced substep ODE, honoring the solver kind."""
    y0 = np.asarray(y0, dtype=float)
    if spec.kind == "erk2":
        return etd2rk(substep, y0, h, spec.dt)
    return solve(OdeProblem(substep.rhs, y0, h), spec)


def full_substep(field: VectorField) -> Substep:
    """The full-order model itself, as a (possibly structured) substep."""
    if isinstance(field, SplitLinearField):
        return Substep(
            rhs=lambda t, X: field.apply(X),
            big=field.a1,
            small=field.a2.T,
            nonlin=field.nonlinear,
            const=field.source,
        )
    return Substep(rhs=lambda t, X: field.apply(X))


def reference_solve(field: VectorField, A0: np.ndarray, times, spec: SolverSpec) -> list[np.ndarray]:
    """Dense solution snapshots at `times` (first entry may be 0)."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    A0 = np.asarray(A0, dtype=float)
    if spec.kind == "rk45" and spec.dt is None:
        rhs = lambda t, X: field.apply(X)  # noqa: E731
        t_eval = times if times[0] > 0 else times[1:]
        out = _rk45_adaptive(rhs, A0, float(times[-1]), spec.rtol, spec.atol, t_eval=t_eval)
        return ([A0.copy()] if times[0] == 0 else []) + out
    sub = full_substep(field)
    out = []
    state = A0.copy()
    t = 0.0
    for tk in times:
        if tk > t:
            if spec.kind == "erk2":
                state = etd2rk(sub, state, tk - t, spec.dt)
            else:
                state = solve(OdeProblem(sub.rhs, state, tk - t), replace(spec))
            t = tk
        out.append(state.copy())
    return out
