"""Concrete matrix-ODE benchmark problems.

Each factory returns a `ProblemSpec` bundling the vector field, initial
data, horizon, reference/substep solver choices and observables. The toy
problem additionally exposes its closed-form solution, used as an oracle
throughout the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dfield
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .fields import SplitLinearField, VectorField
from .linalg import FactoredMatrix, orth
from .odes import SolverSpec, reference_solve
from .rng import as_rng


@dataclass(frozen=True)
class GridSpec1D:
    start: float
    end: float
    n: int
    boundary: str = "dirichlet"  # "dirichlet" | "periodic"

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("need at least 3 grid points")
        if self.boundary not in ("dirichlet", "periodic"):
            raise ValueError(f"unknown boundary kind {self.boundary!r}")

    @property
    def spacing(self) -> float:
        length = self.end - self.start
        return length / self.n if self.boundary == "periodic" else length / (self.n - 1)

    @property
    def points(self) -> np.ndarray:
        if self.boundary == "periodic":
            return self.start + self.spacing * np.arange(self.n)
        return np.linspace(self.start, self.end, self.n)


@dataclass
class ProblemSpec:
    name: str
    field: VectorField
    initial: np.ndarray
    horizon: float
    reference: SolverSpec
    substep: SolverSpec
    observables: dict[str, Callable] = dfield(default_factory=dict)
    closed_form: Callable[[float], np.ndarray] | None = None
    extras: dict = dfield(default_factory=dict)

    def initial_factored(self, r: int) -> FactoredMatrix:
        return FactoredMatrix.from_dense(self.initial, r)

    def reference_states(self, times) -> list[np.ndarray]:
        return reference_solve(self.field, self.initial, times, self.reference)


def _second_difference(n: int, boundary: str) -> np.ndarray:
    """Unscaled tridiagonal (1, -2, 1) stencil, wrapped if periodic."""
    L = -2.0 * np.eye(n) + np.eye(n, k=1) + np.eye(n, k=-1)
    if boundary == "periodic":
        L[0, -1] = 1.0
        L[-1, 0] = 1.0
    return L


def _centered_diff4_periodic(n: int, dx: float) -> np.ndarray:
    """Fourth-order centered first-derivative matrix, periodic wrap."""
    D = np.zeros((n, n))
    idx = np.arange(n)
    D[idx, (idx + 1) % n] = 8.0
    D[idx, (idx - 1) % n] = -8.0
    D[idx, (idx + 2) % n] = -1.0
    D[idx, (idx - 2) % n] = 1.0
    return D / (12.0 * dx)


def _centered_diff2_periodic(n: int, dx: float) -> np.ndarray:
    D = np.zeros((n, n))
    idx = np.arange(n)
    D[idx, (idx + 1) % n] = 1.0
    D[idx, (idx - 1) % n] = -1.0
    return D / (2.0 * dx)


def _rank_observables() -> dict[str, Callable]:
    return {"rank": lambda t, Y: Y.rank if isinstance(Y, FactoredMatrix) else int(np.linalg.matrix_rank(Y))}


# ---------------------------------------------------------------------------
# toy problem with closed form

def make_toy(n: int = 100, seed: int = 5678, exact_rank: int | None = None) -> ProblemSpec:
    """Xdot = W1 X + X + X W2^T with random antisymmetric W1, W2 and
    X(0) = diag(2^-i); closed form X(t) = e^{t W1} e^t X(0) e^{t W2^T}.

    `exact_rank` zeroes the initial diagonal past that index, confining the
    flow to a fixed invariant subspace of that rank (exactness tests)."""
    rng = as_rng(seed)
    G1 = rng.standard_normal((n, n))
    G2 = rng.standard_normal((n, n))
    W1 = (G1 - G1.T) / 2.0
    W2 = (G2 - G2.T) / 2.0
    d = 2.0 ** -np.arange(1, n + 1)
    if exact_rank is not None:
        d[exact_rank:] = 0.0
        # decouple the rotations so span(e_1..e_R) is invariant: the flow
        # then stays in a fixed rank-R subspace, as the exactness lemmas need
        for W in (W1, W2):
            W[:exact_rank, exact_rank:] = 0.0
            W[exact_rank:, :exact_rank] = 0.0
    D = np.diag(d)
    eye = 0.5 * np.eye(n)
    fld = SplitLinearField(W1 + eye, W2 + eye, stiff=False)

    def closed_form(t: float) -> np.ndarray:
        return sla.expm(t * W1) @ (np.exp(t) * D) @ sla.expm(t * W2).T

    spec = SolverSpec(kind="rk45", rtol=1e-12, atol=1e-12)
    return ProblemSpec(
        name="toy", field=fld, initial=D, horizon=0.1,
        reference=spec, substep=spec,
        observables=_rank_observables(), closed_form=closed_form,
        extras={"W1": W1, "W2": W2, "diag": d},
    )


# ---------------------------------------------------------------------------
# stiff Lyapunov / heat equation with constant source

def _dirichlet_modes(n: int, k: int) -> np.ndarray:
    """First k (unit-norm) eigenvectors of the Dirichlet stencil diag(1,-2,1):
    sin(pi j (i+1) / (n+1))."""
    i = np.arange(n)[:, None]
    j = np.arange(1, k + 1)[None, :]
    modes = np.sin(np.pi * j * (i + 1) / (n + 1))
    return modes / np.linalg.norm(modes, axis=0)


def make_lyapunov(n: int = 256, alpha: float = 1.0, seed: int = 42,
                  roughness: float = 3e-6, start_time: float = 1e-4) -> ProblemSpec:
    """Adot = L A + A L + alpha C/||C||_F, Dirichlet Laplacian L.

    The initial value is a seeded rank-10 matrix with singular values 4^-k
    whose directions are random mixtures of the 10 lowest Laplacian
    eigenmodes; the source C is a seeded rank-5 matrix with singular values
    2^-k built from the 5 lowest eigenmodes, plus a small seeded rough
    component that sets the effective numerical rank of the long-time
    solution. Smooth (spectrally confined) directions are essential: with
    fully random directions the solution is far from numerically low-rank
    and rank-5 approximation is meaningless. `initial` holds the solution
    already propagated to `start_time`, where it is close to the rank-5
    manifold; the closed-form modal propagator is exposed for reference
    solves (`closed_form(t)` from the initial value, `extras["propagate"]`
    from any state)."""
    rng = as_rng(seed)
    L = (n - 1) ** 2 * _second_difference(n, "dirichlet")
    modes = _dirichlet_modes(n, 10)
    U0 = orth(modes @ rng.standard_normal((10, 10)))
    V0 = orth(modes @ rng.standard_normal((10, 10)))
    A0 = U0 @ np.diag(4.0 ** -np.arange(1, 11)) @ V0.T
    X = orth(modes[:, :5] @ rng.standard_normal((5, 5)))
    Y = orth(modes[:, :5] @ rng.standard_normal((5, 5)))
    sv = np.diag(2.0 ** -np.arange(1, 6))
    C = X @ sv @ Y.T
    C = C + roughness * (rng.standard_normal((n, 5)) / np.sqrt(n)) @ sv \
        @ (rng.standard_normal((5, n)) / np.sqrt(n))
    source = alpha * C / np.linalg.norm(C)
    fld = SplitLinearField(L, L, source=source, stiff=True)

    lam, P = np.linalg.eigh(L)
    csum = lam[:, None] + lam[None, :]
    Sm = P.T @ source @ P

    def propagate(A: np.ndarray, t: float) -> np.ndarray:
        """Exact modal solution e^{Lt} A e^{Lt} + int_0^t e^{Ls} S e^{Ls} ds."""
        em = np.exp(csum * t)
        return P @ (em * (P.T @ A @ P) + (em - 1.0) / csum * Sm) @ P.T

    A_start = propagate(A0, start_time)
    spec = SolverSpec(kind="erk2", dt=1e-4)
    return ProblemSpec(
        name="lyapunov", field=fld, initial=A_start, horizon=0.1,
        reference=spec, substep=spec,
        observables=_rank_observables(),
        closed_form=lambda t: propagate(A_start, t),
        extras={"laplacian": L, "source": source, "alpha": alpha,
                "raw_initial": A0, "propagate": propagate},
    )


# ---------------------------------------------------------------------------
# Allen-Cahn reaction-diffusion

def allen_cahn_initial(grid: GridSpec1D) -> np.ndarray:
    """f0(x,y) = 2 e^{-tan^2 x} sin x sin y / (1 + e^|csc(-x/2)| + e^|csc(-y/2)|),
    with the singular nodes evaluated as their (vanishing) limits."""
    x = grid.points
    with np.errstate(divide="ignore", over="ignore"):
        tan2 = np.tan(x) ** 2
        num_x = 2.0 * np.exp(-tan2) * np.sin(x)
        csc = np.abs(1.0 / np.sin(-x / 2.0))
        expcsc = np.exp(csc)
    num_x = np.nan_to_num(num_x, nan=0.0, posinf=0.0, neginf=0.0)
    F = np.outer(num_x, np.sin(x))
    denom = 1.0 + expcsc[:, None] + expcsc[None, :]
    with np.errstate(invalid="ignore"):
        out = F / denom
    return np.nan_to_num(out, nan=0.0, posinf=0.0, neginf=0.0)


def make_allen_cahn(n: int = 128, eps: float = 0.01) -> ProblemSpec:
    """Xdot = A X + X A + X - X^{*3} on [0, 2pi]^2 periodic, A = eps * Laplacian."""
    grid = GridSpec1D(0.0, 2.0 * np.pi, n, "periodic")
    A = eps * _second_difference(n, "periodic") / grid.spacing**2
    # X*X*X instead of X**3: numpy's pow is an order of magnitude slower here
    fld = SplitLinearField(A, A, nonlinear=lambda X: X - X * X * X, stiff=True)
    X0 = allen_cahn_initial(grid)
    spec = SolverSpec(kind="erk2", dt=0.005)
    return ProblemSpec(
        name="allen_cahn", field=fld, initial=X0, horizon=10.0,
        reference=spec, substep=spec,
        observables=_rank_observables(),
        extras={"grid": grid, "eps": eps},
    )


# ---------------------------------------------------------------------------
# stochastic Burgers (columns = samples)

def make_burgers(n: int = 256, s: int = 64, nu: float = 0.01, sigma_x: float = 0.001,
                 d: int = 4, seed: int = 7) -> ProblemSpec:
    """Adot = nu L A - A * (D A) (Hadamard product), columns are random
    initial-condition samples from a squared-exponential kernel expansion."""
    rng = as_rng(seed)
    grid = GridSpec1D(0.0, 1.0, n, "dirichlet")
    x = grid.points
    L = nu * (n - 1) ** 2 * _second_difference(n, "dirichlet")
    D = (n - 1) / 2.0 * (np.eye(n, k=1) - np.eye(n, k=-1))
    K = np.exp(-((x[:, None] - x[None, :]) ** 2) / 2.0)
    lam, psi = sla.eigh(K)
    lam, psi = lam[::-1][:d], psi[:, ::-1][:, :d]
    lam = np.clip(lam, 0.0, None)
    base = 0.5 * np.sin(2 * np.pi * x) * (np.exp(np.cos(2 * np.pi * x)) - 1.5)
    xi = rng.standard_normal((d, s))
    A0 = base[:, None] + sigma_x * (psi * np.sqrt(lam)) @ xi
    c = (n - 1) / 2.0

    def advect(X):
        # D @ X via the stencil directly; the dense matmul dominates otherwise
        DX = np.empty_like(X)
        DX[1:-1] = c * (X[2:] - X[:-2])
        DX[0] = c * X[1]
        DX[-1] = -c * X[-2]
        return DX

    fld = SplitLinearField(L, np.zeros((s, s)),
                           nonlinear=lambda X: -X * advect(X), stiff=False)
    spec = SolverSpec(kind="rk45", rtol=1e-12, atol=1e-12)
    return ProblemSpec(
        name="burgers", field=fld, initial=A0, horizon=0.2,
        reference=spec, substep=spec,
        observables=_rank_observables(),
        extras={"grid": grid, "advection": D, "kernel_eigvals": lam},
    )


# ---------------------------------------------------------------------------
# Vlasov-Poisson (1x1v)

class VlasovPoissonField(VectorField):
    """Adot = -D_x A V - diag(E(A)) A D_v with self-consistent electric field.

    Rows index x, columns index v. E is recovered from the charge density
    rho(x) = 1 - integral of f over v by a zero-mean spectral solve."""

    def __init__(self, xgrid: GridSpec1D, vgrid: GridSpec1D, fd_order: int = 4):
        super().__init__(xgrid.n, vgrid.n, stiff=False)
        self.xgrid = xgrid
        self.vgrid = vgrid
        diff = _centered_diff4_periodic if fd_order == 4 else _centered_diff2_periodic
        self.Dx = diff(xgrid.n, xgrid.spacing)
        # A @ Dv equals minus the row-wise v-derivative (centered stencils are
        # antisymmetric), which is why the force term below carries -E
        self.Dv = diff(vgrid.n, vgrid.spacing)
        self.V = np.diag(vgrid.points)
        length = xgrid.end - xgrid.start
        k = 2.0 * np.pi * np.fft.fftfreq(xgrid.n, d=xgrid.spacing)
        self._inv_ik = np.zeros(xgrid.n, dtype=complex)
        self._inv_ik[1:] = 1.0 / (1j * k[1:])
        self._length = length

    def density(self, A) -> np.ndarray:
        """rho(x) = 1 - integral of f dv."""
        if isinstance(A, FactoredMatrix):
            colsum = A.U @ (A.S @ (A.V.T @ np.ones(self.n)))
        else:
            colsum = np.asarray(A) @ np.ones(self.n)
        return 1.0 - colsum * self.vgrid.spacing

    def electric_field(self, A) -> np.ndarray:
        """Zero-mean E with dE/dx = rho, via FFT in x."""
        rho = self.density(A)
        return np.real(np.fft.ifft(np.fft.fft(rho) * self._inv_ik))

    def electric_energy(self, A) -> float:
        E = self.electric_field(A)
        return 0.5 * float(np.sum(E**2)) * self.xgrid.spacing

    def mass(self, A) -> float:
        if isinstance(A, FactoredMatrix):
            total = np.ones(self.m) @ (A.U @ (A.S @ (A.V.T @ np.ones(self.n))))
        else:
            total = float(np.sum(A))
        return float(total) * self.xgrid.spacing * self.vgrid.spacing

    def apply(self, X: np.ndarray) -> np.ndarray:
        E = self.electric_field(X)
        return -self.Dx @ X @ self.V - E[:, None] * (X @ self.Dv)


def make_vlasov(case: str = "landau", fd_order: int = 4) -> ProblemSpec:
    if case == "landau":
        xgrid = GridSpec1D(0.0, 4.0 * np.pi, 64, "periodic")
        vgrid = GridSpec1D(-6.0, 6.0, 256, "periodic")
        alpha, kwave = 1e-2, 0.5
        x, v = xgrid.points, vgrid.points
        fv = np.exp(-(v**2) / 2.0) / np.sqrt(2.0 * np.pi)
        # normalize on the discrete grid so the total charge vanishes exactly
        fv /= fv.sum() * vgrid.spacing
        A0 = np.outer(1.0 + alpha * np.cos(kwave * x), fv)
        horizon = 40.0
    elif case == "two_stream":
        xgrid = GridSpec1D(0.0, 10.0 * np.pi, 128, "periodic")
        vgrid = GridSpec1D(-6.0, 6.0, 128, "periodic")
        alpha, kwave, v0 = 1e-3, 0.2, 2.4
        x, v = xgrid.points, vgrid.points
        fv = (np.exp(-((v - v0) ** 2)) + np.exp(-((v + v0) ** 2))) / (2.0 * np.sqrt(2.0 * np.pi))
        fv /= fv.sum() * vgrid.spacing
        A0 = np.outer(1.0 + alpha * np.cos(kwave * x), fv)
        horizon = 50.0
    else:
        raise ValueError(f"unknown Vlasov case {case!r}")
    fld = VlasovPoissonField(xgrid, vgrid, fd_order=fd_order)
    spec = SolverSpec(kind="rk45", rtol=1e-8, atol=1e-8)
    obs = _rank_observables()
    obs["electric_energy"] = lambda t, Y: fld.electric_energy(Y)
    obs["mass"] = lambda t, Y: fld.mass(Y)
    return ProblemSpec(
        name=f"vlasov_{case}", field=fld, initial=A0, horizon=horizon,
        reference=spec, substep=spec, observables=obs,
        extras={"xgrid": xgrid, "vgrid": vgrid, "alpha": alpha, "kwave": kwave},
    )


PROBLEMS: dict[str, Callable[..., ProblemSpec]] = {
    "toy": make_toy,
    "lyapunov": make_lyapunov,
    "allen_cahn": make_allen_cahn,
    "burgers": make_burgers,
    "vlasov_landau": lambda **kw: make_vlasov("landau", **kw),
    "vlasov_two_stream": lambda **kw: make_vlasov("two_stream", **kw),
}


def make_problem(name: str, **overrides) -> ProblemSpec:
    if name not in PROBLEMS:
        raise KeyError(f"unknown problem {name!r}; known: {sorted(PROBLEMS)}")
    return PROBLEMS[name](**overrides)
