"""
Linear half-line solver for

    i u_t + a u_xx + i b u_x + i u_xxx = f,   u(0, x) = u0,   u(t, 0) = mu,

plus the full-line Fourier oracle, the compatibility recursion at the
corner (0, 0) and the weighted energy identity residual.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
from scipy.integrate import trapezoid
from scipy.sparse.linalg import splu

from core_types import (
    BoundarySignal,
    GridFunction,
    GridHistory,
    HalfLineGrid,
    ProblemSpec,
    WeightSpec,
)
from errors import AccuracyError, InsufficientDataError, ResolutionError, SingularOperatorError
from stencils import (
    boundary_derivative,
    derivative_matrix,
    fd_weights,
    time_derivative,
)

logger = logging.getLogger(__name__)

ALIASING_TOLERANCE = 1e-10


@dataclass(frozen=True)
class CompatibilityChain:
    Phi: List[GridFunction]
    mismatches: List[float]


@dataclass(frozen=True)
class LinearStepOperator:
    """
    Factored Crank-Nicolson step for fixed dt, dx, a, b.

    Row 0 carries u(t, 0) = mu; rows N-1 and N close the right end with
    u_x(L) = 0 and u(L) = 0.
    """

    grid: HalfLineGrid
    a: float
    b: float
    generator: sp.csr_matrix
    explicit: sp.csr_matrix
    lu: object

    @property
    def dt(self) -> float:
        return self.grid.dt


def spatial_generator(grid: HalfLineGrid, a: float, b: float) -> sp.csr_matrix:
    """Matrix of u -> i a u_xx - b u_x - u_xxx (so that u_t = A u - i f)."""
    n, dx = grid.N + 1, grid.dx
    return (1j * a * derivative_matrix(n, dx, 2)
            - b * derivative_matrix(n, dx, 1)
            - derivative_matrix(n, dx, 3)).tocsr()


def assemble_step_operator(grid: HalfLineGrid, a: float, b: float) -> LinearStepOperator:
    n, dt, dx = grid.N + 1, grid.dt, grid.dx
    gen = spatial_generator(grid, a, b)
    eye = sp.identity(n, dtype=complex, format="csr")
    lhs = (eye - 0.5 * dt * gen).tolil()
    rhs = (eye + 0.5 * dt * gen).tolil()

    lhs[0, :] = 0
    lhs[0, 0] = 1.0
    lhs[n - 1, :] = 0
    lhs[n - 1, n - 1] = 1.0
    lhs[n - 2, :] = 0
    lhs[n - 2, n - 3: n] = fd_weights([-2, -1, 0], 1) / dx
    for row in (0, n - 2, n - 1):
        rhs[row, :] = 0

    try:
        lu = splu(lhs.tocsc())
    except RuntimeError as e:
        raise SingularOperatorError(f"Crank-Nicolson matrix is singular: {e}") from e
    logger.debug("[linear] assembled CN operator N=%d dt=%.3e a=%g b=%g", grid.N, dt, a, b)
    return LinearStepOperator(grid, a, b, gen, rhs.tocsr(), lu)


def linear_step(op: LinearStepOperator, u_n: np.ndarray, f_half: np.ndarray, mu_next: complex) -> np.ndarray:
    """
    One Crank-Nicolson step; ``f_half`` is the source at t_{n+1/2} (any
    extra explicit forcing, e.g. a frozen nonlinearity, can be folded in).
    """
    u_n = np.asarray(u_n.values if isinstance(u_n, GridFunction) else u_n)
    n = u_n.size
    r = op.explicit @ u_n - 1j * op.dt * np.asarray(f_half)
    r[0] = mu_next
    r[n - 2] = 0.0
    r[n - 1] = 0.0
    out = op.lu.solve(r)
    if not np.all(np.isfinite(out)):
        raise SingularOperatorError("linear solve produced non-finite values")
    return out


def lifting_source(op: LinearStepOperator, psi_now: np.ndarray, psi_next: np.ndarray) -> np.ndarray:
    """
    Source at t_{n+1/2} that a lifting satisfies exactly under one
    Crank-Nicolson step: i (psi_next - psi_now) / dt - i A (psi_now + psi_next) / 2.

    Stepping U = u - Psi0 with f minus this source reproduces the unlifted
    scheme for u, so lifting modes near the time Nyquist frequency do not
    seed grid-scale waves.
    """
    psi_now, psi_next = np.asarray(psi_now), np.asarray(psi_next)
    return 1j * ((psi_next - psi_now) / op.dt - op.generator @ (0.5 * (psi_now + psi_next)))


def solve_linear(spec: ProblemSpec, op: Optional[LinearStepOperator] = None) -> GridHistory:
    """March the linear problem over the whole grid (nonlinear coefficients ignored)."""
    grid = spec.grid
    op = op or assemble_step_operator(grid, spec.coeffs.a, spec.coeffs.b)
    out = np.empty((grid.M + 1, grid.N + 1), dtype=complex)
    out[0] = spec.u0.values
    t = grid.t
    for n in range(grid.M):
        f_half = spec.f.at(t[n] + 0.5 * grid.dt, grid)
        out[n + 1] = linear_step(op, out[n], f_half, complex(spec.mu.at(t[n + 1])))
    return GridHistory(grid, out)


def boundary_flux_trace(values: np.ndarray, dx: float) -> complex:
    """u_x(t, 0) by the second-order one-sided difference."""
    return boundary_derivative(values, dx, 1)


# ---------------------------------------------------------------------------
# Compatibility at the corner
# ---------------------------------------------------------------------------

def _boundary_time_derivative(mu: BoundarySignal, order: int, step: float = 1e-3) -> complex:
    if order == 0:
        return complex(mu.at(0.0))
    if mu.func is None:
        step = float(mu.times[1] - mu.times[0])
    offsets = np.arange(order + 4)
    w = fd_weights(offsets, order) / step**order
    return complex(np.dot(w, np.asarray(mu.at(offsets * step))))


def compatibility_chain(spec: ProblemSpec, order: int) -> CompatibilityChain:
    """
    Phi_0 = u0,  Phi_l = -i d_t^{l-1} f(0) + (i a d_x^2 - b d_x - d_x^3) Phi_{l-1},
    with sixth-order spatial stencils; mismatches |mu^(l)(0) - Phi_l(0)|.
    """
    grid = spec.grid
    n = grid.N + 1
    if order > 2 and n < 2 * (3 * order + 6):
        raise AccuracyError(
            f"N={grid.N} too coarse for {3 * order} spatial derivatives at order {order}"
        )
    a, b = spec.coeffs.a, spec.coeffs.b
    dx = grid.dx
    op = (1j * a * derivative_matrix(n, dx, 2, 6)
          - b * derivative_matrix(n, dx, 1, 6)
          - derivative_matrix(n, dx, 3, 6))
    phis = [np.asarray(spec.u0.values)]
    for l in range(1, order + 1):
        phis.append(-1j * spec.f.time_derivative_at_zero(l - 1, grid) + op @ phis[-1])
    mismatches = [abs(_boundary_time_derivative(spec.mu, l) - phi[0]) for l, phi in enumerate(phis)]
    return CompatibilityChain([GridFunction(grid, phi) for phi in phis], mismatches)


# ---------------------------------------------------------------------------
# Full-line Fourier oracle
# ---------------------------------------------------------------------------

def dispersion(xi: np.ndarray, a: float, b: float) -> np.ndarray:
    return xi**3 - a * xi**2 - b * xi


def spectral_tail_fraction(u_hat: np.ndarray) -> float:
    power = np.abs(np.fft.fftshift(u_hat)) ** 2
    total = power.sum()
    if total == 0:
        return 0.0
    n = power.size
    edge = max(1, n // 20)
    return float((power[:edge].sum() + power[-edge:].sum()) / total)


def fourier_oracle_fullline(u0_hat: np.ndarray, xi: np.ndarray, t: float, a: float, b: float,
                            f_hat: Optional[np.ndarray] = None,
                            f_times: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Spectral solution of the linear equation on the whole line:

        w_hat(t) = u0_hat e^{i w t} - i int_0^t f_hat(tau) e^{i w (t - tau)} dtau,
        w = xi^3 - a xi^2 - b xi,

    the Duhamel integral by the trapezoid rule over ``f_times``.
    """
    for arr in (u0_hat,) if f_hat is None else (u0_hat, *f_hat):
        if spectral_tail_fraction(arr) > ALIASING_TOLERANCE:
            raise ResolutionError("spectral tail mass above 1e-10: refine the box grid")
    omega = dispersion(xi, a, b)
    out = u0_hat * np.exp(1j * omega * t)
    if f_hat is not None:
        times = np.asarray(f_times, dtype=float)
        mask = times <= t + 1e-14
        tau = times[mask]
        if tau.size >= 2:
            integrand = np.asarray(f_hat)[mask] * np.exp(1j * np.outer(t - tau, omega))
            out = out - 1j * trapezoid(integrand, tau, axis=0)
    return out


def periodic_box(grid: HalfLineGrid) -> tuple:
    """Nodes and wavenumbers of the periodic box [-L, L) with the grid spacing."""
    x = -grid.L + grid.dx * np.arange(2 * grid.N)
    xi = 2 * np.pi * np.fft.fftfreq(x.size, d=grid.dx)
    return x, xi


def fullline_linear_solution(u0_func, grid: HalfLineGrid, t: float, a: float, b: float) -> np.ndarray:
    """Oracle values on the half-line nodes at time ``t`` for data ``u0_func`` on the box."""
    x, xi = periodic_box(grid)
    u_hat = fourier_oracle_fullline(np.fft.fft(u0_func(x)), xi, t, a, b)
    w = np.fft.ifft(u_hat)
    return np.append(w[grid.N:], w[0])


# ---------------------------------------------------------------------------
# Weighted energy identity
# ---------------------------------------------------------------------------

def energy_identity_residual(u_history: GridHistory, a: float, b: float, w: WeightSpec,
                             mu1_history: Optional[np.ndarray] = None,
                             f0_history: Optional[GridHistory] = None,
                             f1_history: Optional[GridHistory] = None) -> np.ndarray:
    """
    Residual of the weighted balance

        d/dt int |u|^2 psi + |mu1|^2 psi(0) + 3 int |u_x|^2 psi'
          - 2a Im int u_x conj(u) psi' - b int |u|^2 psi' - int |u|^2 psi'''
          - 2 Im int f0 conj(u) psi + 2 Im int f1 (conj(u) psi)_x

    at every time level (homogeneous boundary data). ``mu1`` defaults to the
    one-sided difference u_x(t, 0).
    """
    grid = u_history.grid
    u = np.asarray(u_history.values)
    if u.shape[0] < 3:
        raise InsufficientDataError("energy identity needs at least three time levels")
    x, q = grid.x, grid.quadrature
    psi, dpsi, d3psi = w(x), w.derivative(x, 1), w.derivative(x, 3)
    n = grid.N + 1
    ux = (derivative_matrix(n, grid.dx, 1) @ u.T).T
    if mu1_history is None:
        mu1_history = ux[:, 0]

    mass = (np.abs(u) ** 2) @ (psi * q)
    res = time_derivative(mass, grid.dt)
    res = res + np.abs(mu1_history) ** 2 * psi[0]
    res = res + 3 * (np.abs(ux) ** 2) @ (dpsi * q)
    res = res - 2 * a * np.imag((ux * np.conj(u)) @ (dpsi * q))
    res = res - b * (np.abs(u) ** 2) @ (dpsi * q)
    res = res - (np.abs(u) ** 2) @ (d3psi * q)
    if f0_history is not None:
        res = res - 2 * np.imag((np.asarray(f0_history.values) * np.conj(u)) @ (psi * q))
    if f1_history is not None:
        ubar_psi_x = (derivative_matrix(n, grid.dx, 1) @ (np.conj(u) * psi).T).T
        res = res + 2 * np.imag((np.asarray(f1_history.values) * ubar_psi_x) @ q)
    return np.real(res)
