"""
Nonlinear terms of the HNLS equation

    i u_t + a u_xx + i b u_x + i u_xxx + lam g u + i beta (g u)_x + i gamma g_x u = f,

with g = |u|^p or its regularization g_h(|u|), plus the per-step fixed point
solver on the half-line and a periodic reference solver on the whole line.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline

from core_types import (
    Coefficients,
    GridFunction,
    GridHistory,
    ProblemSpec,
    Source,
    WeightSpec,
    tail_mass_guard,
)
from errors import ContractionFailureError, InvalidInputError
from linear_halfline import LinearStepOperator, assemble_step_operator, lifting_source, linear_step
from stencils import derivative_matrix

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 50
_TABLE_PANELS = 512


# ---------------------------------------------------------------------------
# Cutoff eta
# ---------------------------------------------------------------------------

def _bump(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    q = x * (1 - x)
    out = np.zeros_like(x)
    inside = q > 1e-2
    out[inside] = np.exp(-1.0 / q[inside])
    return out


def _bump_derivatives(x: np.ndarray) -> tuple:
    """(B, B', B'') of B = exp(-1/(x(1-x))) on (0, 1), zero elsewhere."""
    x = np.asarray(x, dtype=float)
    q = x * (1 - x)
    dq = 1 - 2 * x
    b = _bump(x)
    d1 = np.zeros_like(x)
    d2 = np.zeros_like(x)
    inside = b > 0
    qi, dqi, bi = q[inside], dq[inside], b[inside]
    d1[inside] = bi * dqi / qi**2
    d2[inside] = bi * (dqi**2 / qi**4 + (-2 * qi - 2 * dqi**2) / qi**3)
    return b, d1, d2


class CutoffEta:
    """
    Smooth nondecreasing step: eta = 0 for x <= 0, eta = 1 for x >= 1,
    eta(x) + eta(1 - x) = 1.

    Realized as the normalized integral of the bump exp(-1/(x(1-x))); values
    on [0, 1/2] come from a Hermite table of panel quadratures and the right
    half is filled by the antisymmetry identity.
    """

    def __init__(self, panels: int = _TABLE_PANELS):
        nodes = np.linspace(0.0, 0.5, panels + 1)
        pieces = [quad(lambda s: float(_bump(np.array([s]))[0]), lo, hi, epsabs=1e-16, epsrel=1e-13)[0]
                  for lo, hi in zip(nodes[:-1], nodes[1:])]
        cum = np.concatenate([[0.0], np.cumsum(pieces)])
        self.norm = 2.0 * cum[-1]
        self._table = CubicHermiteSpline(nodes, cum / self.norm, _bump(nodes) / self.norm)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 1.0, 1.0, 0.0)
        left = (x > 0) & (x <= 0.5)
        right = (x > 0.5) & (x < 1.0)
        out[left] = self._table(x[left])
        out[right] = 1.0 - self._table(1.0 - x[right])
        return out if out.ndim else float(out)

    def derivative(self, x, order: int = 1) -> np.ndarray:
        if order == 0:
            return self(x)
        if order not in (1, 2, 3):
            raise InvalidInputError(f"eta derivative of order {order} not available")
        return _bump_derivatives(x)[order - 1] / self.norm


@lru_cache(maxsize=1)
def cutoff() -> CutoffEta:
    return CutoffEta()


def eta(x):
    return cutoff()(x)


# ---------------------------------------------------------------------------
# Regularized nonlinearity
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16)
def _tail_table(p: float) -> CubicHermiteSpline:
    """T_p(s) = int_0^s p (1+r)^(p-1) (1 - eta(r)) dr on [0, 1]."""
    eta_fn = cutoff()
    integrand = lambda r: p * (1 + r) ** (p - 1) * (1 - eta_fn(r))
    nodes = np.linspace(0.0, 1.0, _TABLE_PANELS + 1)
    pieces = [quad(integrand, lo, hi, epsabs=1e-15, epsrel=1e-13)[0]
              for lo, hi in zip(nodes[:-1], nodes[1:])]
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    return CubicHermiteSpline(nodes, cum, integrand(nodes))


def _shaped(out: np.ndarray, like: np.ndarray):
    return out.reshape(like.shape) if like.ndim else float(out[0])


@dataclass(frozen=True)
class RegularizedNonlinearity:
    """
    g_h with g_h'(theta) = p theta^(p-1) eta(2 - h theta), so that
    g_h(theta) = theta^p on [0, 1/h] and g_h is constant beyond 2/h.
    """

    h: float
    p: float

    def __post_init__(self):
        if not 0 < self.h <= 1:
            raise InvalidInputError(f"h must lie in (0, 1], got {self.h}")
        if self.p < 1:
            raise InvalidInputError(f"p must be >= 1, got {self.p}")

    @property
    def threshold(self) -> float:
        return 1.0 / self.h

    @cached_property
    def ceiling(self) -> float:
        """The constant value of g_h beyond 2/h."""
        return self.h ** (-self.p) * (1.0 + float(_tail_table(self.p)(1.0)))

    def g(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        flat = np.atleast_1d(theta)
        out = flat ** self.p
        active = flat > self.threshold
        if np.any(active):
            s = np.minimum(self.h * flat[active] - 1.0, 1.0)
            out[active] = self.h ** (-self.p) * (1.0 + _tail_table(self.p)(s))
        return _shaped(out, theta)

    def g_prime(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return self.p * theta ** (self.p - 1) * eta(2.0 - self.h * theta)

    def g_star(self, theta) -> np.ndarray:
        """g*_h(theta) = int_0^theta g_h(sqrt(y)) dy."""
        theta = np.asarray(theta, dtype=float)
        flat = np.atleast_1d(theta)
        k = self.p / 2 + 1
        out = flat**k / k
        active = flat > self.threshold**2
        if np.any(active):
            out[active] = [self._g_star_tail(v) for v in flat[active]]
        return _shaped(out, theta)

    def _g_star_tail(self, theta: float) -> float:
        k = self.p / 2 + 1
        z0, z1 = self.threshold, 2.0 * self.threshold
        base = z0 ** (2 * k) / k
        upper = min(math.sqrt(theta), z1)
        base += quad(lambda z: 2 * z * float(self.g(np.array([z]))[0]), z0, upper,
                     epsabs=1e-14, epsrel=1e-12)[0]
        if theta > z1**2:
            base += self.ceiling * (theta - z1**2)
        return base

    def is_active(self, values) -> bool:
        return bool(np.max(np.abs(values), initial=0.0) > self.threshold)


@dataclass(frozen=True)
class PowerNonlinearity:
    """Unregularized g = theta^p."""

    p: float

    def g(self, theta):
        return np.asarray(theta, dtype=float) ** self.p

    def g_prime(self, theta):
        return self.p * np.asarray(theta, dtype=float) ** (self.p - 1)

    def g_star(self, theta):
        k = self.p / 2 + 1
        return np.asarray(theta, dtype=float) ** k / k

    def is_active(self, values) -> bool:
        return False


def g_h(theta, h: float, p: float):
    return RegularizedNonlinearity(h, p).g(theta)


def g_h_prime(theta, h: float, p: float):
    return RegularizedNonlinearity(h, p).g_prime(theta)


def g_star(theta, h: float, p: float):
    return RegularizedNonlinearity(h, p).g_star(theta)


def resolve_nonlinearity(coeffs: Coefficients, reg=None):
    return reg if reg is not None else PowerNonlinearity(coeffs.p)


def nonlinear_terms(values: np.ndarray, coeffs: Coefficients, reg=None,
                    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                    dx: Optional[float] = None) -> np.ndarray:
    """
    lam g u + i beta D(g u) + i gamma D(g) u on raw samples; ``D`` is either the
    given callable or the second-order stencil with spacing ``dx``.
    """
    u = np.asarray(values, dtype=complex)
    if coeffs.is_linear:
        return np.zeros_like(u)
    if derivative is None:
        mat = derivative_matrix(u.size, float(dx), 1)
        derivative = mat.dot
    g = resolve_nonlinearity(coeffs, reg).g(np.abs(u))
    out = coeffs.lam * g * u
    if coeffs.beta:
        out = out + 1j * coeffs.beta * derivative(g * u)
    if coeffs.gamma:
        out = out + 1j * coeffs.gamma * derivative(g.astype(complex)) * u
    return out


def nonlinear_apply(u: GridFunction, coeffs: Coefficients, reg=None) -> GridFunction:
    return GridFunction(u.grid, nonlinear_terms(u.values, coeffs, reg, dx=u.grid.dx))


def truncate_data(spec: ProblemSpec, h: float) -> ProblemSpec:
    """u0_h = u0 eta(1/h - x), f_h = f eta(1/h - x)."""
    grid = spec.grid
    cut = eta(1.0 / h - grid.x)
    u0 = GridFunction(grid, spec.u0.values * cut)
    f = spec.f
    if not f.is_zero:
        f = Source(samples=GridHistory(grid, f.history(grid).values * cut))
    return ProblemSpec(spec.coeffs, u0, spec.mu, f)


# ---------------------------------------------------------------------------
# Fixed point stepping on the half-line
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepInfo:
    iterations: int
    contraction: float
    regularization_active: bool


@dataclass(frozen=True)
class HnlsRun:
    history: GridHistory
    iterations: np.ndarray
    contraction: np.ndarray
    regularization_active: np.ndarray

    @property
    def max_iterations(self) -> int:
        return int(self.iterations.max(initial=0))


def hnls_step(op: LinearStepOperator, u_n: np.ndarray, t_n: float, spec: ProblemSpec,
              reg=None, lifting=None, step_index: int = 0,
              tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
              psi_values: Optional[np.ndarray] = None) -> tuple:
    """
    Advance u from t_n to t_n + dt by Picard iteration on the Crank-Nicolson
    step with the nonlinearity frozen at the time-centered iterate.

    With a lifting pair the unknown is U = u - Psi0 (zero boundary value)
    and the source is f minus the discrete F0 of ``lifting_source``.
    Returns (u^{n+1}, StepInfo).
    """
    grid = op.grid
    dt = grid.dt
    n = step_index
    f_half = spec.f.at(t_n + 0.5 * dt, grid)
    if lifting is not None:
        psi_now = np.asarray(lifting.Psi0.values[n])
        psi_next = np.asarray(lifting.Psi0.values[n + 1])
        f_half = f_half - lifting_source(op, psi_now, psi_next)
        base = np.asarray(u_n) - psi_now
        mu_next = 0.0
    else:
        psi_now = psi_next = 0.0
        base = np.asarray(u_n)
        mu_next = complex(spec.mu.at(t_n + dt))
    q = grid.quadrature * (psi_values if psi_values is not None else 1.0)
    nl = resolve_nonlinearity(spec.coeffs, reg)

    current = base
    previous_distance = None
    factor = 0.0
    active = False
    for iteration in range(1, max_iter + 1):
        mid = 0.5 * (base + psi_now + current + psi_next)
        active = active or nl.is_active(mid)
        forcing = f_half - nonlinear_terms(mid, spec.coeffs, reg, dx=grid.dx)
        nxt = linear_step(op, base, forcing, mu_next)
        distance = float(np.sqrt(np.abs(nxt - current) ** 2 @ q))
        scale = max(1.0, float(np.sqrt(np.abs(nxt) ** 2 @ q)))
        if previous_distance:
            factor = distance / previous_distance
        previous_distance = distance
        current = nxt
        if distance < tol * scale:
            logger.debug("[step] n=%d iters=%d factor=%.3e regularized=%s", n, iteration, factor, active)
            return current + psi_next, StepInfo(iteration, factor, active)
    raise ContractionFailureError(max_iter, previous_distance or 0.0)


def solve_hnls(spec: ProblemSpec, reg=None, lifting=None, tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER, weight: Optional[WeightSpec] = None,
               op: Optional[LinearStepOperator] = None, guard: bool = True) -> HnlsRun:
    """March the (regularized) HNLS problem over the grid of ``spec``."""
    if not spec.mu.is_zero:
        spec.check_boundary_regime()
    grid = spec.grid
    op = op or assemble_step_operator(grid, spec.coeffs.a, spec.coeffs.b)
    psi_values = weight(grid.x) if weight is not None else None
    out = np.empty((grid.M + 1, grid.N + 1), dtype=complex)
    out[0] = spec.u0.values
    iters = np.zeros(grid.M + 1, dtype=int)
    factors = np.zeros(grid.M + 1)
    active = np.zeros(grid.M + 1, dtype=bool)
    for n, t_n in enumerate(grid.t[:-1]):
        out[n + 1], info = hnls_step(op, out[n], t_n, spec, reg, lifting, n, tol, max_iter, psi_values)
        iters[n + 1] = info.iterations
        factors[n + 1] = info.contraction
        active[n + 1] = info.regularization_active
    history = GridHistory(grid, out)
    if guard:
        tail_mass_guard(history.slice(grid.M))
    logger.info("[solve] %d steps, max %d Picard iterations, regularization active on %d steps",
                grid.M, iters.max(), int(active.sum()))
    return HnlsRun(history, iters, factors, active)


# ---------------------------------------------------------------------------
# Whole-line reference solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FullLineRun:
    """Periodic pseudo-spectral solution on the box [-half_width, half_width)."""

    x: np.ndarray
    t: np.ndarray
    values: np.ndarray
    xi: np.ndarray = field(repr=False)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def derivative(self, values: np.ndarray, order: int = 1) -> np.ndarray:
        return np.fft.ifft((1j * self.xi) ** order * np.fft.fft(values, axis=-1), axis=-1)


def fullline_hnls_run(u0: Callable[[np.ndarray], np.ndarray], half_width: float, n_points: int,
                      T: float, steps: int, coeffs: Coefficients, reg=None) -> FullLineRun:
    """
    Integrating-factor RK4 for the whole-line HNLS with f = 0: the dispersive
    part exp(i(xi^3 - a xi^2 - b xi) t) is applied exactly, the nonlinearity
    with spectral derivatives.
    """
    dx = 2 * half_width / n_points
    x = -half_width + dx * np.arange(n_points)
    xi = 2 * np.pi * np.fft.fftfreq(n_points, d=dx)
    omega = xi**3 - coeffs.a * xi**2 - coeffs.b * xi
    dt = T / steps
    half = np.exp(0.5j * omega * dt)
    full = half * half

    def spectral_derivative(v):
        return np.fft.ifft(1j * xi * np.fft.fft(v))

    def rhs(v_hat):
        v = np.fft.ifft(v_hat)
        return 1j * np.fft.fft(nonlinear_terms(v, coeffs, reg, derivative=spectral_derivative))

    u_hat = np.fft.fft(np.asarray(u0(x), dtype=complex))
    out = np.empty((steps + 1, n_points), dtype=complex)
    out[0] = np.fft.ifft(u_hat)
    for n in range(steps):
        k1 = rhs(u_hat)
        k2 = rhs(half * (u_hat + 0.5 * dt * k1))
        k3 = rhs(half * u_hat + 0.5 * dt * k2)
        k4 = rhs(full * u_hat + dt * half * k3)
        u_hat = full * u_hat + dt / 6 * (full * k1 + 2 * half * (k2 + k3) + k4)
        out[n + 1] = np.fft.ifft(u_hat)
    return FullLineRun(x, np.linspace(0.0, T, steps + 1), out, xi)
