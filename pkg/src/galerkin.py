"""
Spectral Galerkin solver for the auxiliary linear problems with zero data

    i V_t + a V_xx + i b V_x + i V_xxx = F,   V(0,x) = 0,   V(t,0) = V_x(t,0) = 0   (two-condition)
    i V_t + a V_xx - i b V_x - i V_xxx = F,   V(0,x) = 0,   V(t,0) = 0               (one-condition)

on the basis x^m L_j(2x) e^{-x} (m = 2 resp. 1), L_j the Laguerre polynomials.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Union

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.laguerre import lag2poly, laggauss
from scipy.integrate import solve_ivp, trapezoid
from scipy.interpolate import CubicSpline

from boundary_potential import AdjointLifting
from core_types import GridHistory, HalfLineGrid
from errors import IllConditionedBasisError, InvalidInputError, StiffnessError

logger = logging.getLogger(__name__)

TWO_CONDITION = "two-condition"
ONE_CONDITION = "one-condition"
MAX_DIMENSION = 40
MAX_CONDITION = 1e12
NORM_GRID = np.linspace(0.0, 40.0, 4001)

ForcingLike = Union[Callable[[float, np.ndarray], np.ndarray], GridHistory]


def _derivative_chain(poly: Polynomial, order: int) -> List[Polynomial]:
    """Polynomial parts of (P e^{-x})^(k), k = 0..order."""
    chain = [poly]
    for _ in range(order):
        chain.append(chain[-1].deriv() - chain[-1])
    return chain


@dataclass(frozen=True)
class GalerkinBasis:
    k: int
    variant: str
    polys: List[List[Polynomial]] = field(repr=False)
    gram: np.ndarray = field(repr=False)
    d1: np.ndarray = field(repr=False)
    d2: np.ndarray = field(repr=False)
    d3: np.ndarray = field(repr=False)
    condition: float = 0.0

    def evaluate(self, c: np.ndarray, x: np.ndarray, order: int = 0) -> np.ndarray:
        """sum_j c_j phi_j^(order)(x); ``c`` may carry leading time axes."""
        x = np.asarray(x, dtype=float)
        table = np.array([chain[order](x) for chain in self.polys]) * np.exp(-x)
        return np.asarray(c) @ table

    def boundary_slope(self) -> np.ndarray:
        return np.array([chain[1](0.0) for chain in self.polys])

    def stiffness(self, a: float, b: float) -> np.ndarray:
        """K[m, j] = int phi_j (a phi_m'' -/+ i b phi_m' -/+ i phi_m''') for the two/one-condition form."""
        sign = -1.0 if self.variant == TWO_CONDITION else 1.0
        return a * self.d2 + sign * 1j * (b * self.d1 + self.d3)


def build_basis(k: int, variant: str = TWO_CONDITION) -> GalerkinBasis:
    if variant not in (TWO_CONDITION, ONE_CONDITION):
        raise InvalidInputError(f"unknown Galerkin variant '{variant}'")
    if not 1 <= k <= MAX_DIMENSION:
        raise InvalidInputError(f"basis dimension must lie in 1..{MAX_DIMENSION}, got {k}")
    power = 2 if variant == TWO_CONDITION else 1
    polys = []
    for j in range(k):
        lag = lag2poly([0] * j + [1])
        poly = Polynomial(lag * 2.0 ** np.arange(lag.size)) * Polynomial([0] * power + [1])
        polys.append(_derivative_chain(poly, 3))

    # products carry e^{-2x}; substitute y = 2x for the Laguerre weight
    y, w = laggauss(2 * k + 10)
    x = y / 2
    table = [np.array([chain[d](x) for chain in polys]) for d in range(4)]
    weighted = table[0] * (0.5 * w)

    def integrals(d):
        # [m, j] = int phi_j phi_m^(d)
        return table[d] @ weighted.T

    gram = integrals(0)
    cond = float(np.linalg.cond(gram))
    if cond > MAX_CONDITION:
        raise IllConditionedBasisError(f"Gram matrix condition number {cond:.3e} for k={k}")
    logger.debug("[galerkin] basis k=%d %s cond=%.3e", k, variant, cond)
    return GalerkinBasis(k, variant, polys, gram, integrals(1), integrals(2), integrals(3), cond)


@dataclass(frozen=True)
class GalerkinState:
    """Coefficient history c(t) of V_k = sum_j c_j(t) phi_j."""

    basis: GalerkinBasis
    t: np.ndarray
    c: np.ndarray
    a: float
    b: float
    forcing: Callable[[float], np.ndarray] = field(repr=False)
    forcing_norm: np.ndarray = field(repr=False)

    def rhs(self, t: float, c: np.ndarray) -> np.ndarray:
        return _ode_rhs(self.basis, self.basis.stiffness(self.a, self.b), self.forcing)(t, c)

    def norms(self) -> np.ndarray:
        return np.sqrt(np.real(np.einsum("ni,ij,nj->n", self.c.conj(), self.basis.gram, self.c)))

    def boundary_trace(self) -> np.ndarray:
        """V_x(t, 0)."""
        return self.c @ self.basis.boundary_slope()

    def on_grid(self, grid: HalfLineGrid) -> GridHistory:
        if self.t.size != grid.M + 1:
            raise InvalidInputError("Galerkin output times do not match the grid")
        return GridHistory(grid, self.basis.evaluate(self.c, grid.x))


def _projector(basis: GalerkinBasis, F: ForcingLike):
    """(b(t) = [int F phi_m dx]_m, ||F(t)|| evaluator)."""
    if isinstance(F, GridHistory):
        grid = F.grid
        phi = np.array([chain[0](grid.x) for chain in basis.polys]) * np.exp(-grid.x)
        proj = (np.asarray(F.values) * grid.quadrature) @ phi.T
        spline = CubicSpline(grid.t, proj, axis=0)
        norms = np.sqrt(np.abs(F.values) ** 2 @ grid.quadrature)
        return spline, CubicSpline(grid.t, norms)
    y, w = laggauss(2 * basis.k + 10)
    phi_w = np.array([chain[0](y) for chain in basis.polys]) * w

    def project(t):
        return phi_w @ np.asarray(F(t, y), dtype=complex)

    def norm(t):
        return np.sqrt(trapezoid(np.abs(np.asarray(F(t, NORM_GRID))) ** 2, NORM_GRID))

    return project, np.vectorize(norm)


def _ode_rhs(basis: GalerkinBasis, stiffness: np.ndarray, project):
    gram_inv = np.linalg.inv(basis.gram)

    def rhs(t, c):
        return gram_inv @ (1j * (stiffness @ c) - 1j * project(t))

    return rhs


def galerkin_solve(basis: GalerkinBasis, F: ForcingLike, T: float, a: float = 0.0, b: float = 0.0,
                   t_eval: Optional[np.ndarray] = None, rtol: float = 1e-10,
                   atol: float = 1e-12) -> GalerkinState:
    """
    Integrate G c' = i K c - i b(t), c(0) = 0, with an eighth-order Runge-Kutta
    pair; G is the Gram matrix, K the stiffness matrix of the variant and
    b(t) the L2 projection of F.
    """
    project, norm = _projector(basis, F)
    K = basis.stiffness(a, b)
    rhs = _ode_rhs(basis, K, project)
    if t_eval is None:
        t_eval = F.grid.t if isinstance(F, GridHistory) else np.linspace(0.0, T, 101)
    sol = solve_ivp(rhs, (0.0, T), np.zeros(basis.k, dtype=complex), method="DOP853",
                    t_eval=t_eval, rtol=rtol, atol=atol)
    if not sol.success:
        raise StiffnessError(f"Galerkin ODE failed for k={basis.k}: {sol.message}; reduce k or T")
    logger.debug("[galerkin] k=%d T=%g nfev=%d", basis.k, T, sol.nfev)
    return GalerkinState(basis, sol.t, sol.y.T, a, b, project, norm(sol.t))


def _balance(state: GalerkinState) -> tuple:
    dc = np.array([state.rhs(t, c) for t, c in zip(state.t, state.c)])
    d_norm2 = 2 * np.real(np.einsum("ni,ij,nj->n", state.c.conj(), state.basis.gram, dc))
    proj = np.array([state.forcing(t) for t in state.t])
    source = 2 * np.imag(np.einsum("ni,ni->n", proj, state.c.conj()))
    return d_norm2, source


def identity_residual(state: GalerkinState) -> np.ndarray:
    """d/dt int |V_k|^2 - 2 Im int F conj(V_k) (two-condition form)."""
    d_norm2, source = _balance(state)
    return d_norm2 - source


def adjoint_identity_residual(state: GalerkinState) -> np.ndarray:
    """d/dt int |V_k|^2 + |V_kx(0)|^2 - 2 Im int F conj(V_k) (one-condition form)."""
    if state.basis.variant != ONE_CONDITION:
        raise InvalidInputError("the boundary-trace identity belongs to the one-condition basis")
    d_norm2, source = _balance(state)
    return d_norm2 + np.abs(state.boundary_trace()) ** 2 - source


def energy_bound(state: GalerkinState) -> tuple:
    """(sup_t ||V_k(t)||, int_0^T ||F(t)|| dt)."""
    return float(np.max(state.norms())), float(trapezoid(state.forcing_norm, state.t))


def galerkin_boundary_solve(basis: GalerkinBasis, lifting: AdjointLifting, a: float = 0.0,
                            b: float = 0.0) -> GalerkinState:
    """
    One-condition run with boundary data v(t, 0) = mu0: the unknown is
    V = v - Psi with zero data and the lifting's sampled source as forcing.
    """
    if basis.variant != ONE_CONDITION:
        raise InvalidInputError("boundary-driven runs use the one-condition basis")
    psi_start = np.asarray(lifting.Psi.values[0])
    if np.max(np.abs(psi_start)) > 1e-12:
        raise InvalidInputError("boundary data must vanish at t = 0 to match zero initial data")
    grid = lifting.F.grid
    return galerkin_solve(basis, lifting.F, grid.T, a=a, b=b)


def lifted_solution(state: GalerkinState, lifting: AdjointLifting) -> GridHistory:
    """v = V_k + Psi on the lifting's grid."""
    grid = lifting.Psi.grid
    return GridHistory(grid, state.on_grid(grid).values + np.asarray(lifting.Psi.values))
