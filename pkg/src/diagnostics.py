"""
Diagnostics: balance laws, the energy identity, the weak identity, the
interpolation probe and the continuous dependence experiment.

Every function is pure over finished histories; nothing here steps a solver
except :func:`solve_problem` and the experiments built on it.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy.integrate import trapezoid

from boundary_potential import (
    Calibration,
    build_lifting,
    calibrate_lambda0,
    transform_window,
)
from core_types import (
    BoundarySignal,
    Coefficients,
    GridFunction,
    GridHistory,
    ProblemSpec,
    Source,
    WeightSpec,
    check_uniqueness_condition,
    sigma_plus,
    weight_samples,
    weighted_norms,
)
from errors import (
    InvalidInputError,
    InvalidTestFunctionError,
    NumericalDegeneracyError,
    UndefinedFunctionalError,
)
from nonlinearity import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    FullLineRun,
    HnlsRun,
    RegularizedNonlinearity,
    resolve_nonlinearity,
    solve_hnls,
    truncate_data,
)
from stencils import boundary_derivative, differentiate, time_derivative, trapezoid_weights

logger = logging.getLogger(__name__)

FIXED_SEED = 20240611


class _Field(NamedTuple):
    values: np.ndarray
    dt: float
    quadrature: np.ndarray
    deriv: Callable[[np.ndarray, int], np.ndarray]


def _as_field(history: Union[GridHistory, FullLineRun]) -> _Field:
    if isinstance(history, FullLineRun):
        q = np.full(history.x.size, history.dx)
        return _Field(np.asarray(history.values), history.dt, q, history.derivative)
    grid = history.grid
    return _Field(np.asarray(history.values), grid.dt, grid.quadrature,
                  lambda v, order=1: differentiate(v, grid.dx, order))


# ---------------------------------------------------------------------------
# Mass balance
# ---------------------------------------------------------------------------

def mass_series(history: Union[GridHistory, FullLineRun]) -> np.ndarray:
    fld = _as_field(history)
    return np.abs(fld.values) ** 2 @ fld.quadrature


def mass_drift(history: Union[GridHistory, FullLineRun]) -> np.ndarray:
    """|m(t) - m(0)| / m(0) with m = int |u|^2."""
    m = mass_series(history)
    return np.abs(m - m[0]) / m[0] if m[0] else np.zeros_like(m)


def l2_balance_residual(u_history: GridHistory, coeffs: Coefficients,
                        f_history: Optional[GridHistory] = None,
                        mu: Optional[BoundarySignal] = None, reg=None) -> np.ndarray:
    """
    Residual of

        d/dt int |u|^2 + |u_x(0)|^2 - 2a Im(u_x(0) conj(mu)) - b |mu|^2
          - 2 Re(u_xx(0) conj(mu)) - 2 Im int f conj(u)
          + beta (g*(|mu|^2) - 2 g(|mu|) |mu|^2) + 2 gamma (g*(|mu|^2) - g(|mu|) |mu|^2)

    per time level; the trace terms in mu vanish for homogeneous data.
    """
    grid = u_history.grid
    u = np.asarray(u_history.values)
    q = grid.quadrature
    dx = grid.dx
    ux0 = np.array([boundary_derivative(row, dx, 1) for row in u])
    res = time_derivative(np.abs(u) ** 2 @ q, grid.dt) + np.abs(ux0) ** 2
    if f_history is not None:
        res = res - 2 * np.imag((np.asarray(f_history.values) * np.conj(u)) @ q)
    if mu is not None and not mu.is_zero:
        m = np.asarray(mu.at(grid.t))
        uxx0 = np.array([boundary_derivative(row, dx, 2) for row in u])
        res = res - 2 * coeffs.a * np.imag(ux0 * np.conj(m)) - coeffs.b * np.abs(m) ** 2
        res = res - 2 * np.real(uxx0 * np.conj(m))
        if not coeffs.is_linear:
            nl = resolve_nonlinearity(coeffs, reg)
            mod = np.abs(m)
            gs, gm = nl.g_star(mod**2), nl.g(mod)
            res = res + coeffs.beta * (gs - 2 * gm * mod**2) + 2 * coeffs.gamma * (gs - gm * mod**2)
    return np.real(res)


# ---------------------------------------------------------------------------
# Energy functional
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyFunctional:
    """
    E(u) = int |u_x|^2 + i/(beta+gamma) (lam - a(3 beta + 2 gamma)/3) u conj(u_x)
                - 2(3 beta + 2 gamma)/(3(p+2)) |u|^(p+2)
    """

    coeffs: Coefficients

    def __post_init__(self):
        if self.coeffs.beta + self.coeffs.gamma == 0:
            raise UndefinedFunctionalError("energy functional needs beta + gamma != 0")

    @property
    def cross(self) -> float:
        c = self.coeffs
        return (c.lam - c.a * (3 * c.beta + 2 * c.gamma) / 3) / (c.beta + c.gamma)

    @property
    def potential(self) -> float:
        c = self.coeffs
        return 2 * (3 * c.beta + 2 * c.gamma) / (3 * (c.p + 2))

    def density(self, u: np.ndarray, ux: np.ndarray) -> np.ndarray:
        return (np.abs(ux) ** 2 + 1j * self.cross * u * np.conj(ux)
                - self.potential * np.abs(u) ** (self.coeffs.p + 2))

    def evaluate(self, history: Union[GridHistory, FullLineRun]) -> np.ndarray:
        """Complex values per time level; the imaginary part is a round-off check."""
        fld = _as_field(history)
        ux = fld.deriv(fld.values, 1)
        return self.density(fld.values, ux) @ fld.quadrature

    def value(self, history: Union[GridHistory, FullLineRun]) -> np.ndarray:
        return np.real(self.evaluate(history))


@dataclass(frozen=True)
class EnergyIdentitySeries:
    energy: np.ndarray
    dE_dt: np.ndarray
    gamma_term: np.ndarray
    residual: np.ndarray


def gamma_obstruction(history: Union[GridHistory, FullLineRun], coeffs: Coefficients) -> np.ndarray:
    """(gamma/3) int (|u|^p)_x (|u|^2)_xx per time level."""
    fld = _as_field(history)
    mod = np.abs(fld.values)
    gx = np.real(fld.deriv(mod**coeffs.p + 0j, 1))
    rho_xx = np.real(fld.deriv(mod**2 + 0j, 2))
    return coeffs.gamma / 3 * (gx * rho_xx) @ fld.quadrature


def energy_identity_residual_nl(history: Union[GridHistory, FullLineRun], coeffs: Coefficients) -> EnergyIdentitySeries:
    """dE/dt by centered differences against the gamma obstruction term."""
    energy = EnergyFunctional(coeffs).value(history)
    dE = time_derivative(energy, _as_field(history).dt)
    gterm = gamma_obstruction(history, coeffs)
    return EnergyIdentitySeries(energy, dE, gterm, dE - gterm)


# ---------------------------------------------------------------------------
# Weak identity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeakTestFunction:
    """
    Separable test function phi(t, x) = theta(t) P(x) with
    ``theta = (theta, theta')`` and ``profile = (P, P', P'', P''')``.
    """

    name: str
    theta: Sequence[Callable] = field(repr=False)
    profile: Sequence[Callable] = field(repr=False)

    def validate(self, T: float) -> None:
        checks = {
            "phi(T, .) = 0": abs(self.theta[0](T)),
            "phi(., 0) = 0": abs(self.profile[0](np.array([0.0]))[0]),
            "phi_x(., 0) = 0": abs(self.profile[1](np.array([0.0]))[0]),
        }
        for label, value in checks.items():
            if value > 1e-12:
                raise InvalidTestFunctionError(f"test function {self.name} violates {label} ({value:.2e})")

    def sample(self, t: np.ndarray, x: np.ndarray, t_order: int = 0, x_order: int = 0) -> np.ndarray:
        return np.outer(self.theta[t_order](t), self.profile[x_order](x))


def damped_test_function(k: float, T: float) -> WeakTestFunction:
    """theta = (T - t)^2, P = x^2 e^{kappa x}, kappa = -1 + i k."""
    kappa = -1 + 1j * k
    e = lambda x: np.exp(kappa * np.asarray(x, dtype=float))
    profile = (
        lambda x: x**2 * e(x),
        lambda x: (2 * x + kappa * x**2) * e(x),
        lambda x: (2 + 4 * kappa * x + kappa**2 * x**2) * e(x),
        lambda x: (6 * kappa + 6 * kappa**2 * x + kappa**3 * x**2) * e(x),
    )
    theta = (lambda t: (T - np.asarray(t, dtype=float)) ** 2,
             lambda t: -2 * (T - np.asarray(t, dtype=float)))
    return WeakTestFunction(f"x^2 exp((-1+{k:g}i)x)", theta, profile)


def weak_test_functions(T: float, ks: Sequence[float] = (0.0, 1.0, 2.0, 4.0)) -> List[WeakTestFunction]:
    return [damped_test_function(k, T) for k in ks]


def weak_form_residual(u_history: GridHistory, spec: ProblemSpec, test_functions: Sequence[WeakTestFunction],
                       reg=None) -> np.ndarray:
    """
    For every phi the value of

        iint [u (i phi_t - a phi_xx + i b phi_x + i phi_xxx) - lam g u phi + i beta g u phi_x
              + i gamma g (u phi)_x + f phi] dx dt + i int u0 phi(0, .) dx + i int mu phi_xx(., 0) dt

    by space-time trapezoid quadrature (g = g_h(|u|) or |u|^p).
    """
    grid = u_history.grid
    t, x = grid.t, grid.x
    u = np.asarray(u_history.values)
    c = spec.coeffs
    g = resolve_nonlinearity(c, reg).g(np.abs(u))
    f = spec.f.history(grid).values
    mu = np.asarray(spec.mu.at(t))
    qt = trapezoid_weights(grid.M + 1, grid.dt)
    qx = grid.quadrature
    out = []
    for phi in test_functions:
        phi.validate(grid.T)
        p0 = phi.sample(t, x)
        px = phi.sample(t, x, 0, 1)
        integrand = u * (1j * phi.sample(t, x, 1, 0) - c.a * phi.sample(t, x, 0, 2)
                         + 1j * c.b * px + 1j * phi.sample(t, x, 0, 3))
        integrand = integrand - c.lam * g * u * p0 + 1j * c.beta * g * u * px
        integrand = integrand + 1j * c.gamma * g * (u * px + differentiate(u, grid.dx, 1) * p0) + f * p0
        total = qt @ integrand @ qx
        total += 1j * (u[0] * p0[0]) @ qx
        total += 1j * qt @ (mu * phi.sample(t, np.array([0.0]), 0, 2)[:, 0])
        out.append(abs(total))
    return np.array(out)


# ---------------------------------------------------------------------------
# Interpolation probe
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DampedWave:
    """phi(x) = A e^{-delta x} e^{i omega x}."""

    amplitude: complex
    decay: float
    frequency: float

    def __call__(self, x):
        return self.amplitude * np.exp((-self.decay + 1j * self.frequency) * np.asarray(x, dtype=float))

    def derivative(self, x):
        return (-self.decay + 1j * self.frequency) * self(x)


def damped_wave_family(n: int = 100, seed: int = FIXED_SEED) -> List[DampedWave]:
    rng = np.random.default_rng(seed)
    amp = np.exp(2j * np.pi * rng.random(n)) * rng.uniform(0.5, 2.0, n)
    return [DampedWave(complex(A), float(d), float(w))
            for A, d, w in zip(amp, rng.uniform(1.0, 3.0, n), rng.uniform(0.0, 10.0, n))]


@dataclass(frozen=True)
class InterpolationProbe:
    s: float
    ratios: np.ndarray

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios, initial=0.0))


def interpolation_exponent(q: float) -> float:
    return 0.25 - (0.0 if math.isinf(q) else 1 / (2 * q))


def interpolation_probe(phi_samples: Sequence, psi1: WeightSpec, psi2: WeightSpec, q: float,
                        x_max: float = 40.0, n: int = 4001) -> InterpolationProbe:
    """
    Ratios ||phi psi1^s psi2^(1/2-s)||_q over
    ||(|phi'| + |phi|) psi1^(1/2)||_2^(2s) ||phi psi2^(1/2)||_2^(1-2s), s = 1/4 - 1/(2q).
    """
    if q < 2:
        raise InvalidInputError(f"q must lie in [2, inf], got {q}")
    s = interpolation_exponent(q)
    x = np.linspace(0.0, x_max, n)
    w1, w2 = psi1(x), psi2(x)
    ratios = []
    for phi in phi_samples:
        v = np.asarray(phi(x))
        dv = np.asarray(phi.derivative(x))
        weighted = np.abs(v) * w1**s * w2 ** (0.5 - s)
        lhs = float(np.max(weighted)) if math.isinf(q) else float(trapezoid(weighted**q, x) ** (1 / q))
        a = math.sqrt(trapezoid((np.abs(dv) + np.abs(v)) ** 2 * w1, x))
        b = math.sqrt(trapezoid(np.abs(v) ** 2 * w2, x))
        rhs = a ** (2 * s) * b ** (1 - 2 * s)
        if lhs == 0:
            ratios.append(0.0)
            continue
        if rhs == 0:
            raise NumericalDegeneracyError("interpolation right-hand side vanishes for a nonzero sample")
        ratios.append(lhs / rhs)
    return InterpolationProbe(s, np.array(ratios))


# ---------------------------------------------------------------------------
# Solving and continuous dependence
# ---------------------------------------------------------------------------

def solve_problem(spec: ProblemSpec, reg=None, calibration: Optional[Calibration] = None,
                  tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                  weight: Optional[WeightSpec] = None, guard: bool = True) -> tuple:
    """Build the lifting when mu is nonzero and march; returns (HnlsRun, LiftingPair or None)."""
    lifting = None
    if not spec.mu.is_zero:
        spec.check_boundary_regime()
        lifting = build_lifting(spec.mu, spec.grid, spec.coeffs, calibration)
    run = solve_hnls(spec, reg, lifting, tol, max_iter, weight, guard=guard)
    return run, lifting


def discrete_x_norm(history: GridHistory, w: WeightSpec) -> float:
    """max_n ||u^n||_psi + (sum_n dt ||D u^n||^2_psi')^(1/2)."""
    grid = history.grid
    vals = np.asarray(history.values)
    sup = float(np.max(weighted_norms(vals, grid, w(grid.x))))
    du = differentiate(vals, grid.dx, 1)
    smooth = np.abs(du) ** 2 @ (np.abs(w.derivative(grid.x, 1)) * grid.quadrature)
    return sup + float(np.sqrt(trapezoid_weights(grid.M + 1, grid.dt) @ smooth))


def h13_distance(mu: BoundarySignal, mu_tilde: BoundarySignal) -> float:
    """Fourier H^{1/3}(0, T) distance on the tapered transform window."""
    diff = BoundarySignal(mu.times, np.asarray(mu.values) - np.asarray(mu_tilde.values))
    if diff.is_zero:
        return 0.0
    win = transform_window(diff)
    return float(np.sqrt(win.period * np.sum((1 + win.lam**2) ** (1 / 3) * np.abs(win.spectrum) ** 2)))


def source_distance(f: Source, f_tilde: Source, grid, w: WeightSpec) -> float:
    """||f - f~||_{L1(0,T; L2,psi)}."""
    diff = f.history(grid).values - f_tilde.history(grid).values
    return float(trapezoid_weights(grid.M + 1, grid.dt) @ weighted_norms(diff, grid, w(grid.x)))


@dataclass(frozen=True)
class Perturbation:
    kind: str
    eps: float

    def apply(self, spec: ProblemSpec) -> ProblemSpec:
        grid = spec.grid
        eps, T = self.eps, grid.T
        if self.kind == "u0":
            u0 = GridFunction(grid, spec.u0.values + eps * np.exp(-grid.x))
            return ProblemSpec(spec.coeffs, u0, spec.mu, spec.f)
        if self.kind == "mu":
            base = spec.mu
            func = lambda t: base.at(t) + eps * 0.5 * (1 - np.cos(2 * np.pi * np.asarray(t) / T))
            return ProblemSpec(spec.coeffs, spec.u0, BoundarySignal.from_function(func, grid), spec.f)
        if self.kind == "f":
            base_f = spec.f
            func = lambda t, x: base_f.at(t, grid) + eps * np.cos(t) * np.exp(-(x - 2.0) ** 2)
            return ProblemSpec(spec.coeffs, spec.u0, spec.mu, Source(func))
        raise InvalidInputError(f"unknown perturbation kind '{self.kind}'")


@dataclass(frozen=True)
class PerturbationExperiment:
    kind: str
    eps: float
    data_distance: float
    solution_distance: float
    lifting_ratio: Optional[float] = None

    @property
    def ratio(self) -> float:
        if self.data_distance == 0:
            return 0.0
        return self.solution_distance / self.data_distance

    def as_dict(self) -> dict:
        return {"kind": self.kind, "eps": self.eps, "data_distance": self.data_distance,
                "solution_distance": self.solution_distance, "ratio": self.ratio,
                "lifting_ratio": self.lifting_ratio}


def continuous_dependence_experiment(base: ProblemSpec, perturbations: Sequence[Perturbation],
                                     w: WeightSpec, reg=None, c0: float = 1e-6,
                                     tol: float = DEFAULT_TOL) -> List[PerturbationExperiment]:
    """Solution distance in the discrete X norm over the data distance, per perturbation."""
    p = base.coeffs.p
    if not 1 <= p <= 2:
        raise InvalidInputError(f"continuous dependence is stated for p in [1, 2], got {p}")
    report = check_uniqueness_condition(w, p, weight_samples(base.grid.L), c0)
    if not report.ok:
        raise InvalidInputError(f"weight {w.code} fails the uniqueness condition (inf = {report.inf_value:.3e})")
    grid = base.grid
    calibration = calibrate_lambda0(base.coeffs.a, base.coeffs.b) if any(
        pert.kind == "mu" for pert in perturbations) or not base.mu.is_zero else None
    base_run, base_lift = solve_problem(base, reg, calibration, tol, weight=w)
    rows = []
    for pert in perturbations:
        other = pert.apply(base)
        run, lift = solve_problem(other, reg, calibration, tol, weight=w)
        sol = discrete_x_norm(run.history - base_run.history, w)
        data = float(np.sqrt((np.abs(other.u0.values - base.u0.values) ** 2 * w(grid.x)) @ grid.quadrature))
        data += source_distance(other.f, base.f, grid, w)
        mu_dist = h13_distance(other.mu, base.mu)
        data += mu_dist
        lifting_ratio = None
        if pert.kind == "mu" and mu_dist > 0:
            base_psi = base_lift.Psi0.values if base_lift is not None else 0.0
            diff = GridHistory(grid, lift.Psi0.values - base_psi)
            lifting_ratio = discrete_x_norm(diff, w) / mu_dist
        row = PerturbationExperiment(pert.kind, pert.eps, data, sol, lifting_ratio)
        logger.info("[depend] %s eps=%g ratio=%.4g", pert.kind, pert.eps, row.ratio)
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Weighted budget of the regularized problem and g* identities
# ---------------------------------------------------------------------------

def shifted_arctan(x0: float) -> WeightSpec:
    """rho_0(x - x0) = 1 + (2/pi) arctan(x - x0)."""
    base = WeightSpec.arctan()
    funcs = [lambda x, k=k: base.derivative(np.asarray(x) - x0, k) for k in range(4)]
    return WeightSpec.from_callables(funcs, base.c1, base.c3)


@dataclass(frozen=True)
class BudgetSeries:
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def defect(self) -> np.ndarray:
        return self.lhs - self.rhs


def weighted_energy_budget(u_history: GridHistory, coeffs: Coefficients, rho: WeightSpec, reg=None,
                           f_history: Optional[GridHistory] = None) -> BudgetSeries:
    """
    d/dt int |u|^2 rho against

        -|u_x(0)|^2 rho(0) - 3 int |u_x|^2 rho' + 2a Im int u_x conj(u) rho' + b int |u|^2 rho'
        + int |u|^2 rho''' + 2 Im int f conj(u) rho
        - (beta + 2 gamma) int g*(|u|^2) rho' + 2 (beta + gamma) int g(|u|) |u|^2 rho'

    for homogeneous boundary data.
    """
    grid = u_history.grid
    u = np.asarray(u_history.values)
    x, q = grid.x, grid.quadrature
    r0, r1, r3 = rho(x), rho.derivative(x, 1), rho.derivative(x, 3)
    ux = differentiate(u, grid.dx, 1)
    dens = np.abs(u) ** 2
    lhs = time_derivative(dens @ (r0 * q), grid.dt)
    rhs = -np.abs(ux[:, 0]) ** 2 * r0[0] - 3 * np.abs(ux) ** 2 @ (r1 * q)
    rhs = rhs + 2 * coeffs.a * np.imag((ux * np.conj(u)) @ (r1 * q)) + coeffs.b * dens @ (r1 * q)
    rhs = rhs + dens @ (r3 * q)
    if f_history is not None:
        rhs = rhs + 2 * np.imag((np.asarray(f_history.values) * np.conj(u)) @ (r0 * q))
    if coeffs.beta or coeffs.gamma:
        nl = resolve_nonlinearity(coeffs, reg)
        gs = nl.g_star(dens)
        g = nl.g(np.sqrt(dens))
        rhs = rhs - (coeffs.beta + 2 * coeffs.gamma) * gs @ (r1 * q)
        rhs = rhs + 2 * (coeffs.beta + coeffs.gamma) * (g * dens) @ (r1 * q)
    return BudgetSeries(lhs, np.real(rhs))


def gstar_identity_residuals(u: GridFunction, rho: WeightSpec, p: float, reg=None) -> tuple:
    """
    Defects of
        -2 Im i int (g u)_x conj(u) rho = -int g*(|u|^2) rho' + 2 int g |u|^2 rho'
        -2 Im i int g_x |u|^2 rho      = -2 int g*(|u|^2) rho' + 2 int g |u|^2 rho'
    on one slice vanishing at x = 0.
    """
    grid = u.grid
    v = np.asarray(u.values)
    q = grid.quadrature
    r0, r1 = rho(grid.x), rho.derivative(grid.x, 1)
    nl = reg if reg is not None else resolve_nonlinearity(Coefficients(p=p))
    dens = np.abs(v) ** 2
    g = nl.g(np.abs(v))
    gs_term = nl.g_star(dens) @ (r1 * q)
    g_term = (g * dens) @ (r1 * q)
    beta_lhs = -2 * np.imag(1j * (differentiate(g * v, grid.dx, 1) * np.conj(v)) @ (r0 * q))
    gamma_lhs = -2 * np.imag(1j * (differentiate(g + 0j, grid.dx, 1) * dens) @ (r0 * q))
    return float(beta_lhs - (-gs_term + 2 * g_term)), float(gamma_lhs - (-2 * gs_term + 2 * g_term))


def gstar_chain_rule_defect(reg: RegularizedNonlinearity, theta: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Relative defect of d/dtheta g*(theta^2) = 2 theta g(theta) by centered differences."""
    theta = np.asarray(theta, dtype=float)
    lhs = (reg.g_star((theta + step) ** 2) - reg.g_star((theta - step) ** 2)) / (2 * step)
    rhs = 2 * theta * reg.g(theta)
    return np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300)


# ---------------------------------------------------------------------------
# Regularization sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    h: float
    sup_l2: float
    x_norm: float
    sigma_plus: float
    max_modulus: float
    active_steps: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def regularization_sweep(spec: ProblemSpec, hs: Sequence[float], w: WeightSpec,
                         tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> List[SweepRow]:
    """Uniform-in-h bounds of the regularized solutions with truncated data."""
    if not spec.mu.is_zero:
        raise InvalidInputError("the regularization sweep runs with homogeneous boundary data")
    rows = []
    for h in hs:
        trunc = truncate_data(spec, h)
        run: HnlsRun = solve_hnls(trunc, RegularizedNonlinearity(h, spec.coeffs.p), None, tol, max_iter, w)
        hist = run.history
        grid = hist.grid
        sup = float(np.sqrt(np.max(np.abs(hist.values) ** 2 @ grid.quadrature)))
        ux = GridHistory(grid, differentiate(hist.values, grid.dx, 1))
        rows.append(SweepRow(h, sup, discrete_x_norm(hist, w), sigma_plus(ux).value,
                             float(np.max(np.abs(hist.values))), int(run.regularization_active.sum())))
        logger.info("[sweep] h=%g sup_l2=%.4g x_norm=%.4g", h, sup, rows[-1].x_norm)
    return rows
