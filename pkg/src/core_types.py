"""Core value types: grids, grid functions, admissible weights and norms.

Everything here is an immutable value object after construction, so grids,
weights and histories can be shared read-only between worker processes.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from errors import (
    DomainTooShortError,
    InvalidInputError,
    NotAWeightError,
    TailContaminationError,
)
from stencils import fd_weights, trapezoid_weights

logger = logging.getLogger(__name__)

TAIL_FRACTION = 1e-8


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HalfLineGrid:
    """Uniform space-time grid on [0, L] x [0, T]."""

    L: float
    N: int
    T: float
    M: int

    def __post_init__(self):
        if not (self.L > 0 and self.T > 0):
            raise InvalidInputError(f"L and T must be positive (L={self.L}, T={self.T})")
        if self.N < 8 or self.M < 2:
            raise InvalidInputError(f"need N >= 8 and M >= 2 (N={self.N}, M={self.M})")

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def dt(self) -> float:
        return self.T / self.M

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.N + 1)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.M + 1)

    @property
    def quadrature(self) -> np.ndarray:
        return trapezoid_weights(self.N + 1, self.dx)

    def refined(self, factor: int = 2) -> "HalfLineGrid":
        return HalfLineGrid(self.L, self.N * factor, self.T, self.M * factor)

    def describe(self) -> dict:
        return {"L": self.L, "N": self.N, "T": self.T, "M": self.M, "dx": self.dx, "dt": self.dt}


@dataclass(frozen=True)
class GridFunction:
    """One time slice u(t, .) sampled on the nodes of a grid."""

    grid: HalfLineGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.N + 1,):
            raise InvalidInputError(
                f"grid function has {vals.shape} samples, grid needs {self.grid.N + 1}"
            )
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("grid function contains non-finite samples")
        object.__setattr__(self, "values", _frozen(vals))

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], np.ndarray], grid: HalfLineGrid) -> "GridFunction":
        return cls(grid, np.asarray(func(grid.x), dtype=complex) * np.ones(grid.N + 1))

    @classmethod
    def zeros(cls, grid: HalfLineGrid) -> "GridFunction":
        return cls(grid, np.zeros(grid.N + 1, dtype=complex))


@dataclass(frozen=True)
class GridHistory:
    """Time-indexed stack of slices, shape (M+1, N+1)."""

    grid: HalfLineGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        expected = (self.grid.M + 1, self.grid.N + 1)
        if vals.shape != expected:
            raise InvalidInputError(f"history has shape {vals.shape}, expected {expected}")
        object.__setattr__(self, "values", _frozen(vals))

    def slice(self, n: int) -> GridFunction:
        return GridFunction(self.grid, self.values[n])

    def __sub__(self, other: "GridHistory") -> "GridHistory":
        return GridHistory(self.grid, self.values - other.values)

    def __add__(self, other: "GridHistory") -> "GridHistory":
        return GridHistory(self.grid, self.values + other.values)


@dataclass(frozen=True)
class BoundarySignal:
    """
    Boundary data mu(t) sampled on the time nodes of a grid.

    ``func`` is kept when the signal is known analytically; the lifting uses
    it to extend the signal outside [0, T] before the transform.
    """

    times: np.ndarray
    values: np.ndarray
    func: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != np.shape(self.times):
            raise InvalidInputError("boundary signal times and values differ in length")
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("boundary signal contains non-finite samples")
        object.__setattr__(self, "times", _frozen(np.asarray(self.times, dtype=float)))
        object.__setattr__(self, "values", _frozen(vals))

    @classmethod
    def zero(cls, grid: HalfLineGrid) -> "BoundarySignal":
        return cls(grid.t, np.zeros(grid.M + 1, dtype=complex), lambda t: np.zeros_like(np.asarray(t), dtype=complex))

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], np.ndarray], grid: HalfLineGrid) -> "BoundarySignal":
        t = grid.t
        return cls(t, np.asarray(func(t), dtype=complex) * np.ones_like(t), func)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    def at(self, t):
        if self.func is not None:
            return np.asarray(self.func(np.asarray(t, dtype=float)), dtype=complex)
        return np.interp(t, self.times, self.values.real) + 1j * np.interp(t, self.times, self.values.imag)


class Source:
    """
    Right-hand side f(t, x) of the equation.

    Either a callable ``f(t, x)`` or a sampled history on the grid's time
    nodes (linear interpolation in time in between).
    """

    def __init__(self, func: Optional[Callable[[float, np.ndarray], np.ndarray]] = None,
                 samples: Optional[GridHistory] = None):
        if func is not None and samples is not None:
            raise InvalidInputError("give either a callable source or samples, not both")
        self.func = func
        self.samples = samples

    @classmethod
    def zero(cls) -> "Source":
        return cls()

    @property
    def is_zero(self) -> bool:
        if self.func is None and self.samples is None:
            return True
        return self.samples is not None and not np.any(self.samples.values)

    def at(self, t: float, grid: HalfLineGrid) -> np.ndarray:
        if self.func is not None:
            return np.asarray(self.func(t, grid.x), dtype=complex) * np.ones(grid.N + 1)
        if self.samples is None:
            return np.zeros(grid.N + 1, dtype=complex)
        src = self.samples
        s = np.clip(t / src.grid.dt, 0, src.grid.M)
        n = min(int(math.floor(s)), src.grid.M - 1)
        theta = s - n
        return (1 - theta) * src.values[n] + theta * src.values[n + 1]

    def history(self, grid: HalfLineGrid) -> GridHistory:
        return GridHistory(grid, np.array([self.at(t, grid) for t in grid.t]))

    def time_derivative_at_zero(self, order: int, grid: HalfLineGrid, step: float = 1e-3) -> np.ndarray:
        """d^order f / dt^order at t = 0 by one-sided differences (order 0 returns f(0))."""
        if order == 0 or self.is_zero:
            return self.at(0.0, grid) if order == 0 else np.zeros(grid.N + 1, dtype=complex)
        if self.samples is not None:
            step = self.samples.grid.dt
        offsets = np.arange(order + 4)
        w = fd_weights(offsets, order) / step**order
        return sum(wk * self.at(k * step, grid) for wk, k in zip(w, offsets))


@dataclass(frozen=True)
class Coefficients:
    a: float = 0.0
    b: float = 0.0
    lam: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    p: float = 1.0

    def __post_init__(self):
        if self.p < 1:
            raise InvalidInputError(f"exponent p must be >= 1, got {self.p}")

    @property
    def is_linear(self) -> bool:
        return self.lam == 0 and self.beta == 0 and self.gamma == 0

    def as_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "lambda": self.lam, "beta": self.beta,
                "gamma": self.gamma, "p": self.p}


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients plus data (u0, mu, f) of the initial-boundary value problem."""

    coeffs: Coefficients
    u0: GridFunction
    mu: BoundarySignal
    f: Source = field(default_factory=Source.zero)

    @property
    def grid(self) -> HalfLineGrid:
        return self.u0.grid

    def check_boundary_regime(self) -> None:
        if not self.mu.is_zero and (self.coeffs.p != 1 or self.coeffs.gamma != 0):
            raise InvalidInputError(
                "nonhomogeneous boundary data requires p = 1 and gamma = 0"
            )


# ---------------------------------------------------------------------------
# Admissible weights
# ---------------------------------------------------------------------------

def _falling(alpha2: float, j: int) -> float:
    out = 1.0
    for k in range(j):
        out *= alpha2 - k
    return out


@dataclass(frozen=True)
class WeightSpec:
    """
    An admissible weight psi with analytic derivatives up to order three.

    Kinds: ``exp`` (psi = s*e^{2 alpha x}), ``pow`` (psi = s*(1+x)^{2 alpha}),
    ``arctan`` (rho_0 = 1 + (2/pi) arctan x), ``arctan-prime`` (rho_0'),
    ``one`` and ``custom``.
    """

    kind: str
    alpha: float = 0.0
    scale: float = 1.0
    c1: float = 0.0
    c3: float = 0.0
    custom: Optional[Sequence[Callable]] = field(default=None, compare=False)

    @classmethod
    def exponential(cls, alpha: float) -> "WeightSpec":
        return cls("exp", alpha, 1.0, 2 * abs(alpha), (2 * abs(alpha)) ** 3)

    @classmethod
    def power(cls, alpha: float) -> "WeightSpec":
        a2 = 2 * alpha
        return cls("pow", alpha, 1.0, abs(a2), abs(_falling(a2, 3)))

    @classmethod
    def arctan(cls) -> "WeightSpec":
        return cls("arctan", 0.0, 1.0, 2 / math.pi, 4 / math.pi)

    @classmethod
    def one(cls) -> "WeightSpec":
        return cls("one")

    @classmethod
    def from_callables(cls, funcs: Sequence[Callable], c1: float, c3: float) -> "WeightSpec":
        """``funcs`` = (psi, psi', psi'', psi''')."""
        return cls("custom", c1=c1, c3=c3, custom=tuple(funcs))

    @classmethod
    def parse(cls, code: str) -> "WeightSpec":
        """Parse the config string form: ``exp:ALPHA``, ``pow:ALPHA``, ``arctan``, ``one``."""
        code = code.strip().lower()
        if code == "one":
            return cls.one()
        if code == "arctan":
            return cls.arctan()
        kind, _, value = code.partition(":")
        try:
            alpha = float(value)
        except ValueError:
            raise InvalidInputError(f"bad weight code '{code}'") from None
        if kind == "exp":
            return cls.exponential(alpha)
        if kind == "pow":
            return cls.power(alpha)
        raise InvalidInputError(f"unknown weight kind '{kind}'")

    @property
    def code(self) -> str:
        if self.kind in ("exp", "pow"):
            return f"{self.kind}:{self.alpha:g}"
        return self.kind

    def derivative(self, x: np.ndarray, order: int = 0) -> np.ndarray:
        """psi^(order)(x) for order in 0..3."""
        x = np.asarray(x, dtype=float)
        if self.kind == "exp":
            base = np.exp(2 * self.alpha * x)
            return self.scale * (2 * self.alpha) ** order * base
        if self.kind == "pow":
            a2 = 2 * self.alpha
            return self.scale * _falling(a2, order) * (1 + x) ** (a2 - order)
        if self.kind == "arctan":
            c = 2 / math.pi
            q = 1 + x**2
            return [1 + c * np.arctan(x), c / q, -2 * c * x / q**2, c * (6 * x**2 - 2) / q**3][order]
        if self.kind == "arctan-prime":
            c = 2 / math.pi
            q = 1 + x**2
            return [c / q, -2 * c * x / q**2, c * (6 * x**2 - 2) / q**3,
                    24 * c * x * (1 - x**2) / q**4][order]
        if self.kind == "one":
            return np.ones_like(x) if order == 0 else np.zeros_like(x)
        if self.kind == "custom":
            return np.asarray(self.custom[order](x), dtype=float) * np.ones_like(x)
        raise InvalidInputError(f"unknown weight kind '{self.kind}'")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.derivative(x, 0)

    def prime_weight(self) -> "WeightSpec":
        """The weight psi' (admissible for exp/pow with alpha > 0 and for arctan)."""
        if self.kind == "exp":
            s = self.scale * 2 * self.alpha
            return WeightSpec("exp", self.alpha, s, self.c1, self.c3)
        if self.kind == "pow":
            a_new = self.alpha - 0.5
            return WeightSpec("pow", a_new, self.scale * 2 * self.alpha,
                              abs(2 * a_new), abs(_falling(2 * a_new, 3)))
        if self.kind == "arctan":
            return WeightSpec("arctan-prime", c1=1.0, c3=5.3)
        raise InvalidInputError(f"psi' of weight '{self.code}' is not an admissible weight")


@dataclass(frozen=True)
class SigmaPlusValue:
    value: float
    x0: float

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class AdmissibilityReport:
    ok: bool
    constants: List[float]
    growth_ok: bool


@dataclass(frozen=True)
class UniquenessReport:
    ok: bool
    inf_value: float


def weight_samples(L: float, n: int = 200) -> np.ndarray:
    """Zero plus a log-spaced sample set up to ``L``."""
    return np.concatenate([[0.0], np.logspace(-3, math.log10(L), n)])


def _weight_values(w: WeightSpec, x: np.ndarray) -> np.ndarray:
    psi = w(x)
    if np.any(~np.isfinite(psi)) or np.any(psi <= 0):
        bad = x[np.argmax((psi <= 0) | ~np.isfinite(psi))]
        raise NotAWeightError(f"weight {w.code} is not positive at x={bad:g}")
    return psi


def weighted_l2_norm(u: GridFunction, w: WeightSpec) -> float:
    """Trapezoidal (sum |u_j|^2 psi(x_j) q_j)^(1/2)."""
    vals = np.asarray(u.values)
    if not np.all(np.isfinite(vals)):
        raise InvalidInputError("non-finite samples in weighted norm")
    psi = w(u.grid.x)
    return float(np.sqrt(np.sum(np.abs(vals) ** 2 * psi * u.grid.quadrature)))


def weighted_norms(values: np.ndarray, grid: HalfLineGrid, psi_values: np.ndarray) -> np.ndarray:
    """Row-wise weighted L2 norms of a (..., N+1) array with precomputed weight samples."""
    return np.sqrt(np.abs(values) ** 2 @ (psi_values * grid.quadrature))


def sigma_plus(u_history: GridHistory) -> SigmaPlusValue:
    """
    Local-smoothing functional: the largest space-time L2 norm of u over
    unit windows [x0, x0+1] x [0, T], x0 running over grid nodes.
    """
    grid = u_history.grid
    if grid.L < 1:
        raise DomainTooShortError(f"sigma_plus needs L >= 1, got L={grid.L}")
    dens = np.abs(u_history.values) ** 2
    time_integrated = dens.T @ trapezoid_weights(grid.M + 1, grid.dt)
    cum = cumulative_trapezoid(time_integrated, grid.x, initial=0.0)
    x = grid.x
    starts = x[x + 1.0 <= grid.L * (1 + 1e-12)]
    window = np.interp(starts + 1.0, x, cum) - np.interp(starts, x, cum)
    k = int(np.argmax(window))
    return SigmaPlusValue(float(np.sqrt(max(window[k], 0.0))), float(starts[k]))


def check_admissible(w: WeightSpec, orders: Sequence[int], x_samples: Sequence[float]) -> AdmissibilityReport:
    """Compare max |psi^(j)|/psi over the samples with the declared c(j)."""
    x = np.asarray(x_samples, dtype=float)
    psi = _weight_values(w, x)
    declared = {1: w.c1, 3: w.c3}
    constants, ok = [], True
    for j in orders:
        ratio = float(np.max(np.abs(w.derivative(x, j)) / psi))
        constants.append(ratio)
        if j in declared and ratio > declared[j] * (1 + 1e-10) + 1e-14:
            ok = False
    growth_ok = bool(np.all(psi <= psi[np.argmin(x)] * np.exp(w.c1 * (x - x.min())) * (1 + 1e-10)))
    return AdmissibilityReport(ok and growth_ok, constants, growth_ok)


def check_uniqueness_condition(w: WeightSpec, p: float, x_samples: Sequence[float],
                               c0: float = 1e-6) -> UniquenessReport:
    """inf over samples of (psi')^(p+2) psi^(p-2), compared with the threshold c0."""
    if not 1 <= p <= 2:
        raise InvalidInputError(f"uniqueness condition is stated for p in [1, 2], got {p}")
    x = np.asarray(x_samples, dtype=float)
    psi = _weight_values(w, x)
    dpsi = w.derivative(x, 1)
    values = np.abs(dpsi) ** (p + 2) * psi ** (p - 2) * np.where(dpsi > 0, 1.0, 0.0)
    inf_value = float(np.min(values))
    return UniquenessReport(inf_value >= c0, inf_value)


def power_weight_threshold(p: float) -> float:
    """Smallest alpha for which (1+x)^{2 alpha} meets the uniqueness condition."""
    return (p + 2) / (4 * p)


def tail_mass_guard(u: GridFunction) -> None:
    """Raise when the mass on [L-1, L] exceeds 1e-8 of the total."""
    grid = u.grid
    dens = np.abs(u.values) ** 2
    total = float(dens @ grid.quadrature)
    if total == 0.0:
        return
    mask = grid.x >= grid.L - 1.0
    tail = float(trapezoid(dens[mask], grid.x[mask])) if mask.sum() > 1 else 0.0
    if tail > TAIL_FRACTION * total:
        logger.warning("[guard] tail mass %.3e vs total %.3e", tail, total)
        raise TailContaminationError(tail, total)
