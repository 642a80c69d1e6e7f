"""
Boundary potential J+ and the lifting pair (Psi0, F0).

For a frequency lam the cubic r^3 - i a r^2 + b r + i lam = 0 has, above a
cutoff lam0, exactly one root r0 with negative real part; e^{i lam t} e^{r0 x}
then solves u_t - i a u_xx + b u_x + u_xxx = 0 with boundary value e^{i lam t}.
J+ is the superposition of these modes over the high-frequency part of mu.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from core_types import BoundarySignal, Coefficients, GridHistory, HalfLineGrid
from errors import (
    BelowCutoffError,
    CalibrationFailedError,
    InvalidInputError,
    SplittingViolationError,
)
from nonlinearity import cutoff
from stencils import differentiate, time_derivative, trapezoid_weights

logger = logging.getLogger(__name__)

SUPPORT_EDGE = 2.0
TAPER_FRACTION = 0.1
EPS_SAFETY = 1e-9


@dataclass(frozen=True)
class CharacteristicRoot:
    lam: float
    r0: complex
    eps: float
    residual: float


@dataclass(frozen=True)
class Calibration:
    a: float
    b: float
    lambda0: float
    eps: float

    def as_dict(self) -> Dict[str, float]:
        return {"a": self.a, "b": self.b, "lambda0": self.lambda0, "eps": self.eps}


def _cubic(r, lam, a, b):
    return r**3 - 1j * a * r**2 + b * r + 1j * lam


def find_root(lam: float, a: float, b: float) -> CharacteristicRoot:
    """The unique root of r^3 - i a r^2 + b r + i lam = 0 with Re r < 0."""
    if lam == 0:
        raise InvalidInputError("characteristic root needs lambda != 0")
    roots = np.roots([1.0, -1j * a, b, 1j * lam])
    for _ in range(3):
        roots = roots - _cubic(roots, lam, a, b) / (3 * roots**2 - 2j * a * roots + b)
    scale = abs(lam) ** (1 / 3)
    negative = roots[roots.real < -1e-12 * max(1.0, scale)]
    if negative.size != 1:
        raise BelowCutoffError(lam, int(negative.size))
    r0 = complex(negative[0])
    return CharacteristicRoot(lam, r0, -r0.real / (2 * scale), float(abs(_cubic(r0, lam, a, b))))


def calibrate_lambda0(a: float, b: float, lam_max: float = 1e6, n_grid: int = 1000) -> Calibration:
    """
    Smallest lam0 >= 1 on a log grid of |lam| in [1, lam_max] (both signs) above
    which every root is found, and the decay margin eps with
    Re r0 <= -2 eps |lam|^(1/3) over the validated range.
    """
    grid = np.logspace(0.0, math.log10(lam_max), n_grid)
    kappa = np.full(n_grid, np.nan)
    for i, mag in enumerate(grid):
        try:
            k_plus = -find_root(mag, a, b).r0.real / mag ** (1 / 3)
            k_minus = -find_root(-mag, a, b).r0.real / mag ** (1 / 3)
        except BelowCutoffError:
            continue
        kappa[i] = min(k_plus, k_minus)
    failed = np.flatnonzero(np.isnan(kappa))
    if failed.size and failed[-1] == n_grid - 1:
        raise CalibrationFailedError(f"no cutoff found for a={a}, b={b} up to |lambda|={lam_max:g}")
    start = failed[-1] + 1 if failed.size else 0
    eps = 0.5 * float(np.min(kappa[start:])) * (1 - EPS_SAFETY)
    result = Calibration(a, b, float(grid[start]), eps)
    logger.info("[calibrate] %s", result.as_dict())
    return result


# ---------------------------------------------------------------------------
# Transform window and frequency splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SignalWindow:
    """
    Periodic extension of a boundary signal: ``offset`` samples are added on
    each side of [0, T] and the ends are tapered to a common level unless the
    extension is already periodic.
    """

    dt: float
    offset: int
    n_inner: int
    values: np.ndarray
    lam: np.ndarray
    spectrum: np.ndarray

    @property
    def start(self) -> float:
        return -self.offset * self.dt

    @property
    def period(self) -> float:
        return self.values.size * self.dt

    def inner(self, samples: np.ndarray) -> np.ndarray:
        return samples[..., self.offset: self.offset + self.n_inner]

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Window samples of sum_k coeffs_k e^{i lam_k (t - start)}."""
        return np.fft.ifft(coeffs * self.values.size, axis=-1)


def window_length(n_inner: int) -> int:
    return 2 * (n_inner // 2 + 1) + n_inner


def transform_window(mu: BoundarySignal) -> SignalWindow:
    times = np.asarray(mu.times)
    n_inner = times.size
    dt = float(times[1] - times[0])
    offset = n_inner // 2 + 1
    n = n_inner + 2 * offset
    t = (np.arange(n) - offset) * dt
    if mu.func is not None:
        ext = np.asarray(mu.at(t), dtype=complex) * np.ones(n)
        periodic = np.asarray(mu.at(t[:4] + n * dt), dtype=complex)
        scale = max(1.0, float(np.max(np.abs(ext))))
        if np.max(np.abs(periodic - ext[:4])) < 1e-12 * scale:
            spectrum = np.fft.fft(ext) / n
            return SignalWindow(dt, offset, n_inner, ext, 2 * np.pi * np.fft.fftfreq(n, dt), spectrum)
    else:
        vals = np.asarray(mu.values)
        ext = np.concatenate([np.full(offset, vals[0]), vals, np.full(offset, vals[-1])])
    level = 0.5 * (ext[0] + ext[-1])
    frac = np.arange(n) / (n - 1)
    eta = cutoff()
    taper = eta(frac / TAPER_FRACTION) * eta((1 - frac) / TAPER_FRACTION)
    ext = level + (ext - level) * taper
    return SignalWindow(dt, offset, n_inner, ext, 2 * np.pi * np.fft.fftfreq(n, dt), np.fft.fft(ext) / n)


@dataclass(frozen=True)
class FrequencySplit:
    lambda0: float
    mu0: BoundarySignal
    mu1: BoundarySignal
    window: SignalWindow = field(repr=False)
    high: np.ndarray = field(repr=False)

    @property
    def low_spectrum(self) -> np.ndarray:
        return np.where(self.high, 0.0, self.window.spectrum)

    @property
    def high_spectrum(self) -> np.ndarray:
        return np.where(self.high, self.window.spectrum, 0.0)


def split_frequencies(mu: BoundarySignal, lambda0: float) -> FrequencySplit:
    """mu = mu0 + mu1 with the spectrum of mu0 inside (-lambda0, lambda0)."""
    win = transform_window(mu)
    high = np.abs(win.lam) >= lambda0
    low_part = win.inner(win.synthesize(np.where(high, 0.0, win.spectrum)))
    high_part = win.inner(win.synthesize(np.where(high, win.spectrum, 0.0)))
    split = FrequencySplit(lambda0, BoundarySignal(mu.times, low_part),
                           BoundarySignal(mu.times, high_part), win, high)
    recon = np.max(np.abs(low_part + high_part - np.asarray(mu.values)), initial=0.0)
    if recon > 1e-10 * max(1.0, float(np.max(np.abs(mu.values), initial=0.0))):
        raise SplittingViolationError(f"mu0 + mu1 misses mu by {recon:.3e}")
    return split


# ---------------------------------------------------------------------------
# J+ and the lifting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PotentialModes:
    """Nonzero high-frequency modes of J+: window index, coefficient, frequency and root."""

    index: np.ndarray
    coeffs: np.ndarray
    lam: np.ndarray
    roots: np.ndarray
    window: SignalWindow = field(repr=False)


def potential_modes(split: FrequencySplit, coeffs: Coefficients) -> PotentialModes:
    win = split.window
    amp = split.high_spectrum
    idx = np.flatnonzero(split.high & (amp != 0))
    roots = np.empty(idx.size, dtype=complex)
    for j, k in enumerate(idx):
        try:
            roots[j] = find_root(float(win.lam[k]), coeffs.a, coeffs.b).r0
        except BelowCutoffError as e:
            raise SplittingViolationError(
                f"mode lambda={win.lam[k]:g} of mu1 lies below the cutoff {split.lambda0:g}"
            ) from e
    return PotentialModes(idx, amp[idx], win.lam[idx], roots, win)


def _synthesize_modes(modes: PotentialModes, x: np.ndarray, x_order: int = 0, t_order: int = 0) -> np.ndarray:
    """d_t^t_order d_x^x_order J+ on the inner times (rows) and nodes ``x`` (columns)."""
    win = modes.window
    n = win.values.size
    out = np.zeros((win.n_inner, x.size), dtype=complex)
    if modes.coeffs.size == 0:
        return out
    full = np.zeros(n, dtype=complex)
    factor = modes.coeffs * (1j * modes.lam) ** t_order * modes.roots**x_order
    for j, xv in enumerate(x):
        full[modes.index] = factor * np.exp(modes.roots * xv)
        out[:, j] = win.inner(win.synthesize(full))
    return out


def build_J_plus(split: FrequencySplit, grid: HalfLineGrid, coeffs: Coefficients) -> GridHistory:
    """J+ on the grid (zero for x > 2, where the lifting cuts it off)."""
    modes = potential_modes(split, coeffs)
    values = np.zeros((grid.M + 1, grid.N + 1), dtype=complex)
    near = grid.x <= SUPPORT_EDGE
    values[:, near] = _synthesize_modes(modes, grid.x[near])
    return GridHistory(grid, values)


def j_plus_residual(split: FrequencySplit, coeffs: Coefficients, x: np.ndarray) -> np.ndarray:
    """J_t - i a J_xx + b J_x + J_xxx at the inner times and nodes ``x``."""
    modes = potential_modes(split, coeffs)
    x = np.asarray(x, dtype=float)
    return (_synthesize_modes(modes, x, 0, 1) - 1j * coeffs.a * _synthesize_modes(modes, x, 2)
            + coeffs.b * _synthesize_modes(modes, x, 1) + _synthesize_modes(modes, x, 3))


@dataclass(frozen=True)
class LiftingPair:
    Psi0: GridHistory
    F0: GridHistory
    split: Optional[FrequencySplit] = field(default=None, repr=False)

    def sup_l2(self) -> float:
        """max_t ||Psi0(t)||_{L2}."""
        q = self.Psi0.grid.quadrature
        return float(np.sqrt(np.max(np.abs(self.Psi0.values) ** 2 @ q)))

    def trace_norms(self) -> np.ndarray:
        """||Psi0_x(., x)||_{L2(0,T)} for every node x."""
        grid = self.Psi0.grid
        dpsi = differentiate(self.Psi0.values, grid.dx, 1)
        return np.sqrt(trapezoid_weights(grid.M + 1, grid.dt) @ np.abs(dpsi) ** 2)


def build_lifting(mu: BoundarySignal, grid: HalfLineGrid, coeffs: Coefficients,
                  calibration: Optional[Calibration] = None) -> LiftingPair:
    """
    Psi0 = [mu0 + J+(mu1)] eta(2 - x) and
    F0 = i Psi0_t + a Psi0_xx + i b Psi0_x + i Psi0_xxx, with spectral time
    derivatives and exact x-derivatives of both factors.
    """
    zeros = GridHistory(grid, np.zeros((grid.M + 1, grid.N + 1), dtype=complex))
    if mu.is_zero:
        return LiftingPair(zeros, zeros)
    if np.shape(mu.times) != (grid.M + 1,):
        raise InvalidInputError("boundary signal must be sampled on the grid's time nodes")
    calibration = calibration or calibrate_lambda0(coeffs.a, coeffs.b)
    split = split_frequencies(mu, calibration.lambda0)
    win = split.window
    modes = potential_modes(split, coeffs)

    near = grid.x <= SUPPORT_EDGE
    x = grid.x[near]
    eta = cutoff()
    cut = [eta(2.0 - x), -eta.derivative(2.0 - x, 1), eta.derivative(2.0 - x, 2), -eta.derivative(2.0 - x, 3)]

    low = split.low_spectrum
    mu0 = win.inner(win.synthesize(low))[:, None]
    mu0_t = win.inner(win.synthesize(1j * win.lam * low))[:, None]
    S = [_synthesize_modes(modes, x, k) for k in range(4)]
    S[0] = S[0] + mu0
    S_t = mu0_t + _synthesize_modes(modes, x, 0, 1)

    psi = S[0] * cut[0]
    psi_t = S_t * cut[0]
    psi_x = S[1] * cut[0] + S[0] * cut[1]
    psi_xx = S[2] * cut[0] + 2 * S[1] * cut[1] + S[0] * cut[2]
    psi_xxx = S[3] * cut[0] + 3 * S[2] * cut[1] + 3 * S[1] * cut[2] + S[0] * cut[3]
    f0 = 1j * psi_t + coeffs.a * psi_xx + 1j * coeffs.b * psi_x + 1j * psi_xxx

    Psi0 = np.zeros((grid.M + 1, grid.N + 1), dtype=complex)
    F0 = np.zeros_like(Psi0)
    Psi0[:, near] = psi
    F0[:, near] = f0
    mismatch = float(np.max(np.abs(Psi0[:, 0] - np.asarray(mu.values))))
    if mismatch > 1e-8 * max(1.0, float(np.max(np.abs(mu.values)))):
        raise SplittingViolationError(f"Psi0(t, 0) misses mu by {mismatch:.3e}")
    logger.info("[lifting] lambda0=%g, %d high modes, trace mismatch %.2e",
                calibration.lambda0, modes.coeffs.size, mismatch)
    return LiftingPair(GridHistory(grid, Psi0), GridHistory(grid, F0), split)


@dataclass(frozen=True)
class AdjointLifting:
    Psi: GridHistory
    F: GridHistory


def adjoint_lifting(mu0: BoundarySignal, mu1: BoundarySignal, grid: HalfLineGrid,
                    coeffs: Coefficients) -> AdjointLifting:
    """
    Psi = mu0(t) eta(1 - x) + mu1(t) x eta(1 - x), matching v(t,0) = mu0 and
    v_x(t,0) = mu1, with F = -(i Psi_t + a Psi_xx - i b Psi_x - i Psi_xxx),
    the source seen by V = v - Psi in the adjoint problem.
    """
    x = grid.x
    eta = cutoff()
    s = 1.0 - x
    e = [eta(s), -eta.derivative(s, 1), eta.derivative(s, 2), -eta.derivative(s, 3)]
    # x eta(1 - x) and its derivatives
    xe = [x * e[0], e[0] + x * e[1], 2 * e[1] + x * e[2], 3 * e[2] + x * e[3]]
    m0 = np.asarray(mu0.values)[:, None]
    m1 = np.asarray(mu1.values)[:, None]
    m0_t = time_derivative(np.asarray(mu0.values), grid.dt)[:, None]
    m1_t = time_derivative(np.asarray(mu1.values), grid.dt)[:, None]
    psi = [m0 * e[k] + m1 * xe[k] for k in range(4)]
    psi_t = m0_t * e[0] + m1_t * xe[0]
    F = -(1j * psi_t + coeffs.a * psi[2] - 1j * coeffs.b * psi[1] - 1j * psi[3])
    return AdjointLifting(GridHistory(grid, psi[0]), GridHistory(grid, F))
