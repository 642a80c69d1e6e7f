import numpy as np
import pytest

from core_types import (
    BoundarySignal,
    Coefficients,
    GridFunction,
    GridHistory,
    HalfLineGrid,
    ProblemSpec,
    Source,
    WeightSpec,
)
from errors import AccuracyError, ResolutionError
from linear_halfline import (
    assemble_step_operator,
    compatibility_chain,
    dispersion,
    energy_identity_residual,
    fourier_oracle_fullline,
    fullline_linear_solution,
    linear_step,
    periodic_box,
    solve_linear,
    spectral_tail_fraction,
)


def gaussian(center, width=1.0):
    return lambda x: np.exp(-(((x - center) / width) ** 2)) + 0j


def spec_for(grid, u0, a=1.0, b=0.0, mu=None, f=None):
    return ProblemSpec(Coefficients(a=a, b=b), GridFunction.from_function(u0, grid),
                       mu or BoundarySignal.zero(grid), f or Source.zero())


def test_zero_data_gives_zero_solution():
    grid = HalfLineGrid(10.0, 80, 0.5, 10)
    history = solve_linear(spec_for(grid, lambda x: 0 * x))
    assert not np.any(history.values)


def test_boundary_rows_are_imposed_exactly():
    grid = HalfLineGrid(10.0, 100, 1.0, 20)
    mu = BoundarySignal.from_function(lambda t: np.sin(3 * t) + 0.5j * t, grid)
    history = solve_linear(spec_for(grid, lambda x: 0 * x, mu=mu))
    np.testing.assert_allclose(history.values[:, 0], mu.values, atol=1e-13)
    np.testing.assert_allclose(history.values[:, -1], 0.0, atol=1e-13)


def test_single_step_matches_operator_form():
    grid = HalfLineGrid(10.0, 100, 0.1, 4)
    op = assemble_step_operator(grid, 1.0, 0.5)
    u0 = gaussian(5.0)(grid.x)
    u1 = linear_step(op, u0, np.zeros_like(u0), 0.0)
    # interior rows satisfy the Crank-Nicolson relation
    lhs = u1 - 0.5 * grid.dt * (op.generator @ u1)
    rhs = u0 + 0.5 * grid.dt * (op.generator @ u0)
    np.testing.assert_allclose(lhs[1:-2], rhs[1:-2], atol=1e-12)


def test_dispersion_relation():
    xi = np.array([-1.0, 0.0, 2.0])
    np.testing.assert_allclose(dispersion(xi, 1.0, 2.0), xi**3 - xi**2 - 2 * xi)


def test_spectral_tail_fraction():
    n = 256
    mode = np.zeros(n, dtype=complex)
    mode[3] = 1.0
    assert spectral_tail_fraction(mode) == 0.0
    # flat spectrum: the outer n // 20 modes on each side
    assert spectral_tail_fraction(np.ones(n)) == pytest.approx(2 * (n // 20) / n)


def test_fourier_oracle_conserves_mass():
    grid = HalfLineGrid(20.0, 256, 1.0, 10)
    x, xi = periodic_box(grid)
    u0_hat = np.fft.fft(gaussian(0.0)(x))
    mass0 = np.sum(np.abs(u0_hat) ** 2)
    for t in np.linspace(0.0, 1.0, 5):
        mass = np.sum(np.abs(fourier_oracle_fullline(u0_hat, xi, t, 1.0, 0.0)) ** 2)
        assert abs(mass - mass0) / mass0 < 1e-10


def test_fourier_oracle_refuses_unresolved_data():
    rng = np.random.default_rng(0)
    noise = rng.standard_normal(128) + 0j
    xi = 2 * np.pi * np.fft.fftfreq(128, d=0.1)
    with pytest.raises(ResolutionError):
        fourier_oracle_fullline(np.fft.fft(noise), xi, 0.1, 1.0, 0.0)


def test_duhamel_term_of_constant_forcing():
    xi = 2 * np.pi * np.fft.fftfreq(64, d=0.5)
    u0_hat = np.zeros(64, dtype=complex)
    u0_hat[0] = 1.0
    times = np.linspace(0.0, 1.0, 2001)
    f_hat = np.zeros((times.size, 64), dtype=complex)
    f_hat[:, 0] = 1.0
    out = fourier_oracle_fullline(u0_hat, xi, 1.0, 0.0, 0.0, f_hat, times)
    # xi = 0 mode: w' = -i f
    assert out[0] == pytest.approx(1.0 - 1j, abs=1e-12)


def test_compatibility_chain_for_interior_data():
    grid = HalfLineGrid(20.0, 400, 1.0, 10)
    chain = compatibility_chain(spec_for(grid, gaussian(8.0)), 2)
    assert len(chain.Phi) == 3
    assert max(chain.mismatches) < 1e-10


def test_compatibility_chain_detects_corner_mismatch():
    grid = HalfLineGrid(20.0, 400, 1.0, 10)
    mu = BoundarySignal.from_function(lambda t: 1.0 + 0 * t, grid)
    chain = compatibility_chain(spec_for(grid, lambda x: 0 * x, mu=mu), 0)
    assert chain.mismatches[0] == pytest.approx(1.0)


def test_compatibility_chain_needs_resolution_at_high_order():
    grid = HalfLineGrid(2.0, 10, 1.0, 4)
    with pytest.raises(AccuracyError):
        compatibility_chain(spec_for(grid, gaussian(1.0)), 3)


def test_half_line_solution_converges_to_whole_line_oracle():
    # interior data: the boundary sees only exponentially small values up to T
    errors = []
    for N, M in ((400, 40), (800, 80)):
        grid = HalfLineGrid(20.0, N, 0.1, M)
        history = solve_linear(spec_for(grid, gaussian(10.0)))
        ref = fullline_linear_solution(gaussian(10.0), grid, grid.T, 1.0, 0.0)
        errors.append(np.sqrt(np.abs(history.values[-1] - ref) ** 2 @ grid.quadrature))
    assert errors[0] / errors[1] > 3.0


def test_weighted_identity_residual_decreases_under_refinement():
    w = WeightSpec.exponential(0.25)
    peaks = []
    for N, M in ((320, 40), (640, 80)):
        grid = HalfLineGrid(16.0, N, 0.2, M)
        history = solve_linear(spec_for(grid, gaussian(4.0)))
        peaks.append(np.max(np.abs(energy_identity_residual(history, 1.0, 0.0, w))))
    assert peaks[1] < peaks[0] / 2.5


def test_identity_residual_vanishes_for_zero_history():
    grid = HalfLineGrid(5.0, 40, 0.5, 5)
    zero = GridHistory(grid, np.zeros((grid.M + 1, grid.N + 1)))
    assert not np.any(energy_identity_residual(zero, 1.0, 1.0, WeightSpec.one()))
