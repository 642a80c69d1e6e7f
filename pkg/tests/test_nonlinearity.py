import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core_types import (
    BoundarySignal,
    Coefficients,
    GridFunction,
    HalfLineGrid,
    ProblemSpec,
    Source,
)
from diagnostics import mass_drift
from errors import ContractionFailureError, InvalidInputError
from boundary_potential import build_lifting
from linear_halfline import solve_linear
from nonlinearity import (
    PowerNonlinearity,
    RegularizedNonlinearity,
    cutoff,
    eta,
    fullline_hnls_run,
    g_h,
    g_h_prime,
    g_star,
    nonlinear_apply,
    nonlinear_terms,
    solve_hnls,
    truncate_data,
)


def small_problem(coeffs, amplitude=1.0, N=200, M=50, T=0.5, L=20.0):
    grid = HalfLineGrid(L, N, T, M)
    u0 = GridFunction.from_function(lambda x: amplitude * np.exp(-((x - 8.0) ** 2)) + 0j, grid)
    return ProblemSpec(coeffs, u0, BoundarySignal.zero(grid), Source.zero())


def test_cutoff_endpoints_and_midpoint():
    assert eta(0.0) == 0.0
    assert eta(1.0) == 1.0
    assert eta(0.5) == pytest.approx(0.5, abs=1e-14)
    np.testing.assert_array_equal(eta(np.array([-3.0, -0.1, 1.2, 7.0])), [0.0, 0.0, 1.0, 1.0])


@given(st.floats(min_value=-1.0, max_value=2.0))
def test_cutoff_antisymmetry(x):
    assert eta(x) + eta(1.0 - x) == pytest.approx(1.0, abs=1e-12)


def test_cutoff_is_nondecreasing():
    values = eta(np.linspace(-0.5, 1.5, 2001))
    assert np.all(np.diff(values) >= -1e-12)


def test_cutoff_derivatives_match_differences():
    c = cutoff()
    x = np.linspace(0.2, 0.8, 13)
    step = 1e-5
    for order in (1, 2):
        numeric = (c.derivative(x + step, order - 1) - c.derivative(x - step, order - 1)) / (2 * step)
        np.testing.assert_allclose(c.derivative(x, order), numeric, rtol=1e-5, atol=1e-7)
    with pytest.raises(InvalidInputError):
        c.derivative(x, 4)


def test_regularized_power_values():
    assert g_h(0.5, 1.0, 1.0) == pytest.approx(0.5)
    # constant beyond 2/h: h^-p (1 + int_0^1 (1 - eta)) = 1.5
    assert g_h(5.0, 1.0, 1.0) == pytest.approx(1.5, abs=1e-10)
    assert g_h(5.0, 1.0, 1.0) <= 2.0
    assert g_h(3.0, 1.0, 1.0) == pytest.approx(g_h(50.0, 1.0, 1.0))


@given(st.floats(min_value=0.0, max_value=100.0),
       st.floats(min_value=0.05, max_value=1.0),
       st.sampled_from([1.0, 1.5, 2.0, 3.0]))
@settings(max_examples=60, deadline=None)
def test_regularized_power_bounds(theta, h, p):
    value = g_h(theta, h, p)
    assert 0.0 <= value <= (2.0 / h) ** p * (1 + 1e-12)
    if theta <= 1.0 / h:
        assert value == pytest.approx(theta**p, rel=1e-12, abs=1e-300)


def test_regularized_derivative_matches_differences():
    theta = np.linspace(0.1, 4.5, 23)
    step = 1e-6
    numeric = (g_h(theta + step, 0.5, 1.5) - g_h(theta - step, 0.5, 1.5)) / (2 * step)
    np.testing.assert_allclose(g_h_prime(theta, 0.5, 1.5), numeric, rtol=1e-5, atol=1e-6)


def test_g_star_below_threshold_is_explicit():
    theta = np.array([0.0, 0.5, 2.0, 4.0])
    np.testing.assert_allclose(g_star(theta, 0.5, 2.0), theta**2 / 2)


def test_g_star_chain_rule_above_threshold():
    reg = RegularizedNonlinearity(0.5, 1.5)
    z = np.array([1.5, 2.5, 3.5, 4.5, 6.0])
    step = 1e-5
    lhs = (reg.g_star((z + step) ** 2) - reg.g_star((z - step) ** 2)) / (2 * step)
    np.testing.assert_allclose(lhs, 2 * z * reg.g(z), rtol=1e-5)


def test_regularization_parameter_range():
    with pytest.raises(InvalidInputError):
        RegularizedNonlinearity(2.0, 1.0)
    with pytest.raises(InvalidInputError):
        RegularizedNonlinearity(0.5, 0.5)


def test_power_nonlinearity_is_never_active():
    assert not PowerNonlinearity(2.0).is_active(np.array([1e6]))
    assert RegularizedNonlinearity(0.5, 2.0).is_active(np.array([3.0]))


def test_nonlinear_terms_vanish_for_linear_coefficients():
    u = np.exp(1j * np.linspace(0, 1, 11))
    assert not np.any(nonlinear_terms(u, Coefficients(a=1.0), dx=0.1))


def test_cubic_term_only():
    u = np.linspace(0.0, 2.0, 9) * np.exp(0.3j)
    out = nonlinear_terms(u, Coefficients(lam=2.0, p=2.0), dx=0.25)
    np.testing.assert_allclose(out, 2.0 * np.abs(u) ** 2 * u)


def test_transport_terms_vanish_on_constants():
    u = np.full(16, 0.7 + 0.2j)
    out = nonlinear_terms(u, Coefficients(beta=1.0, gamma=2.0, p=1.0), dx=0.1)
    np.testing.assert_allclose(out, 0.0, atol=1e-12)


def test_nonlinear_apply_keeps_the_grid():
    grid = HalfLineGrid(4.0, 40, 1.0, 4)
    u = GridFunction.from_function(lambda x: np.exp(-(x**2)) * (1 + 0.5j), grid)
    coeffs = Coefficients(lam=1.0, beta=0.5, p=1.0)
    out = nonlinear_apply(u, coeffs)
    assert out.grid is grid
    np.testing.assert_allclose(out.values, nonlinear_terms(u.values, coeffs, dx=grid.dx))


def test_truncated_data_vanish_beyond_one_over_h():
    spec = small_problem(Coefficients(lam=1.0), L=20.0)
    trunc = truncate_data(spec, 0.25)
    x = spec.grid.x
    assert not np.any(trunc.u0.values[x >= 4.0])
    np.testing.assert_allclose(trunc.u0.values[x <= 3.0], spec.u0.values[x <= 3.0])


def test_linear_coefficients_reproduce_linear_solver():
    spec = small_problem(Coefficients(a=1.0, b=0.5))
    run = solve_hnls(spec)
    np.testing.assert_allclose(run.history.values, solve_linear(spec).values, atol=1e-13)
    assert run.max_iterations == 2


def test_lifted_run_reproduces_the_unlifted_scheme():
    grid = HalfLineGrid(20.0, 200, 0.5, 50)
    coeffs = Coefficients(a=1.0, b=0.5)
    mu = BoundarySignal.from_function(lambda t: 0.3 * np.sin(2 * t) + 0j, grid)
    spec = ProblemSpec(coeffs, GridFunction.zeros(grid), mu, Source.zero())
    lifted = solve_hnls(spec, lifting=build_lifting(mu, grid, coeffs), guard=False)
    np.testing.assert_allclose(lifted.history.values, solve_linear(spec).values, atol=1e-7)


def test_nonlinear_run_contracts():
    spec = small_problem(Coefficients(a=1.0, lam=1.0, beta=0.5, p=1.0))
    run = solve_hnls(spec)
    assert run.max_iterations <= 20
    assert np.all(run.contraction[1:] < 1.0)


def test_single_iteration_budget_fails():
    spec = small_problem(Coefficients(a=1.0, lam=1.0, p=1.0))
    with pytest.raises(ContractionFailureError):
        solve_hnls(spec, max_iter=1)


def test_inactive_regularization_leaves_solution_unchanged():
    spec = small_problem(Coefficients(a=1.0, lam=1.0, beta=0.3, p=2.0), amplitude=0.8)
    runs = [solve_hnls(spec, RegularizedNonlinearity(h, 2.0)) for h in (0.5, 0.25)]
    assert not runs[0].regularization_active.any()
    q = spec.grid.quadrature * np.exp(spec.grid.x)
    diff = runs[0].history.values[-1] - runs[1].history.values[-1]
    assert np.sqrt(np.abs(diff) ** 2 @ q) < 1e-10


def test_whole_line_linear_run_conserves_mass_to_round_off():
    run = fullline_hnls_run(lambda x: np.exp(-(x**2)), 20.0, 256, 1.0, 100, Coefficients(a=1.0))
    assert np.max(mass_drift(run)) < 1e-10


def test_whole_line_nonlinear_run_conserves_mass():
    coeffs = Coefficients(a=1.0, lam=1.0, beta=0.5, gamma=0.5, p=1.0)
    run = fullline_hnls_run(lambda x: np.exp(-(x**2)), 20.0, 256, 0.5, 500, coeffs)
    assert np.max(mass_drift(run)) < 1e-6
