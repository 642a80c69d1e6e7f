import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core_types import (
    BoundarySignal,
    Coefficients,
    GridFunction,
    GridHistory,
    HalfLineGrid,
    ProblemSpec,
    Source,
    WeightSpec,
    check_admissible,
    check_uniqueness_condition,
    power_weight_threshold,
    sigma_plus,
    tail_mass_guard,
    weight_samples,
    weighted_l2_norm,
)
from errors import (
    DomainTooShortError,
    InvalidInputError,
    NotAWeightError,
    TailContaminationError,
)


@pytest.fixture
def grid():
    return HalfLineGrid(L=10.0, N=100, T=1.0, M=10)


def test_grid_nodes_and_spacing(grid):
    assert grid.dx == pytest.approx(0.1)
    assert grid.dt == pytest.approx(0.1)
    assert grid.x[0] == 0.0 and grid.x[-1] == pytest.approx(10.0)
    assert grid.t.size == 11


@pytest.mark.parametrize("kwargs", [dict(L=1.0, N=4, T=1.0, M=4), dict(L=1.0, N=8, T=1.0, M=1),
                                    dict(L=-1.0, N=8, T=1.0, M=4)])
def test_grid_rejects_degenerate_sizes(kwargs):
    with pytest.raises(InvalidInputError):
        HalfLineGrid(**kwargs)


def test_refined_grid_halves_both_steps(grid):
    fine = grid.refined()
    assert fine.dx == pytest.approx(grid.dx / 2)
    assert fine.dt == pytest.approx(grid.dt / 2)


def test_grid_function_checks_shape_and_finiteness(grid):
    with pytest.raises(InvalidInputError):
        GridFunction(grid, np.zeros(5))
    bad = np.zeros(grid.N + 1)
    bad[3] = np.nan
    with pytest.raises(InvalidInputError):
        GridFunction(grid, bad)


def test_grid_function_values_are_read_only(grid):
    u = GridFunction.zeros(grid)
    with pytest.raises(ValueError):
        u.values[0] = 1.0


def test_history_arithmetic(grid):
    ones = GridHistory(grid, np.ones((grid.M + 1, grid.N + 1)))
    assert np.all((ones + ones).values == 2)
    assert not np.any((ones - ones).values)
    with pytest.raises(InvalidInputError):
        GridHistory(grid, np.ones((grid.M, grid.N + 1)))


def test_boundary_signal_from_function_keeps_callable(grid):
    mu = BoundarySignal.from_function(lambda t: np.exp(1j * t), grid)
    assert not mu.is_zero
    assert complex(mu.at(0.55)) == pytest.approx(np.exp(0.55j))
    assert BoundarySignal.zero(grid).is_zero


def test_sampled_source_interpolates_linearly_in_time(grid):
    samples = GridHistory(grid, np.outer(grid.t, np.ones(grid.N + 1)))
    f = Source(samples=samples)
    np.testing.assert_allclose(f.at(0.25, grid), 0.25 * np.ones(grid.N + 1))
    assert Source.zero().is_zero


def test_source_rejects_two_representations(grid):
    with pytest.raises(InvalidInputError):
        Source(lambda t, x: x, samples=GridHistory(grid, np.zeros((grid.M + 1, grid.N + 1))))


def test_exponent_below_one_rejected():
    with pytest.raises(InvalidInputError):
        Coefficients(p=0.5)


def test_nonhomogeneous_boundary_needs_p_one_and_gamma_zero(grid):
    mu = BoundarySignal.from_function(lambda t: np.sin(t), grid)
    spec = ProblemSpec(Coefficients(a=1.0, p=2.0), GridFunction.zeros(grid), mu)
    with pytest.raises(InvalidInputError, match="p = 1"):
        spec.check_boundary_regime()
    ProblemSpec(Coefficients(a=1.0, lam=1.0), GridFunction.zeros(grid), mu).check_boundary_regime()


@pytest.mark.parametrize("code", ["exp:0.5", "pow:1.5", "arctan", "one"])
def test_weight_codes_round_trip(code):
    assert WeightSpec.parse(code).code == code


def test_weight_parse_rejects_garbage():
    with pytest.raises(InvalidInputError):
        WeightSpec.parse("exp:abc")
    with pytest.raises(InvalidInputError):
        WeightSpec.parse("gauss:1")


def test_exponential_weight_derivatives():
    w = WeightSpec.parse("exp:0.5")
    x = np.linspace(0.0, 3.0, 7)
    for k in range(4):
        np.testing.assert_allclose(w.derivative(x, k), np.exp(x))


@pytest.mark.parametrize("code", ["pow:0.75", "arctan"])
def test_analytic_derivatives_match_differences(code):
    w = WeightSpec.parse(code)
    x = np.linspace(0.5, 4.0, 8)
    step = 1e-5
    for k in range(3):
        numeric = (w.derivative(x + step, k) - w.derivative(x - step, k)) / (2 * step)
        np.testing.assert_allclose(w.derivative(x, k + 1), numeric, rtol=1e-5, atol=1e-8)


def test_prime_weight_of_exponential_is_scaled_weight():
    w = WeightSpec.exponential(0.25)
    x = np.linspace(0.0, 2.0, 5)
    np.testing.assert_allclose(w.prime_weight()(x), w.derivative(x, 1))
    with pytest.raises(InvalidInputError):
        WeightSpec.one().prime_weight()


@given(st.floats(min_value=0.05, max_value=2.0))
@settings(max_examples=25, deadline=None)
def test_exponential_weights_are_admissible(alpha):
    report = check_admissible(WeightSpec.exponential(alpha), [1, 2, 3], weight_samples(20.0))
    assert report.ok
    assert report.constants[0] == pytest.approx(2 * alpha)


def test_negative_custom_weight_is_not_a_weight():
    w = WeightSpec.from_callables([lambda x: x - 1.0, lambda x: 1.0, lambda x: 0.0, lambda x: 0.0], 1.0, 0.0)
    with pytest.raises(NotAWeightError):
        check_admissible(w, [1], weight_samples(5.0))


def test_weighted_norm_of_constant(grid):
    u = GridFunction(grid, np.ones(grid.N + 1))
    assert weighted_l2_norm(u, WeightSpec.one()) == pytest.approx(math.sqrt(grid.L))


def test_sigma_plus_of_constant(grid):
    u = GridHistory(grid, np.ones((grid.M + 1, grid.N + 1)))
    value = sigma_plus(u)
    assert value.value == pytest.approx(math.sqrt(grid.T), rel=1e-10)


@given(st.floats(min_value=1.0, max_value=10.0))
@settings(max_examples=20, deadline=None)
def test_sigma_plus_scales_with_amplitude(c):
    grid = HalfLineGrid(5.0, 50, 1.0, 5)
    profile = np.exp(-((grid.x - 2.0) ** 2))
    u = GridHistory(grid, np.outer(np.ones(grid.M + 1), profile))
    assert sigma_plus(GridHistory(grid, c * u.values)).value == pytest.approx(c * sigma_plus(u).value, rel=1e-12)


def test_sigma_plus_needs_unit_window():
    grid = HalfLineGrid(0.5, 8, 1.0, 4)
    with pytest.raises(DomainTooShortError):
        sigma_plus(GridHistory(grid, np.zeros((5, 9))))


def test_uniqueness_condition_for_exponential_weight():
    report = check_uniqueness_condition(WeightSpec.exponential(0.5), 1.0, weight_samples(20.0))
    assert report.ok
    assert report.inf_value == pytest.approx(1.0)
    assert not check_uniqueness_condition(WeightSpec.one(), 1.0, weight_samples(20.0)).ok
    with pytest.raises(InvalidInputError):
        check_uniqueness_condition(WeightSpec.one(), 3.0, weight_samples(20.0))


def test_power_weight_threshold_separates_pass_and_fail():
    p = 1.0
    alpha = power_weight_threshold(p)
    assert alpha == pytest.approx(0.75)
    samples = weight_samples(1e8)
    assert check_uniqueness_condition(WeightSpec.power(alpha), p, samples).ok
    assert not check_uniqueness_condition(WeightSpec.power(0.5), p, samples).ok


def test_tail_guard(grid):
    tail_mass_guard(GridFunction(grid, np.exp(-((grid.x - 3.0) ** 2))))
    tail_mass_guard(GridFunction.zeros(grid))
    with pytest.raises(TailContaminationError):
        tail_mass_guard(GridFunction(grid, np.ones(grid.N + 1)))
