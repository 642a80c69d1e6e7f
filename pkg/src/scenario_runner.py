import argparse
import dataclasses
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from boundary_potential import calibrate_lambda0
from core_types import (
    BoundarySignal,
    Coefficients,
    GridFunction,
    GridHistory,
    HalfLineGrid,
    ProblemSpec,
    Source,
    WeightSpec,
    check_uniqueness_condition,
    sigma_plus,
    weight_samples,
    weighted_norms,
)
from diagnostics import (
    FIXED_SEED,
    Perturbation,
    continuous_dependence_experiment,
    damped_wave_family,
    energy_identity_residual_nl,
    interpolation_probe,
    l2_balance_residual,
    solve_problem,
    weak_form_residual,
    weak_test_functions,
    weighted_energy_budget,
)
from errors import ConfigRejectedError, HnlsError, InvalidInputError, ResidualThresholdError
from linear_halfline import (
    boundary_flux_trace,
    dispersion,
    energy_identity_residual,
    fullline_linear_solution,
)
from nonlinearity import RegularizedNonlinearity, cutoff
from report_writer import render_report, write_json_report, write_series_csv
from stencils import differentiate

logger = logging.getLogger(__name__)

# Configuration
DATA_DIR = 'data'
SCENARIO_DIR = os.path.join(DATA_DIR, 'scenarios')
OUTPUT_DIR = 'output'

BOUNDARY_KINDS = ('zero', 'signal-file', 'band-limited', 'manufactured')
INITIAL_KINDS = ('gaussian', 'sech', 'file', 'zero', 'manufactured')
SOURCE_KINDS = ('zero', 'manufactured', 'file')
MANUFACTURED_KINDS = ('linear-gaussian', 'hnls-sech', 'plane-wave')
DIAGNOSTICS = ('l2_balance', 'energy_identity', 'nl_energy', 'weak_form', 'sigma_plus', 'oracle', 'dependence')
CHECKED_RESIDUALS = ('max_l2_balance', 'max_energy_identity', 'max_nl_energy_residual',
                     'max_weak_form', 'oracle_error')

BOUNDARY_HYPOTHESIS = "nonhomogeneous boundary data requires p = 1 and gamma = 0"
UNIQUENESS_HYPOTHESIS = "continuous dependence requires p in [1, 2] and a weight meeting the uniqueness condition"

SECH_CENTER = 3.0
BAND_LIMITED_RAMP = 0.25  # fraction of [0, T] over which band-limited data switch on
DEPENDENCE_EPS = 1e-2
PLANE_WAVE_MODE = 3
ROUNDOFF_FLOOR = 1e-11

DEFAULTS: Dict[str, Any] = {
    'name': None,
    'a': 0.0, 'b': 0.0, 'lambda': 0.0, 'beta': 0.0, 'gamma': 0.0, 'p': 1.0,
    'weight': 'exp:0.5',
    'L': 20.0, 'N': 400, 'T': 1.0, 'M': 400,
    'h': None, 'tol': 1e-10, 'max_iter': 50,
    'boundary': 'zero', 'boundary_file': None, 'boundary_amplitude': 1.0, 'boundary_frequencies': [],
    'initial': 'gaussian', 'initial_center': 5.0, 'initial_width': 1.0, 'initial_amplitude': 1.0,
    'initial_file': None,
    'source': 'zero', 'source_file': None,
    'manufactured': None,
    'diagnostics': ['l2_balance'],
    'residual_threshold': None,
    'uniqueness_c0': 1e-6,
    'output_dir': OUTPUT_DIR,
}

_FLOAT_KEYS = ('a', 'b', 'lambda', 'beta', 'gamma', 'p', 'L', 'T', 'tol', 'boundary_amplitude',
               'initial_center', 'initial_width', 'initial_amplitude', 'uniqueness_c0')
_INT_KEYS = ('N', 'M', 'max_iter')
_OPTIONAL_FLOAT_KEYS = ('h', 'residual_threshold')


def load_json(filepath: str) -> Dict[str, Any]:
    """
    Loads a scenario file.

    Args:
        filepath (str): Path to the JSON file.

    Returns:
        dict: The loaded JSON object.

    Raises:
        ConfigRejectedError: if the file is missing, is not valid JSON or is
            not a JSON object.
    """
    if not os.path.exists(filepath):
        raise ConfigRejectedError(f"scenario file not found at {filepath}")
    try:
        with open(filepath, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigRejectedError(f"invalid JSON in {filepath}: {e}") from None
    if not isinstance(data, dict):
        raise ConfigRejectedError(f"{filepath} must hold a JSON object")
    return data


def _number(key: str, value: Any, kind: type):
    if isinstance(value, bool):
        raise ConfigRejectedError(f"'{key}' must be a number, got {value!r}")
    try:
        out = kind(value)
    except (TypeError, ValueError):
        raise ConfigRejectedError(f"'{key}' must be a number, got {value!r}") from None
    if kind is int and out != value:
        raise ConfigRejectedError(f"'{key}' must be an integer, got {value!r}")
    return out


@dataclass(frozen=True)
class ScenarioConfig:
    """One flat scenario file, typed and checked against the solver's regimes."""

    name: str
    a: float
    b: float
    lam: float
    beta: float
    gamma: float
    p: float
    weight: str
    L: float
    N: int
    T: float
    M: int
    h: Optional[float]
    tol: float
    max_iter: int
    boundary: str
    boundary_file: Optional[str]
    boundary_amplitude: float
    boundary_frequencies: Tuple[float, ...]
    initial: str
    initial_center: float
    initial_width: float
    initial_amplitude: float
    initial_file: Optional[str]
    source: str
    source_file: Optional[str]
    manufactured: Optional[str]
    diagnostics: Tuple[str, ...]
    residual_threshold: Optional[float]
    uniqueness_c0: float
    output_dir: str

    @classmethod
    def from_dict(cls, raw: Dict[str, Any], default_name: str = 'scenario') -> 'ScenarioConfig':
        unknown = sorted(set(raw) - set(DEFAULTS))
        if unknown:
            raise ConfigRejectedError(f"unknown config key(s): {', '.join(unknown)}")
        values = dict(DEFAULTS)
        if raw.get('manufactured') in ('linear-gaussian', 'hnls-sech'):
            for key in ('initial', 'boundary', 'source'):
                values[key] = 'manufactured'
        values.update(raw)
        values['name'] = str(values['name'] or default_name)
        for key in _FLOAT_KEYS:
            values[key] = _number(key, values[key], float)
        for key in _INT_KEYS:
            values[key] = _number(key, values[key], int)
        for key in _OPTIONAL_FLOAT_KEYS:
            if values[key] is not None:
                values[key] = _number(key, values[key], float)
        for key in ('boundary_frequencies', 'diagnostics'):
            if not isinstance(values[key], (list, tuple)):
                raise ConfigRejectedError(f"'{key}' must be a list")
        values['boundary_frequencies'] = tuple(_number('boundary_frequencies', v, float)
                                               for v in values['boundary_frequencies'])
        values['diagnostics'] = tuple(str(v) for v in values['diagnostics'])
        values['lam'] = values.pop('lambda')
        config = cls(**values)
        config.validate()
        return config

    def as_dict(self) -> Dict[str, Any]:
        out = dataclasses.asdict(self)
        out['lambda'] = out.pop('lam')
        out['boundary_frequencies'] = list(self.boundary_frequencies)
        out['diagnostics'] = list(self.diagnostics)
        return out

    @property
    def grid(self) -> HalfLineGrid:
        return HalfLineGrid(self.L, self.N, self.T, self.M)

    @property
    def coefficients(self) -> Coefficients:
        return Coefficients(self.a, self.b, self.lam, self.beta, self.gamma, self.p)

    @property
    def weight_spec(self) -> WeightSpec:
        return WeightSpec.parse(self.weight)

    @property
    def has_boundary_data(self) -> bool:
        if self.boundary == 'band-limited':
            return self.boundary_amplitude != 0
        return self.boundary != 'zero'

    def validate(self) -> None:
        for key, value, allowed in (('boundary', self.boundary, BOUNDARY_KINDS),
                                    ('initial', self.initial, INITIAL_KINDS),
                                    ('source', self.source, SOURCE_KINDS)):
            if value not in allowed:
                raise ConfigRejectedError(f"'{key}' must be one of {', '.join(allowed)}, got '{value}'")
        if self.manufactured is not None and self.manufactured not in MANUFACTURED_KINDS:
            raise ConfigRejectedError(f"unknown manufactured solution '{self.manufactured}'")
        bad = [d for d in self.diagnostics if d not in DIAGNOSTICS]
        if bad:
            raise ConfigRejectedError(f"unknown diagnostic(s): {', '.join(bad)}")
        try:
            HalfLineGrid(self.L, self.N, self.T, self.M)
            Coefficients(self.a, self.b, self.lam, self.beta, self.gamma, self.p)
            WeightSpec.parse(self.weight)
        except InvalidInputError as e:
            raise ConfigRejectedError(str(e)) from None
        if self.h is not None and self.h <= 0:
            raise ConfigRejectedError(f"regularization parameter h must be positive, got {self.h}")

        # data kinds against the manufactured solution
        uses_manufactured = 'manufactured' in (self.initial, self.boundary, self.source)
        if self.manufactured in ('linear-gaussian', 'hnls-sech'):
            if (self.initial, self.boundary, self.source) != ('manufactured',) * 3:
                raise ConfigRejectedError(
                    "manufactured scenarios take initial, boundary and source data from the exact solution")
            if self.h is not None and self.h > 1:
                raise ConfigRejectedError("manufactured sources assume g_h(|u|) = |u|^p, which needs h <= 1")
        elif self.manufactured == 'plane-wave':
            if not self.coefficients.is_linear:
                raise ConfigRejectedError("the plane-wave oracle is an exact mode of the linear equation")
        elif uses_manufactured:
            raise ConfigRejectedError("'manufactured' data kinds need the 'manufactured' key")
        for kind, key, path in (('signal-file', 'boundary_file', self.boundary_file),
                                ('file', 'initial_file', self.initial_file),
                                ('file', 'source_file', self.source_file)):
            prefix = key.split('_')[0]
            if getattr(self, prefix) == kind and not path:
                raise ConfigRejectedError(f"'{prefix}': '{kind}' needs '{key}'")
        if self.boundary == 'band-limited' and not self.boundary_frequencies:
            raise ConfigRejectedError("band-limited boundary data needs 'boundary_frequencies'")
        if 'nl_energy' in self.diagnostics and self.beta + self.gamma == 0:
            raise ConfigRejectedError("the energy functional needs beta + gamma != 0")

        # regime gate
        if self.has_boundary_data and (self.p != 1 or self.gamma != 0):
            raise ConfigRejectedError(
                f"boundary '{self.boundary}' with p={self.p:g}, gamma={self.gamma:g}", BOUNDARY_HYPOTHESIS)
        if 'dependence' in self.diagnostics:
            self.check_uniqueness_regime()

    def check_uniqueness_regime(self) -> None:
        if not 1 <= self.p <= 2:
            raise ConfigRejectedError(f"p={self.p:g}", UNIQUENESS_HYPOTHESIS)
        report = check_uniqueness_condition(self.weight_spec, self.p, weight_samples(self.L), self.uniqueness_c0)
        if not report.ok:
            raise ConfigRejectedError(
                f"weight {self.weight} gives inf {report.inf_value:.3e} < c0={self.uniqueness_c0:g}",
                UNIQUENESS_HYPOTHESIS)


# ---------------------------------------------------------------------------
# Manufactured solutions u(t, x) = e^{it} R(x)
# ---------------------------------------------------------------------------

def _gaussian_profile(x) -> tuple:
    x = np.asarray(x, dtype=float)
    g = np.exp(-x**2)
    return g, -2 * x * g, (4 * x**2 - 2) * g, (12 * x - 8 * x**3) * g


def _sech_profile(x) -> tuple:
    z = np.asarray(x, dtype=float) - SECH_CENTER
    s, tau = 1 / np.cosh(z), np.tanh(z)
    return s, -s * tau, s * (1 - 2 * s**2), s * tau * (6 * s**2 - 1)


@dataclass(frozen=True)
class ManufacturedSolution:
    name: str
    profile: Callable[[np.ndarray], tuple] = field(repr=False)

    def solution(self, t, x) -> np.ndarray:
        return np.exp(1j * np.asarray(t, dtype=float)) * self.profile(x)[0]

    def history(self, grid: HalfLineGrid) -> GridHistory:
        return GridHistory(grid, np.outer(np.exp(1j * grid.t), self.profile(grid.x)[0]))

    def source(self, coeffs: Coefficients) -> Callable[[float, np.ndarray], np.ndarray]:
        """
        f = e^{it} [-R + a R'' + i b R' + i R''' + lam R^(p+1)
                    + i (beta (p+1) + gamma p) R^p R']   for R >= 0.
        """
        c = coeffs
        transport = c.beta * (c.p + 1) + c.gamma * c.p

        def f(t, x):
            r, r1, r2, r3 = self.profile(x)
            rp = np.abs(r) ** c.p
            body = -r + c.a * r2 + 1j * c.b * r1 + 1j * r3 + c.lam * rp * r + 1j * transport * rp * r1
            return np.exp(1j * t) * body

        return f


MANUFACTURED = {
    'linear-gaussian': ManufacturedSolution('linear-gaussian', _gaussian_profile),
    'hnls-sech': ManufacturedSolution('hnls-sech', _sech_profile),
}


# ---------------------------------------------------------------------------
# Problem construction
# ---------------------------------------------------------------------------

def _initial_profile(config: ScenarioConfig) -> Optional[Callable[[np.ndarray], np.ndarray]]:
    """Whole-line formula of the initial datum, when it has one."""
    amp, c, w = config.initial_amplitude, config.initial_center, config.initial_width
    if config.initial == 'gaussian':
        return lambda x: amp * np.exp(-(((x - c) / w) ** 2)) + 0j
    if config.initial == 'sech':
        return lambda x: amp / np.cosh((x - c) / w) + 0j
    return None


def _load_columns(path: str, what: str) -> np.ndarray:
    """CSV with columns (abscissa, re, im); '#' starts a comment."""
    try:
        data = np.loadtxt(path, delimiter=',', comments='#', ndmin=2)
    except (OSError, ValueError) as e:
        raise ConfigRejectedError(f"cannot read {what} file {path}: {e}") from None
    if data.shape[1] != 3 or data.shape[0] < 2:
        raise ConfigRejectedError(f"{what} file {path} needs at least two rows of (x, re, im)")
    return data


def _interpolated(data: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    return np.interp(nodes, data[:, 0], data[:, 1]) + 1j * np.interp(nodes, data[:, 0], data[:, 2])


def build_problem(config: ScenarioConfig) -> ProblemSpec:
    grid = config.grid
    coeffs = config.coefficients
    if config.manufactured == 'plane-wave':
        raise ConfigRejectedError("the plane-wave oracle has no half-line problem; use the converge verb")
    exact = MANUFACTURED.get(config.manufactured)

    # 1. Initial datum
    if config.initial == 'manufactured':
        u0 = GridFunction(grid, exact.solution(0.0, grid.x))
    elif config.initial == 'file':
        u0 = GridFunction(grid, _interpolated(_load_columns(config.initial_file, 'initial'), grid.x))
    elif config.initial == 'zero':
        u0 = GridFunction.zeros(grid)
    else:
        u0 = GridFunction.from_function(_initial_profile(config), grid)

    # 2. Boundary signal
    if config.boundary == 'manufactured':
        mu = BoundarySignal.from_function(lambda t: exact.solution(t, 0.0), grid)
    elif config.boundary == 'signal-file':
        mu = BoundarySignal(grid.t, _interpolated(_load_columns(config.boundary_file, 'boundary'), grid.t))
    elif config.boundary == 'band-limited':
        freqs = np.asarray(config.boundary_frequencies)
        amp = config.boundary_amplitude / freqs.size
        ramp = BAND_LIMITED_RAMP * config.T
        eta = cutoff()

        def band_limited(t):
            # switched on smoothly so every corner condition with zero data holds
            t = np.asarray(t, dtype=float)
            return amp * eta(t / ramp) * np.sum(np.exp(1j * np.multiply.outer(t, freqs)), axis=-1)

        mu = BoundarySignal.from_function(band_limited, grid)
    else:
        mu = BoundarySignal.zero(grid)

    # 3. Source
    if config.source == 'manufactured':
        f = Source(exact.source(coeffs))
    elif config.source == 'file':
        try:
            samples = np.load(config.source_file)
            f = Source(samples=GridHistory(grid, samples))
        except (OSError, ValueError, InvalidInputError) as e:
            raise ConfigRejectedError(f"cannot use source file {config.source_file}: {e}") from None
    else:
        f = Source.zero()
    return ProblemSpec(coeffs, u0, mu, f)


def regularization(config: ScenarioConfig) -> Optional[RegularizedNonlinearity]:
    return RegularizedNonlinearity(config.h, config.p) if config.h is not None else None


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------

@dataclass
class RunRecord:
    """Everything a run produced; ``config`` is the full snapshot it ran from."""

    config: Dict[str, Any]
    grid: Dict[str, float]
    series: Dict[str, np.ndarray]
    summary: Dict[str, Any]
    solver: Dict[str, Any]
    weak_form: List[Dict[str, Any]]
    timings: Dict[str, float]
    passed: bool = True
    artifacts: List[str] = field(default_factory=list)

    def check(self) -> None:
        if not self.passed:
            failed = {k: self.summary[k] for k in CHECKED_RESIDUALS
                      if k in self.summary and self.summary[k] > self.config['residual_threshold']}
            raise ResidualThresholdError(f"{self.config['name']}: residuals above threshold {failed}")


def _nan(n: int) -> np.ndarray:
    return np.full(n, np.nan)


def _oracle_error(config: ScenarioConfig, spec: ProblemSpec, history: GridHistory) -> Optional[float]:
    grid = history.grid
    q = grid.quadrature
    exact = MANUFACTURED.get(config.manufactured)
    if exact is not None:
        diff = history.values - exact.history(grid).values
        return float(np.max(np.sqrt(np.abs(diff) ** 2 @ q)))
    profile = _initial_profile(config)
    if profile is None or not spec.coeffs.is_linear or not spec.mu.is_zero or not spec.f.is_zero:
        return None
    # whole-line oracle, valid while the solution stays off the boundary
    ref = fullline_linear_solution(profile, grid, grid.T, config.a, config.b)
    return float(np.sqrt(np.abs(history.values[-1] - ref) ** 2 @ q))


def run_scenario(config: ScenarioConfig, output_dir: Optional[str] = None, write: bool = True) -> RunRecord:
    """Solve one scenario, evaluate its diagnostics and write the artifacts."""
    logger.info("[run] %s: grid %s", config.name, config.grid.describe())
    timings = {}
    diagnostics = set(config.diagnostics)

    # 1. Build and solve
    start = time.perf_counter()
    spec = build_problem(config)
    reg = regularization(config)
    weight = config.weight_spec
    run, lifting = solve_problem(spec, reg, tol=config.tol, max_iter=config.max_iter, weight=weight)
    timings['solve'] = time.perf_counter() - start

    # 2. Per-step series
    start = time.perf_counter()
    history = run.history
    grid = history.grid
    vals = np.asarray(history.values)
    n = grid.M + 1
    f_hist = None if spec.f.is_zero else spec.f.history(grid)
    series = {
        't': grid.t,
        'l2': np.sqrt(np.abs(vals) ** 2 @ grid.quadrature),
        'wl2': weighted_norms(vals, grid, weight(grid.x)),
        'flux': np.array([abs(boundary_flux_trace(row, grid.dx)) ** 2 for row in vals]),
        'e_ident': _nan(n),
        'nl_energy': _nan(n),
        'gamma_term': _nan(n),
        'iters': run.iterations,
    }
    summary: Dict[str, Any] = {'max_picard_iterations': run.max_iterations,
                               'regularization_active_steps': int(run.regularization_active.sum())}
    if lifting is not None:
        summary['lifting_sup_l2'] = lifting.sup_l2()

    # 3. Diagnostics
    if 'l2_balance' in diagnostics:
        res = l2_balance_residual(history, spec.coeffs, f_hist, spec.mu, reg)
        summary['max_l2_balance'] = float(np.max(np.abs(res)))
    if 'energy_identity' in diagnostics and not spec.mu.is_zero:
        logger.warning("[run] %s: weighted identity needs homogeneous boundary data; skipped", config.name)
    elif 'energy_identity' in diagnostics:
        if spec.coeffs.is_linear:
            series['e_ident'] = energy_identity_residual(history, config.a, config.b, weight, f0_history=f_hist)
        else:
            series['e_ident'] = weighted_energy_budget(history, spec.coeffs, weight, reg, f_hist).defect
        summary['max_energy_identity'] = float(np.max(np.abs(series['e_ident'])))
    if 'nl_energy' in diagnostics:
        energy = energy_identity_residual_nl(history, spec.coeffs)
        series['nl_energy'] = energy.energy
        series['gamma_term'] = energy.gamma_term
        summary['max_nl_energy_residual'] = float(np.max(np.abs(energy.residual)))
    weak_rows = []
    if 'weak_form' in diagnostics:
        tests = weak_test_functions(grid.T)
        residuals = weak_form_residual(history, spec, tests, reg)
        weak_rows = [{'name': phi.name, 'residual': float(r)} for phi, r in zip(tests, residuals)]
        summary['max_weak_form'] = float(np.max(residuals))
    if 'sigma_plus' in diagnostics:
        sp = sigma_plus(GridHistory(grid, differentiate(vals, grid.dx, 1)))
        summary['sigma_plus'] = sp.value
        summary['sigma_plus_x0'] = sp.x0
    if 'oracle' in diagnostics:
        err = _oracle_error(config, spec, history)
        if err is None:
            logger.warning("[run] %s: no oracle for this scenario; skipped", config.name)
        else:
            summary['oracle_error'] = err
    if 'dependence' in diagnostics:
        rows = continuous_dependence_experiment(spec, [Perturbation('u0', DEPENDENCE_EPS)], weight, reg,
                                                config.uniqueness_c0, config.tol)
        summary['dependence_ratio'] = rows[0].ratio
    timings['diagnostics'] = time.perf_counter() - start

    # 4. Threshold
    passed = True
    if config.residual_threshold is not None:
        passed = all(summary[k] <= config.residual_threshold for k in CHECKED_RESIDUALS if k in summary)

    record = RunRecord(
        config=config.as_dict(),
        grid=grid.describe(),
        series=series,
        summary=summary,
        solver={'iterations': run.iterations, 'contraction': run.contraction,
                'regularization_active': run.regularization_active},
        weak_form=weak_rows,
        timings=timings,
        passed=passed,
    )

    # 5. Artifacts
    if write:
        record.artifacts = write_artifacts(record, os.path.join(output_dir or config.output_dir, config.name))
    logger.info("[run] %s finished: %s", config.name, 'passed' if passed else 'threshold exceeded')
    return record


def write_artifacts(record: RunRecord, out_dir: str) -> List[str]:
    start = time.perf_counter()
    os.makedirs(out_dir, exist_ok=True)
    paths = [write_series_csv(os.path.join(out_dir, 'series.csv'), record.series)]
    logger.info("[run] Generated: %s", paths[0])
    report = {
        'scenario': record.config['name'],
        'grid': record.grid,
        'series': record.series,
        'summary': record.summary,
        'config': record.config,
        'solver': record.solver,
        'weak_form': record.weak_form,
        'passed': record.passed,
    }
    paths.append(write_json_report(os.path.join(out_dir, 'report.json'), report))
    logger.info("[run] Generated: %s", paths[-1])
    record.timings['report'] = time.perf_counter() - start
    context = {
        'scenario': record.config['name'],
        'passed': record.passed,
        'threshold': record.config['residual_threshold'],
        'grid': record.grid,
        'coefficients': {k: record.config[k] for k in ('a', 'b', 'lambda', 'beta', 'gamma', 'p')},
        'weight': record.config['weight'],
        'h': record.config['h'],
        'summary': record.summary,
        'weak_form': record.weak_form,
        'convergence': None,
        'timings': record.timings,
    }
    paths.extend(render_report(context, out_dir))
    return paths


# ---------------------------------------------------------------------------
# Convergence tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    dx: float
    dt: float
    error: float
    order: Optional[float]
    note: str = ''
    max_iterations: int = 0


@dataclass(frozen=True)
class ConvergenceTable:
    scenario: str
    rows: List[ConvergenceRow]

    @property
    def orders(self) -> List[Optional[float]]:
        return [row.order for row in self.rows[1:]]

    @property
    def monotone(self) -> bool:
        errors = [row.error for row in self.rows]
        return all(e1 <= e0 for e0, e1 in zip(errors, errors[1:]))

    def as_dict(self) -> Dict[str, Any]:
        return {'scenario': self.scenario, 'monotone': self.monotone,
                'rows': [dataclasses.asdict(row) for row in self.rows]}


def has_oracle(config: ScenarioConfig) -> bool:
    if config.manufactured is not None:
        return True
    return (config.initial in ('gaussian', 'sech') and config.coefficients.is_linear
            and not config.has_boundary_data and config.source == 'zero')


def _plane_wave_error(config: ScenarioConfig) -> Tuple[float, float, int]:
    grid = config.grid
    xi0 = math.pi * PLANE_WAVE_MODE / grid.L
    numeric = fullline_linear_solution(lambda x: np.exp(1j * xi0 * x), grid, grid.T, config.a, config.b)
    exact = np.exp(1j * (xi0 * grid.x + dispersion(xi0, config.a, config.b) * grid.T))
    q = grid.quadrature
    return float(np.sqrt(np.abs(numeric - exact) ** 2 @ q)), float(np.sqrt(np.abs(exact) ** 2 @ q)), 0


def _level_error(config: ScenarioConfig) -> Tuple[float, float, int]:
    """(error, oracle norm, max Picard iterations) on the config's grid."""
    if config.manufactured == 'plane-wave':
        return _plane_wave_error(config)
    spec = build_problem(config)
    run, _ = solve_problem(spec, regularization(config), tol=config.tol, max_iter=config.max_iter,
                           weight=config.weight_spec)
    err = _oracle_error(config, spec, run.history)
    scale = float(np.sqrt(np.max(np.abs(run.history.values) ** 2 @ config.grid.quadrature)))
    return err, scale, run.max_iterations


def convergence_table(config: ScenarioConfig, levels: int) -> ConvergenceTable:
    """
    Dyadic refinements of dx and dt together; the observed order is the
    log2 ratio of consecutive errors. Errors at the round-off floor are
    marked saturated and get no order.
    """
    if levels < 2:
        raise InvalidInputError(f"a convergence table needs at least two levels, got {levels}")
    if not has_oracle(config):
        raise InvalidInputError(f"scenario '{config.name}' has no oracle (manufactured or Fourier)")
    rows: List[ConvergenceRow] = []
    for level in range(levels):
        cfg = dataclasses.replace(config, N=config.N * 2**level, M=config.M * 2**level)
        error, scale, iterations = _level_error(cfg)
        saturated = error <= ROUNDOFF_FLOOR * max(1.0, scale)
        order, note = None, ''
        if saturated:
            note = 'saturated'
            logger.warning("[converge] %s: error %.3e at the round-off floor", config.name, error)
        elif rows and rows[-1].note != 'saturated':
            order = math.log2(rows[-1].error / error)
            if error > rows[-1].error:
                note = 'non-monotone'
                logger.warning("[converge] %s: error grew from %.3e to %.3e (tail contamination suspected)",
                               config.name, rows[-1].error, error)
        grid = cfg.grid
        rows.append(ConvergenceRow(grid.dx, grid.dt, error, order, note, iterations))
        logger.info("[converge] dx=%.4g dt=%.4g error=%.3e order=%s", grid.dx, grid.dt, error,
                    '-' if order is None else f"{order:.3f}")
    return ConvergenceTable(config.name, rows)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def resolve_config_path(arg: str) -> str:
    # full path, or a preset name under data/scenarios
    if os.path.exists(arg):
        return arg
    name = arg if arg.endswith('.json') else f"{arg}.json"
    config_path = os.path.join(SCENARIO_DIR, name)
    if not os.path.exists(config_path):
        raise ConfigRejectedError(f"scenario configuration '{arg}' not found")
    return config_path


def load_scenario(path: str) -> ScenarioConfig:
    stem = os.path.splitext(os.path.basename(path))[0]
    return ScenarioConfig.from_dict(load_json(path), default_name=stem)


def exit_code(error: HnlsError) -> int:
    if isinstance(error, ConfigRejectedError):
        return 3
    if isinstance(error, ResidualThresholdError):
        return 2
    return 1


def _run_config_file(path: str, output_dir: Optional[str] = None) -> int:
    try:
        record = run_scenario(load_scenario(resolve_config_path(path)), output_dir)
        record.check()
    except HnlsError as e:
        logger.error("[run] %s: %s", path, e)
        return exit_code(e)
    return 0


def _cmd_run(args) -> int:
    if args.configs:
        paths = list(args.configs)
    else:
        # plane-wave presets only feed the converge verb
        paths = [path for path in sorted(os.path.join(SCENARIO_DIR, name) for name in os.listdir(SCENARIO_DIR)
                                         if name.endswith('.json'))
                 if load_json(path).get('manufactured') != 'plane-wave']
    if args.workers > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            codes = list(pool.map(_run_config_file, paths, [args.output_dir] * len(paths)))
    else:
        codes = [_run_config_file(path, args.output_dir) for path in paths]
    return max(codes, default=0)


def _cmd_converge(args) -> int:
    config = load_scenario(resolve_config_path(args.config))
    table = convergence_table(config, args.levels)
    out_dir = os.path.join(args.output_dir or config.output_dir, config.name)
    path = write_json_report(os.path.join(out_dir, 'convergence.json'), table.as_dict())
    logger.info("[converge] Generated: %s", path)
    return 0


def _cmd_calibrate(args) -> int:
    calibration = calibrate_lambda0(args.a, args.b)
    print(json.dumps(calibration.as_dict(), indent=2))
    return 0


def _cmd_probe(args) -> int:
    psi1, psi2 = WeightSpec.parse(args.psi1), WeightSpec.parse(args.psi2)
    family = damped_wave_family(args.samples, args.seed)
    rows = []
    for q in args.q:
        coarse = interpolation_probe(family, psi1, psi2, q)
        fine = interpolation_probe(family, psi1, psi2, q, n=8001)
        change = abs(fine.max_ratio - coarse.max_ratio) / coarse.max_ratio if coarse.max_ratio else 0.0
        rows.append({'q': 'inf' if math.isinf(q) else q, 's': coarse.s, 'max_ratio': coarse.max_ratio,
                     'max_ratio_refined': fine.max_ratio, 'relative_change': change})
        logger.info("[probe] q=%s max ratio %.6g (refined %.6g)", q, coarse.max_ratio, fine.max_ratio)
    print(json.dumps(rows, indent=2))
    return 0


def _cmd_depend(args) -> int:
    config = load_scenario(resolve_config_path(args.config))
    config.check_uniqueness_regime()
    kinds = [k.strip() for k in args.perturb.split(',') if k.strip()]
    for kind in kinds:
        if kind not in ('u0', 'mu', 'f'):
            raise ConfigRejectedError(f"unknown perturbation '{kind}'")
    if 'mu' in kinds and (config.p != 1 or config.gamma != 0):
        raise ConfigRejectedError(f"perturbing mu with p={config.p:g}, gamma={config.gamma:g}",
                                  BOUNDARY_HYPOTHESIS)
    perturbations = [Perturbation(kind, eps) for kind in kinds for eps in args.eps]
    rows = continuous_dependence_experiment(build_problem(config), perturbations, config.weight_spec,
                                            regularization(config), config.uniqueness_c0, config.tol)
    out_dir = os.path.join(args.output_dir or config.output_dir, config.name)
    path = write_json_report(os.path.join(out_dir, 'dependence.json'),
                             {'scenario': config.name, 'config': config.as_dict(),
                              'experiments': [row.as_dict() for row in rows]})
    logger.info("[depend] Generated: %s", path)
    return 0


def _q_value(text: str) -> float:
    return math.inf if text.lower() in ('inf', 'infinity') else float(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Half-line higher-order NLS scenario runner.")
    parser.add_argument('--verbose', action='store_true', help="Log per-step solver details.")
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help="Run scenario files (all presets in data/scenarios when none given).")
    run.add_argument('configs', nargs='*', help="Scenario file paths or preset names (e.g. 'zero-data').")
    run.add_argument('--workers', type=int, default=1, help="Worker processes for several scenarios.")
    run.add_argument('--output-dir', default=None, help="Override the scenario's output_dir.")
    run.set_defaults(handler=_cmd_run)

    converge = sub.add_parser('converge', help="Dyadic refinement table against the scenario's oracle.")
    converge.add_argument('config')
    converge.add_argument('--levels', type=int, default=3)
    converge.add_argument('--output-dir', default=None)
    converge.set_defaults(handler=_cmd_converge)

    calibrate = sub.add_parser('calibrate-lambda0', help="Frequency cutoff and decay margin for (a, b).")
    calibrate.add_argument('--a', type=float, required=True)
    calibrate.add_argument('--b', type=float, required=True)
    calibrate.set_defaults(handler=_cmd_calibrate)

    probe = sub.add_parser('probe-interpolation', help="Weighted interpolation ratios over damped waves.")
    probe.add_argument('--q', type=_q_value, nargs='+', default=[4.0, math.inf])
    probe.add_argument('--samples', type=int, default=100)
    probe.add_argument('--seed', type=int, default=FIXED_SEED)
    probe.add_argument('--psi1', default='exp:0.5')
    probe.add_argument('--psi2', default='exp:0.5')
    probe.set_defaults(handler=_cmd_probe)

    depend = sub.add_parser('depend', help="Continuous dependence on perturbed data.")
    depend.add_argument('config')
    depend.add_argument('--perturb', default='u0,mu,f', help="Comma list of u0, mu, f.")
    depend.add_argument('--eps', type=float, nargs='+', default=[1e-1, 1e-2, 1e-3])
    depend.add_argument('--output-dir', default=None)
    depend.set_defaults(handler=_cmd_depend)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format='%(message)s')
    try:
        return args.handler(args)
    except HnlsError as e:
        logger.error("[%s] %s", args.command, e)
        return exit_code(e)


if __name__ == "__main__":
    sys.exit(main())
