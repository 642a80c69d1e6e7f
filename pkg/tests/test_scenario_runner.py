import json
import os

import numpy as np
import pytest

from core_types import Coefficients
from errors import AccuracyError, ConfigRejectedError, InvalidInputError, ResidualThresholdError
from scenario_runner import (
    MANUFACTURED,
    ScenarioConfig,
    convergence_table,
    exit_code,
    has_oracle,
    load_json,
    load_scenario,
    main,
    run_scenario,
)

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
PRESET_DIR = os.path.join(REPO_ROOT, 'data', 'scenarios')


def preset(name):
    return load_scenario(os.path.join(PRESET_DIR, f"{name}.json"))


def write_config(tmp_path, name, raw):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(raw))
    return str(path)


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigRejectedError, match="lamda"):
        ScenarioConfig.from_dict({'lamda': 1.0})


def test_boundary_data_outside_the_regime_is_rejected():
    raw = {'boundary': 'band-limited', 'boundary_frequencies': [5.0], 'p': 2}
    with pytest.raises(ConfigRejectedError) as info:
        ScenarioConfig.from_dict(raw)
    assert "p = 1" in str(info.value)


def test_non_numeric_grid_sizes_are_rejected():
    with pytest.raises(ConfigRejectedError):
        ScenarioConfig.from_dict({'N': 10.5})
    with pytest.raises(ConfigRejectedError):
        ScenarioConfig.from_dict({'a': True})


def test_load_json_errors(tmp_path):
    with pytest.raises(ConfigRejectedError):
        load_json(str(tmp_path / 'missing.json'))
    bad = tmp_path / 'bad.json'
    bad.write_text('{"a": ')
    with pytest.raises(ConfigRejectedError):
        load_json(str(bad))
    listed = tmp_path / 'list.json'
    listed.write_text('[1, 2]')
    with pytest.raises(ConfigRejectedError):
        load_json(str(listed))


@pytest.mark.parametrize("name", sorted(os.path.splitext(f)[0] for f in os.listdir(PRESET_DIR)))
def test_presets_load(name):
    config = preset(name)
    assert config.name == name
    assert config.as_dict()['lambda'] == config.lam


def test_manufactured_scenarios_take_all_data_from_the_solution():
    config = preset('linear-gaussian')
    assert (config.initial, config.boundary, config.source) == ('manufactured',) * 3
    with pytest.raises(ConfigRejectedError):
        ScenarioConfig.from_dict({'manufactured': 'linear-gaussian', 'initial': 'zero'})


def test_zero_data_run(tmp_path, monkeypatch):
    monkeypatch.chdir(REPO_ROOT)
    config = preset('zero-data')
    record = run_scenario(config, str(tmp_path))
    assert record.passed
    record.check()
    for key in ('max_l2_balance', 'max_energy_identity', 'max_weak_form'):
        assert record.summary[key] == 0.0
    names = sorted(os.path.basename(p) for p in record.artifacts)
    assert names == ['report.html', 'report.json', 'report.md', 'series.csv']
    with open(os.path.join(tmp_path, 'zero-data', 'report.json')) as f:
        report = json.load(f)
    assert report['scenario'] == 'zero-data'
    assert len(report['series']['t']) == config.M + 1


def test_series_csv_is_deterministic(tmp_path, monkeypatch):
    monkeypatch.chdir(REPO_ROOT)
    config = preset('zero-data')
    run_scenario(config, str(tmp_path / 'first'))
    run_scenario(config, str(tmp_path / 'second'))
    first = (tmp_path / 'first' / 'zero-data' / 'series.csv').read_text()
    second = (tmp_path / 'second' / 'zero-data' / 'series.csv').read_text()
    assert first == second


@pytest.mark.parametrize("name, coeffs", [
    ('linear-gaussian', Coefficients(a=1.0, b=0.5)),
    ('hnls-sech', Coefficients(a=1.0, b=0.5, lam=1.0, beta=0.5, p=1.0)),
])
def test_manufactured_source_satisfies_the_equation(name, coeffs):
    exact = MANUFACTURED[name]
    f = exact.source(coeffs)
    t, x = 0.3, np.linspace(1.0, 6.0, 11)
    dt, dx = 1e-5, 1e-2

    def u(s, y):
        return exact.solution(s, y)

    u_t = (u(t + dt, x) - u(t - dt, x)) / (2 * dt)
    u_x = (u(t, x + dx) - u(t, x - dx)) / (2 * dx)
    u_xx = (u(t, x + dx) - 2 * u(t, x) + u(t, x - dx)) / dx**2
    u_xxx = (u(t, x + 2 * dx) - 2 * u(t, x + dx) + 2 * u(t, x - dx) - u(t, x - 2 * dx)) / (2 * dx**3)
    g = np.abs(u(t, x)) ** coeffs.p
    gu_x = (np.abs(u(t, x + dx)) ** coeffs.p * u(t, x + dx)
            - np.abs(u(t, x - dx)) ** coeffs.p * u(t, x - dx)) / (2 * dx)
    g_x = (np.abs(u(t, x + dx)) ** coeffs.p - np.abs(u(t, x - dx)) ** coeffs.p) / (2 * dx)
    lhs = (1j * u_t + coeffs.a * u_xx + 1j * coeffs.b * u_x + 1j * u_xxx + coeffs.lam * g * u(t, x)
           + 1j * coeffs.beta * gu_x + 1j * coeffs.gamma * g_x * u(t, x))
    np.testing.assert_allclose(lhs, f(t, x), atol=1e-3)


def test_plane_wave_errors_sit_at_the_round_off_floor():
    table = convergence_table(preset('plane-wave'), 2)
    assert [row.note for row in table.rows] == ['saturated', 'saturated']
    assert table.orders == [None]
    assert table.rows[1].dx == pytest.approx(table.rows[0].dx / 2)


def test_convergence_needs_levels_and_an_oracle():
    with pytest.raises(InvalidInputError):
        convergence_table(preset('plane-wave'), 1)
    config = preset('zero-data')
    assert not has_oracle(config)
    with pytest.raises(InvalidInputError):
        convergence_table(config, 2)


def test_calibrate_verb_prints_json(capsys):
    assert main(['calibrate-lambda0', '--a', '0', '--b', '0']) == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out) == {'a', 'b', 'lambda0', 'eps'}
    assert out['lambda0'] == pytest.approx(1.0)


def test_run_verb_exit_codes(tmp_path, monkeypatch):
    monkeypatch.chdir(REPO_ROOT)
    rejected = write_config(tmp_path, 'rejected', {
        'boundary': 'band-limited', 'boundary_frequencies': [5.0], 'p': 2,
    })
    assert main(['run', rejected, '--output-dir', str(tmp_path / 'out')]) == 3
    strict = write_config(tmp_path, 'strict', {
        'a': 1.0, 'initial': 'gaussian',
        'L': 20.0, 'N': 200, 'T': 0.2, 'M': 20,
        'diagnostics': ['oracle'], 'residual_threshold': 1e-14,
    })
    assert main(['run', strict, '--output-dir', str(tmp_path / 'out')]) == 2
    assert (tmp_path / 'out' / 'strict' / 'series.csv').exists()


def test_exit_code_mapping():
    assert exit_code(ConfigRejectedError("bad")) == 3
    assert exit_code(ResidualThresholdError("high")) == 2
    assert exit_code(AccuracyError("blow-up")) == 1


def test_boundary_driven_run_reports_the_lifting_norm(tmp_path, monkeypatch):
    monkeypatch.chdir(REPO_ROOT)
    config = ScenarioConfig.from_dict({
        'name': 'lifted', 'a': 1.0, 'b': 0.5, 'manufactured': 'linear-gaussian',
        'L': 8.0, 'N': 160, 'T': 0.2, 'M': 20, 'diagnostics': ['l2_balance'],
    })
    record = run_scenario(config, str(tmp_path))
    with open(os.path.join(tmp_path, 'lifted', 'report.json')) as f:
        report = json.load(f)
    value = report['summary']['lifting_sup_l2']
    assert isinstance(value, float)
    assert value > 0
    assert value == pytest.approx(record.summary['lifting_sup_l2'])


def test_dependence_diagnostic_is_gated_at_load():
    with pytest.raises(ConfigRejectedError) as info:
        ScenarioConfig.from_dict({'weight': 'one', 'diagnostics': ['dependence']})
    assert "uniqueness" in str(info.value)
    assert ScenarioConfig.from_dict({'weight': 'one'}).weight == 'one'
    assert 'dependence' in preset('dependence').diagnostics


def test_depend_verb_writes_the_experiments(tmp_path, monkeypatch):
    monkeypatch.chdir(REPO_ROOT)
    code = main(['depend', 'dependence', '--perturb', 'u0,f', '--eps', '0.1', '0.01',
                 '--output-dir', str(tmp_path)])
    assert code == 0
    with open(os.path.join(tmp_path, 'dependence', 'dependence.json')) as f:
        report = json.load(f)
    rows = report['experiments']
    assert [(row['kind'], row['eps']) for row in rows] == [('u0', 0.1), ('u0', 0.01), ('f', 0.1), ('f', 0.01)]
    assert all(row['ratio'] > 0 for row in rows)


def test_depend_verb_rejects_a_weight_without_uniqueness(tmp_path, monkeypatch):
    monkeypatch.chdir(REPO_ROOT)
    path = write_config(tmp_path, 'flat', {'a': 1.0, 'lambda': 1.0, 'weight': 'one'})
    assert main(['depend', path, '--output-dir', str(tmp_path)]) == 3
    assert not (tmp_path / 'flat').exists()


RUNNABLE_PRESETS = sorted(os.path.splitext(f)[0] for f in os.listdir(PRESET_DIR)
                          if load_json(os.path.join(PRESET_DIR, f)).get('manufactured') != 'plane-wave')


@pytest.mark.slow
@pytest.mark.parametrize("name", [n for n in RUNNABLE_PRESETS if n != 'zero-data'])
def test_every_preset_runs_to_a_report(name, tmp_path, monkeypatch):
    monkeypatch.chdir(REPO_ROOT)
    assert main(['run', name, '--output-dir', str(tmp_path)]) == 0
    with open(os.path.join(tmp_path, name, 'report.json')) as f:
        report = json.load(f)
    assert report['scenario'] == name
    if preset(name).has_boundary_data:
        assert report['summary']['lifting_sup_l2'] > 0


@pytest.mark.slow
def test_manufactured_linear_convergence():
    table = convergence_table(preset('linear-gaussian'), 3)
    assert table.monotone
    assert all(abs(order - 2.0) <= 0.2 for order in table.orders)


@pytest.mark.slow
def test_manufactured_nonlinear_convergence_with_lifting():
    table = convergence_table(preset('hnls-sech'), 3)
    assert table.monotone
    assert min(table.orders) >= 1.8
    assert max(row.max_iterations for row in table.rows) <= 6
