import csv
import json
import os

import numpy as np

from report_writer import CSV_COLUMNS, render_report, write_json_report, write_series_csv

TEMPLATE_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'templates')


def sample_context():
    return {
        'scenario': 'unit',
        'passed': True,
        'threshold': 1e-12,
        'grid': {'L': 10.0, 'N': 64, 'T': 0.5, 'M': 32, 'dx': 10.0 / 64, 'dt': 0.5 / 32},
        'coefficients': {'a': 1.0, 'b': 0.0, 'lambda': 0.0, 'beta': 0.0, 'gamma': 0.0, 'p': 1.0},
        'weight': 'exp:0.5',
        'h': None,
        'summary': {'max_l2_balance': np.float64(0.0), 'max_picard_iterations': np.int64(2)},
        'weak_form': [{'name': 'bump', 'residual': 3e-9}],
        'convergence': None,
        'timings': {'solve': 0.01},
    }


def test_series_csv_keeps_the_fixed_header(tmp_path):
    series = {
        't': np.array([0.0, 0.5]),
        'l2': np.array([1.0, 0.9]),
        'e_ident': np.array([np.nan, 1e-3]),
        'iters': np.array([0, 3]),
    }
    path = write_series_csv(str(tmp_path / 'nested' / 'series.csv'), series)
    with open(path, newline='') as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == CSV_COLUMNS
    first = dict(zip(CSV_COLUMNS, rows[1]))
    assert first['e_ident'] == ''
    assert first['wl2'] == ''
    assert first['iters'] == '0'
    second = dict(zip(CSV_COLUMNS, rows[2]))
    assert float(second['l2']) == 0.9
    assert second['iters'] == '3'


def test_json_report_converts_numpy_and_complex_values(tmp_path):
    report = {
        'values': np.array([1.0, np.inf]),
        'trace': 1 + 2j,
        'flag': np.bool_(True),
        'count': np.int32(7),
        'nested': ({'x': np.float32(0.5)},),
    }
    path = write_json_report(str(tmp_path / 'report.json'), report)
    with open(path) as f:
        data = json.load(f)
    assert data['values'] == [1.0, None]
    assert data['trace'] == {'re': 1.0, 'im': 2.0}
    assert data['flag'] is True
    assert data['count'] == 7
    assert data['nested'] == [{'x': 0.5}]


def test_render_report_writes_markdown_and_html(tmp_path):
    paths = render_report(sample_context(), str(tmp_path), TEMPLATE_DIR)
    assert [os.path.basename(p) for p in paths] == ['report.md', 'report.html']
    markdown = (tmp_path / 'report.md').read_text()
    assert 'Scenario report: unit' in markdown
    assert 'bump' in markdown


def test_missing_templates_are_skipped(tmp_path):
    assert render_report(sample_context(), str(tmp_path), str(tmp_path / 'nowhere')) == []
    assert not (tmp_path / 'report.md').exists()
