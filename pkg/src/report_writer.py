import csv
import json
import logging
import os
from typing import Any, Dict, List, Mapping, Sequence

import numpy as np
from jinja2 import Environment, FileSystemLoader, TemplateError

logger = logging.getLogger(__name__)

# Configuration
TEMPLATE_DIR = 'templates'
OUTPUT_DIR = 'output'

CSV_COLUMNS = ('t', 'l2', 'wl2', 'flux', 'e_ident', 'nl_energy', 'gamma_term', 'iters')


def _plain(value: Any) -> Any:
    """Converts numpy scalars/arrays and complex numbers into JSON-friendly values."""
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if np.isfinite(v) else None
    if isinstance(value, (complex, np.complexfloating)):
        return {'re': float(np.real(value)), 'im': float(np.imag(value))}
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def write_series_csv(path: str, series: Mapping[str, Sequence[float]]) -> str:
    """
    Writes the per-step series with the fixed column set.

    Missing columns are written as empty cells so downstream plotting keeps a
    stable header.
    """
    n = len(series['t'])
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for i in range(n):
            row = []
            for col in CSV_COLUMNS:
                column = series.get(col)
                if column is None:
                    row.append('')
                    continue
                v = column[i]
                row.append(repr(int(v)) if col == 'iters' else ('' if not np.isfinite(v) else repr(float(v))))
            writer.writerow(row)
    return path


def write_json_report(path: str, report: Dict[str, Any]) -> str:
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(_plain(report), f, indent=2, sort_keys=True)
    return path


def render_report(context: Dict[str, Any], out_dir: str, template_dir: str = TEMPLATE_DIR) -> List[str]:
    """
    Renders the Markdown and HTML run reports into ``out_dir``.

    Rendering problems are logged and skipped; the CSV and JSON artifacts
    written before are the authoritative output.
    """
    env = Environment(loader=FileSystemLoader(template_dir))
    written = []
    for template_name, filename in (('report.md.j2', 'report.md'), ('report.html.j2', 'report.html')):
        try:
            content = env.get_template(template_name).render(_plain(context))
        except TemplateError as e:
            logger.error("[report] failed to render %s: %s", template_name, e)
            continue
        path = os.path.join(out_dir, filename)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(content)
        logger.info("[report] Generated: %s", path)
        written.append(path)
    return written
