"""
Report writers: CSV rows, a YAML sidecar with provenance and final-epoch
summaries, and an SVG plot of the seed-mean with its min/max envelope.
"""

import csv
import logging
from pathlib import Path
from typing import Dict, Optional

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import yaml  # noqa: E402

from .exceptions import ScatteringError  # noqa: E402
from .experiments import ExperimentReport  # noqa: E402

logger = logging.getLogger(__name__)

INT_COLUMNS = {'epoch', 'seed', 'order', 'n_p', 'row', 'col'}
FLOAT_COLUMNS = {'mse', 'train_loss', 'val_loss', 'ratio', 'fractional_loss', 're', 'im', 'lambda', 'mass'}


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(column: str, text: str):
    if column in INT_COLUMNS:
        return int(text)
    if column in FLOAT_COLUMNS:
        return float(text)
    return text


def emit_csv(report: ExperimentReport, path) -> Path:
    """One row per report row, floats in shortest round-trip form."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(report.columns)
            for row in report.rows:
                writer.writerow([_format(row[c]) for c in report.columns])
    except OSError as e:
        raise ScatteringError(f"could not write report {path}: {e}") from e
    logger.info(f"Wrote {len(report.rows)} rows to {path}")
    return path


def read_csv(path, name: Optional[str] = None) -> ExperimentReport:
    """Reload a report written by emit_csv (plus its sidecar when present)."""
    path = Path(path)
    try:
        with path.open(newline='') as handle:
            reader = csv.reader(handle)
            columns = tuple(next(reader, ()))
            rows = [{c: _parse(c, v) for c, v in zip(columns, line)} for line in reader if line]
    except OSError as e:
        raise ScatteringError(f"could not read report {path}: {e}") from e

    report = ExperimentReport(name=name or path.stem, columns=columns, rows=rows)
    sidecar = path.with_suffix('.yaml')
    if sidecar.exists():
        with sidecar.open() as handle:
            meta = yaml.safe_load(handle) or {}
        report.name = name or meta.get('name', report.name)
        report.provenance = dict(meta.get('provenance') or {})
        report.failures = list(meta.get('failures') or [])
        report.runtime_seconds = float(meta.get('runtime_seconds', 0.0))
        report.spec = dict(meta.get('spec') or {})
    return report


def emit_sidecar(report: ExperimentReport, path) -> Path:
    path = Path(path)
    document = {
        'name': report.name,
        'columns': list(report.columns),
        'rows': len(report.rows),
        'metric': report.metric,
        'runtime_seconds': float(report.runtime_seconds),
        'provenance': dict(report.provenance),
        'summary': report.final_summary(),
        'failures': list(report.failures),
        'spec': report.spec,
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('w') as handle:
            yaml.safe_dump(document, handle, sort_keys=False)
    except OSError as e:
        raise ScatteringError(f"could not write report sidecar {path}: {e}") from e
    return path


def _label(key) -> str:
    return ' '.join(f"{value}" for _, value in key) or 'all'


def emit_plot(report: ExperimentReport, path, metric: Optional[str] = None) -> Path:
    """Seed-mean curve with a shaded min/max envelope per series, log-scaled loss axis."""
    path = Path(path)
    metric = metric or report.metric
    series: Dict = report.series(metric)

    fig, ax = plt.subplots(figsize=(8, 5))
    try:
        for key, s in series.items():
            line, = ax.plot(s['x'], s['mean'], label=_label(key))
            ax.fill_between(s['x'], s['low'], s['high'], color=line.get_color(), alpha=0.2)
        if series:
            ax.set_yscale('log')
            ax.legend(fontsize='small')
        else:
            ax.text(0.5, 0.5, 'no data', ha='center', va='center', transform=ax.transAxes)
        ax.set_xlabel(report.axis)
        ax.set_ylabel(metric)
        ax.set_title(report.name)
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format='svg')
    except OSError as e:
        raise ScatteringError(f"could not write plot {path}: {e}") from e
    finally:
        plt.close(fig)
    logger.info(f"Wrote plot {path}")
    return path


def emit_report(report: ExperimentReport, out_dir) -> Dict[str, Path]:
    """Write ``<name>.csv``, ``<name>.yaml`` and ``<name>.svg`` under ``out_dir``."""
    out_dir = Path(out_dir)
    return {
        'csv': emit_csv(report, out_dir / f"{report.name}.csv"),
        'yaml': emit_sidecar(report, out_dir / f"{report.name}.yaml"),
        'svg': emit_plot(report, out_dir / f"{report.name}.svg"),
    }
