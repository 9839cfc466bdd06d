"""
Experiment drivers: convergence, validation, higher-order, extrapolation and
discretization sweeps. Each returns an ExperimentReport whose rows depend
only on the experiment settings and the seeds.
"""

import enum
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .exceptions import ConfigurationError, ScatteringError
from .networks import DEFAULT_HIDDEN, DEFAULT_MODES, ModelKind
from .theories import (DEFAULT_COUPLINGS, DEFAULT_GRID, DEFAULT_MASSES, Dataset, MomentumGrid, Theory,
                       extrapolation_ratios, generate_dataset, regenerate, scaled_grid, validation_grid)
from .training import TrainConfig, evaluate, train

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ('epoch', 'seed', 'model', 'theory', 'order', 'train_loss', 'val_loss')
DISCRETIZATION_COLUMNS = HISTORY_COLUMNS + ('n_p',)
EXTRAPOLATION_COLUMNS = ('model', 'theory', 'order', 'ratio', 'seed', 'fractional_loss')

ALL_MODELS = (ModelKind.FNDE, ModelKind.FNDE_MOD, ModelKind.FNO, ModelKind.NODE)
ALL_THEORIES = (Theory.PHI4, Theory.SCALAR_YUKAWA, Theory.SCALAR_QED)


class ExperimentName(str, enum.Enum):
    CONVERGENCE = 'convergence'
    VALIDATION = 'validation'
    HIGHER_ORDER = 'higher_order'
    EXTRAPOLATION = 'extrapolation'
    DISCRETIZATION = 'discretization'

    @classmethod
    def parse(cls, value) -> 'ExperimentName':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace('-', '_'))
        except ValueError:
            choices = ', '.join(n.value for n in cls)
            raise ConfigurationError(f"unknown experiment '{value}' (choose from {choices})")


@dataclass(frozen=True)
class ExperimentSpec:
    name: ExperimentName
    models: Tuple[ModelKind, ...] = ALL_MODELS
    theories: Tuple[Theory, ...] = ALL_THEORIES
    order: int = 1
    orders: Tuple[int, ...] = (1, 2, 3)
    grid: MomentumGrid = DEFAULT_GRID
    train: TrainConfig = TrainConfig()
    couplings: Tuple[float, ...] = DEFAULT_COUPLINGS
    masses: Tuple[float, ...] = DEFAULT_MASSES
    ratios: Tuple[float, ...] = extrapolation_ratios(2.0)
    discretizations: Tuple[int, ...] = (10, 20, 50)
    modes: int = DEFAULT_MODES
    hidden: int = DEFAULT_HIDDEN
    output_dir: Optional[Path] = None

    def __post_init__(self):
        object.__setattr__(self, 'name', ExperimentName.parse(self.name))
        object.__setattr__(self, 'models', tuple(ModelKind.parse(m) for m in self.models))
        object.__setattr__(self, 'theories', tuple(Theory.parse(t) for t in self.theories))
        self.validate()

    def validate(self) -> None:
        if not self.models:
            raise ConfigurationError("an experiment needs at least one model kind")
        if not self.theories:
            raise ConfigurationError("an experiment needs at least one theory")
        if self.name is ExperimentName.HIGHER_ORDER:
            if self.theories != (Theory.PHI4,):
                raise ConfigurationError("the higher-order experiment runs on phi4 only")
            if not self.orders or any(o not in (1, 2, 3) for o in self.orders):
                raise ConfigurationError(f"higher-order experiment needs orders in 1..3, got {list(self.orders)}")
        if self.name is ExperimentName.EXTRAPOLATION:
            if not self.ratios or any(r < 1 for r in self.ratios):
                raise ConfigurationError(f"extrapolation needs ratios >= 1, got {list(self.ratios)}")
        if self.name is ExperimentName.DISCRETIZATION:
            if not self.discretizations or any(n < 2 for n in self.discretizations):
                raise ConfigurationError(f"discretization needs n_p values >= 2, got {list(self.discretizations)}")

    def as_dict(self) -> Dict:
        return {
            'name': self.name.value,
            'models': [m.value for m in self.models],
            'theories': [t.value for t in self.theories],
            'order': self.order,
            'orders': list(self.orders),
            'grid': self.grid.as_dict(),
            'train': {
                'epochs': self.train.epochs, 'lr0': self.train.lr0, 'lr_drops': list(self.train.lr_drops),
                'batch': self.train.batch, 'steps': self.train.steps, 'seeds': self.train.seeds,
            },
            'couplings': list(self.couplings),
            'masses': list(self.masses),
            'ratios': list(self.ratios),
            'discretizations': list(self.discretizations),
            'modes': self.modes,
            'hidden': self.hidden,
        }


@dataclass
class ExperimentReport:
    name: str
    columns: Tuple[str, ...]
    rows: List[Dict] = field(default_factory=list)
    provenance: Dict[str, str] = field(default_factory=dict)
    failures: List[Dict] = field(default_factory=list)
    runtime_seconds: float = 0.0
    spec: Dict = field(default_factory=dict)

    @property
    def metric(self) -> str:
        if 'fractional_loss' in self.columns:
            return 'fractional_loss'
        return 'val_loss' if self.name in (ExperimentName.VALIDATION.value, ExperimentName.HIGHER_ORDER.value,
                                           ExperimentName.DISCRETIZATION.value) else 'train_loss'

    @property
    def axis(self) -> str:
        return 'ratio' if 'ratio' in self.columns else 'epoch'

    def series(self, metric: Optional[str] = None) -> Dict[Tuple, Dict[str, List[float]]]:
        """
        Seed-mean and min/max envelope of ``metric`` per series.

        A series is keyed by every column except the seed, the x axis and the
        loss columns.
        """
        metric = metric or self.metric
        value_columns = {'seed', self.axis, 'train_loss', 'val_loss', 'fractional_loss'}
        key_columns = [c for c in self.columns if c not in value_columns]
        grouped: Dict[Tuple, Dict] = {}
        for row in self.rows:
            key = tuple((c, row[c]) for c in key_columns)
            grouped.setdefault(key, {}).setdefault(row[self.axis], []).append(row[metric])
        result = {}
        for key, by_x in grouped.items():
            xs = sorted(by_x)
            result[key] = {
                'x': xs,
                'mean': [sum(by_x[x]) / len(by_x[x]) for x in xs],
                'low': [min(by_x[x]) for x in xs],
                'high': [max(by_x[x]) for x in xs],
            }
        return result

    def final_summary(self) -> List[Dict]:
        """Mean and envelope at the last x value of each series."""
        summary = []
        for key, series in self.series().items():
            if not series['x']:
                continue
            entry = {column: value for column, value in key}
            entry.update({
                self.axis: series['x'][-1], 'metric': self.metric,
                'mean': series['mean'][-1], 'low': series['low'][-1], 'high': series['high'][-1],
            })
            summary.append(entry)
        return summary


def _datasets(spec: ExperimentSpec, theory: Theory, order: int, grid: MomentumGrid,
              provenance: Dict[str, str]) -> Tuple[Dataset, Dataset]:
    dataset = generate_dataset(theory, order, grid, spec.couplings, spec.masses)
    val_dataset = generate_dataset(theory, order, validation_grid(grid), spec.couplings, spec.masses,
                                   cutoff=dataset.provenance['cutoff'])
    label = f"{theory.value}/order{order}/n_p{grid.n_p}"
    provenance[f"{label}/train"] = dataset.provenance_hash
    provenance[f"{label}/validation"] = val_dataset.provenance_hash
    return dataset, val_dataset


def _record_failure(report: ExperimentReport, error: ScatteringError, **context) -> None:
    logger.warning(f"{report.name}: run {context} failed: {error}")
    report.failures.append({**{k: (v.value if isinstance(v, enum.Enum) else v) for k, v in context.items()},
                            'error': type(error).__name__, 'message': str(error)})


def _history_sweep(spec: ExperimentSpec, report: ExperimentReport, theory: Theory, order: int,
                   grid: MomentumGrid, extra: Optional[Dict] = None) -> None:
    dataset, val_dataset = _datasets(spec, theory, order, grid, report.provenance)
    for kind in spec.models:
        for seed in range(spec.train.seeds):
            try:
                _, history = train(kind, dataset, val_dataset, spec.train, seed=seed,
                                   modes=spec.modes, hidden=spec.hidden)
            except ScatteringError as e:
                _record_failure(report, e, model=kind, theory=theory, order=order, seed=seed, n_p=grid.n_p)
                continue
            for epoch, (train_loss, val_loss) in enumerate(zip(history.train, history.val)):
                row = {'epoch': epoch, 'seed': seed, 'model': kind.value, 'theory': theory.value,
                       'order': order, 'train_loss': train_loss, 'val_loss': val_loss}
                row.update(extra or {})
                report.rows.append(row)


def _new_report(spec: ExperimentSpec, columns: Tuple[str, ...]) -> ExperimentReport:
    logger.info(f"Running {spec.name.value} experiment: models={[m.value for m in spec.models]}, "
                f"theories={[t.value for t in spec.theories]}, epochs={spec.train.epochs}, seeds={spec.train.seeds}")
    return ExperimentReport(name=spec.name.value, columns=columns, spec=spec.as_dict())


def _finish(report: ExperimentReport, started: float) -> ExperimentReport:
    report.runtime_seconds = time.time() - started
    logger.info(f"{report.name} finished in {report.runtime_seconds:.1f}s: {len(report.rows)} rows, "
                f"{len(report.failures)} failed run(s)")
    return report


def _theory_sweep(spec: ExperimentSpec) -> ExperimentReport:
    started = time.time()
    report = _new_report(spec, HISTORY_COLUMNS)
    for theory in spec.theories:
        _history_sweep(spec, report, theory, spec.order, spec.grid)
    return _finish(report, started)


def run_convergence(spec: ExperimentSpec) -> ExperimentReport:
    """Every model on every theory at ``spec.order``; summarised by the training loss."""
    return _theory_sweep(replace(spec, name=ExperimentName.CONVERGENCE))


def run_validation(spec: ExperimentSpec) -> ExperimentReport:
    """The convergence runs summarised by the loss on the half-step validation grid."""
    return _theory_sweep(replace(spec, name=ExperimentName.VALIDATION))


def run_higher_order(spec: ExperimentSpec) -> ExperimentReport:
    """phi4 targets truncated at each of ``spec.orders``; order 1 is the control."""
    started = time.time()
    report = _new_report(spec, HISTORY_COLUMNS)
    for order in spec.orders:
        _history_sweep(spec, report, Theory.PHI4, order, spec.grid)
    return _finish(report, started)


def run_extrapolation(spec: ExperimentSpec) -> ExperimentReport:
    """
    Train on ``spec.grid`` and evaluate the fractional loss on grids whose p_max
    is stretched by each ratio, with targets regenerated analytically.
    """
    started = time.time()
    report = _new_report(spec, EXTRAPOLATION_COLUMNS)
    theory = spec.theories[0]
    dataset, val_dataset = _datasets(spec, theory, spec.order, spec.grid, report.provenance)
    scaled = {}
    for ratio in spec.ratios:
        scaled[ratio] = regenerate(dataset, scaled_grid(spec.grid, ratio))
        report.provenance[f"{theory.value}/order{spec.order}/ratio{ratio}"] = scaled[ratio].provenance_hash
    for kind in spec.models:
        for seed in range(spec.train.seeds):
            try:
                params, _ = train(kind, dataset, val_dataset, spec.train, seed=seed,
                                  modes=spec.modes, hidden=spec.hidden)
                losses = [(ratio, evaluate(kind, params, scaled[ratio], spec.train.steps).fractional)
                          for ratio in spec.ratios]
            except ScatteringError as e:
                _record_failure(report, e, model=kind, theory=theory, order=spec.order, seed=seed)
                continue
            for ratio, loss in losses:
                report.rows.append({'model': kind.value, 'theory': theory.value, 'order': spec.order,
                                    'ratio': ratio, 'seed': seed, 'fractional_loss': loss})
    return _finish(report, started)


def run_discretization(spec: ExperimentSpec) -> ExperimentReport:
    """phi4 at ``spec.order`` over the same momentum range at each n_p."""
    started = time.time()
    report = _new_report(spec, DISCRETIZATION_COLUMNS)
    theory = spec.theories[0]
    for n_p in spec.discretizations:
        _history_sweep(spec, report, theory, spec.order, replace(spec.grid, n_p=n_p), extra={'n_p': n_p})
    return _finish(report, started)


RUNNERS = {
    ExperimentName.CONVERGENCE: run_convergence,
    ExperimentName.VALIDATION: run_validation,
    ExperimentName.HIGHER_ORDER: run_higher_order,
    ExperimentName.EXTRAPOLATION: run_extrapolation,
    ExperimentName.DISCRETIZATION: run_discretization,
}


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    return RUNNERS[spec.name](spec)
