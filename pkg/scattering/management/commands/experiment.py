from scattering.experiments import ALL_MODELS, ALL_THEORIES, ExperimentName, ExperimentSpec, run_experiment
from scattering.management.base import ScatteringCommand
from scattering.reports import emit_report
from scattering.theories import Theory, extrapolation_ratios


class Command(ScatteringCommand):
    help = 'Run one of the experiment sweeps and write <name>.csv, <name>.yaml and <name>.svg'

    def add_arguments(self, parser):
        parser.add_argument('name', type=str, choices=[n.value for n in ExperimentName], help='Experiment to run')
        self.add_common_arguments(parser)
        parser.add_argument('--ratio-max', dest='ratio_max', type=float, help='Largest extrapolation ratio')

    def run(self, **options):
        name = ExperimentName.parse(options['name'])
        loader = self.loader(options)

        models = (options['model'],) if options.get('model') else tuple(
            loader.resolve('experiment', 'models', None, [m.value for m in ALL_MODELS]))
        if options.get('theory'):
            theories = (options['theory'],)
        elif name in (ExperimentName.CONVERGENCE, ExperimentName.VALIDATION):
            theories = tuple(loader.resolve('experiment', 'theories', None, [t.value for t in ALL_THEORIES]))
        else:
            theories = (Theory.PHI4.value,)

        grid = self.grid(options)
        couplings, masses = self.conditions(options)
        ratio_max = float(loader.resolve('experiment', 'ratio_max', options.get('ratio_max'), 2.0))
        spec = ExperimentSpec(
            name=name,
            models=models,
            theories=theories,
            order=self.order(options),
            orders=tuple(loader.resolve('experiment', 'orders', None, (1, 2, 3))),
            grid=grid,
            train=self.train_config(options),
            couplings=couplings,
            masses=masses,
            ratios=extrapolation_ratios(ratio_max),
            discretizations=tuple(loader.resolve('experiment', 'discretizations', None,
                                                 (grid.n_p,) if not options.get('protocol') else (10, 20, 50))),
            output_dir=self.output_dir(options),
            **self.model_options(options),
        )

        self.stdout.write(f'Running {name.value} experiment...')
        report = run_experiment(spec)
        paths = emit_report(report, spec.output_dir)
        for failure in report.failures:
            self.stdout.write(self.style.WARNING(f"failed run: {failure}"))
        self.stdout.write(f'runtime_seconds={report.runtime_seconds:.1f}')
        self.stdout.write(self.style.SUCCESS(
            f"Wrote {len(report.rows)} rows to {paths['csv']} (plot {paths['svg']})"
        ))
