from scattering.checkpoints import load_params
from scattering.experiments import ExperimentReport
from scattering.management.base import ScatteringCommand
from scattering.reports import emit_csv
from scattering.theories import MomentumGrid, default_cutoff, extrapolation_ratios, generate_dataset, scaled_grid
from scattering.training import evaluate

EVALUATION_COLUMNS = ('model', 'theory', 'order', 'ratio', 'mse', 'fractional_loss')


class Command(ScatteringCommand):
    help = 'Evaluate a checkpoint on regenerated analytic targets, optionally on stretched momentum ranges'

    def add_arguments(self, parser):
        self.add_common_arguments(parser, training=False)
        parser.add_argument('checkpoint', type=str, help='Checkpoint written by train')
        parser.add_argument('--ratio-max', dest='ratio_max', type=float,
                            help='Also evaluate on grids with p_max stretched up to this ratio')

    def run(self, **options):
        params = load_params(options['checkpoint'])
        theory = self.theory(options)
        order = self.order(options)
        couplings, masses = self.conditions(options)
        base = self.grid(options, n_p=params.n_p)
        # the model was trained up to p_scale
        grid = MomentumGrid(n_p=params.n_p, p_min=base.p_min, p_max=params.p_scale)
        ratio_max = self.loader(options).resolve('experiment', 'ratio_max', options.get('ratio_max'), 1.0)
        steps = int(self.loader(options).resolve('training', 'steps', None, 10))

        report = ExperimentReport(name=f"{params.kind.value}_{theory.value}_order{order}_evaluation",
                                  columns=EVALUATION_COLUMNS)
        for ratio in extrapolation_ratios(float(ratio_max)):
            dataset = generate_dataset(theory, order, scaled_grid(grid, ratio), couplings, masses,
                                       cutoff=default_cutoff(grid))
            result = evaluate(params.kind, params, dataset, steps)
            report.rows.append({'model': params.kind.value, 'theory': theory.value, 'order': order,
                                'ratio': ratio, 'mse': result.mse, 'fractional_loss': result.fractional})
            self.stdout.write(f'ratio={ratio} mse={result.mse:.6e} fractional_loss={result.fractional:.6e}')

        path = emit_csv(report, self.output_dir(options) / f"{report.name}.csv")
        self.stdout.write(self.style.SUCCESS(f'Evaluation written to {path}'))
