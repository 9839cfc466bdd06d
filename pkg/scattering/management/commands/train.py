from scattering.checkpoints import save_params
from scattering.datasets import read_dataset
from scattering.experiments import HISTORY_COLUMNS, ExperimentReport
from scattering.management.base import ScatteringCommand
from scattering.reports import emit_csv
from scattering.theories import generate_dataset, regenerate, validation_grid
from scattering.training import train


class Command(ScatteringCommand):
    help = 'Train one model kind per seed; writes a checkpoint per seed and the loss history CSV'

    def add_arguments(self, parser):
        self.add_common_arguments(parser)
        parser.add_argument('--dataset', type=str, help='Train on a dataset CSV written by generate')

    def run(self, **options):
        kind = self.model_kind(options)
        config = self.train_config(options)
        out = self.output_dir(options)

        if options.get('dataset'):
            dataset = read_dataset(options['dataset'])
            p = dataset.provenance
            val_dataset = regenerate(dataset, validation_grid(dataset.grid))
            theory, order = p['theory'], p['order']
        else:
            theory, order = self.theory(options).value, self.order(options)
            grid = self.grid(options)
            couplings, masses = self.conditions(options)
            dataset = generate_dataset(theory, order, grid, couplings, masses)
            val_dataset = regenerate(dataset, validation_grid(grid))

        stem = f"{kind.value}_{theory}_order{order}"
        report = ExperimentReport(name=f"{stem}_history", columns=HISTORY_COLUMNS)
        self.stdout.write(f'Training {kind.value} on {len(dataset)} {theory} samples '
                          f'for {config.epochs} epochs over {config.seeds} seed(s)...')
        for seed in range(config.seeds):
            params, history = train(kind, dataset, val_dataset, config, seed=seed, **self.model_options(options))
            checkpoint = save_params(params, out / f"{stem}_seed{seed}.yaml")
            for epoch, (train_loss, val_loss) in enumerate(zip(history.train, history.val)):
                report.rows.append({'epoch': epoch, 'seed': seed, 'model': kind.value, 'theory': theory,
                                    'order': order, 'train_loss': train_loss, 'val_loss': val_loss})
            final = f'{history.train[-1]:.6e}' if history.train else 'n/a'
            self.stdout.write(f'seed={seed} final_train_loss={final} checkpoint={checkpoint}')

        path = emit_csv(report, out / f"{report.name}.csv")
        self.stdout.write(self.style.SUCCESS(f'Loss history written to {path}'))
