from scattering.datasets import write_dataset
from scattering.management.base import ScatteringCommand
from scattering.theories import generate_dataset, regenerate, validation_grid


class Command(ScatteringCommand):
    help = 'Generate a perturbative S-matrix dataset (CSV plus TOML provenance sidecar)'

    def add_arguments(self, parser):
        self.add_common_arguments(parser, training=False)
        parser.add_argument(
            '--validation',
            action='store_true',
            help='Also write the half-step validation dataset',
        )

    def run(self, **options):
        theory = self.theory(options)
        order = self.order(options)
        grid = self.grid(options)
        couplings, masses = self.conditions(options)
        out = self.output_dir(options)
        stem = f"{theory.value}_order{order}_np{grid.n_p}"

        self.stdout.write(f'Generating {theory.value} order-{order} dataset on {grid.n_p} momenta...')
        dataset = generate_dataset(theory, order, grid, couplings, masses)
        path = write_dataset(dataset, out / f"{stem}.csv")
        self.stdout.write(f'sha256={dataset.provenance_hash}')

        if options.get('validation'):
            val_dataset = regenerate(dataset, validation_grid(grid))
            val_path = write_dataset(val_dataset, out / f"{stem}_validation.csv")
            self.stdout.write(f'Validation dataset written to {val_path}')

        self.stdout.write(self.style.SUCCESS(f'Wrote {len(dataset)} samples to {path}'))
