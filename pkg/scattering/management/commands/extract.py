import csv
from pathlib import Path

import torch
import yaml

from scattering.checkpoints import load_params
from scattering.exceptions import ScatteringError, ShapeError
from scattering.extraction import extract_density, extract_hamiltonian, self_consistency
from scattering.linalg import CIRCULANT_TOLERANCE, COMPLEX
from scattering.management.base import ScatteringCommand
from scattering.networks import ModelKind
from scattering.theories import MomentumGrid, Sample, TheoryConfig

MATRIX_COLUMNS = ('row', 'col', 're', 'im')


def write_matrix(matrix: torch.Tensor, path: Path, metadata: dict) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(MATRIX_COLUMNS)
            rows, cols = matrix.shape
            for row in range(rows):
                for col in range(cols):
                    value = complex(matrix[row, col].item())
                    writer.writerow([row, col, repr(value.real), repr(value.imag)])
        with path.with_suffix('.yaml').open('w') as handle:
            yaml.safe_dump(metadata, handle, sort_keys=False)
    except OSError as e:
        raise ScatteringError(f"could not write {path}: {e}") from e
    return path


class Command(ScatteringCommand):
    help = 'Extract the Hamiltonian (node checkpoints) or the density kernel (fnde_mod checkpoints)'

    def add_arguments(self, parser):
        self.add_common_arguments(parser, training=False)
        parser.add_argument('checkpoint', type=str, help='Checkpoint written by train')
        parser.add_argument('--coupling', type=float, default=0.1, help='Coupling for Hamiltonian extraction')
        parser.add_argument('--mass', type=float, default=0.5, help='Mass for Hamiltonian extraction')
        parser.add_argument('--time', type=float, default=1.0, help='Extraction time T')
        parser.add_argument('--tolerance', type=float, default=CIRCULANT_TOLERANCE,
                            help='Relative deviation allowed from doubly-block circulant structure')

    def run(self, **options):
        params = load_params(options['checkpoint'])
        base = self.grid(options, n_p=params.n_p)
        grid = MomentumGrid(n_p=params.n_p, p_min=base.p_min, p_max=params.p_scale)
        stem = Path(options['checkpoint']).stem
        out = self.output_dir(options)
        metadata = {
            'kind': params.kind.value, 'theory': self.theory(options).value, 'order': self.order(options),
            'coupling': options['coupling'], 'mass': options['mass'], 'time': options['time'], 'n_p': grid.n_p,
        }

        if params.kind is ModelKind.NODE:
            config = TheoryConfig(theory=self.theory(options), coupling=options['coupling'],
                                  mass=options['mass'], order=self.order(options))
            sample = Sample(config=config, grid=grid, target=torch.zeros(grid.n_p, grid.n_p, dtype=COMPLEX))
            steps = int(self.loader(options).resolve('training', 'steps', None, 10))
            h = extract_hamiltonian(params, sample, time=options['time'], steps=steps)
            residual = self_consistency(h, h.s_matrix, h.field_output)
            path = write_matrix(h.matrix, out / f"{stem}_hamiltonian.csv", {**metadata, 'self_consistency': residual})
            self.stdout.write(f'self_consistency={residual:.3e}')
            self.stdout.write(self.style.SUCCESS(f'Hamiltonian written to {path}'))
        elif params.kind is ModelKind.FNDE_MOD:
            density = extract_density(params, grid, tolerance=options['tolerance'])
            path = write_matrix(density.kernel, out / f"{stem}_density.csv", {
                **metadata, 'shape': list(density.kernel.shape), 'positions': density.positions.tolist(),
            })
            self.stdout.write(self.style.SUCCESS(f'Density kernel written to {path}'))
        else:
            raise ShapeError(f"extraction needs a node or fnde_mod checkpoint, got {params.kind.value}")
