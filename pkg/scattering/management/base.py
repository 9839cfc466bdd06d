import logging
from pathlib import Path
from typing import Optional, Tuple

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from scattering.config import RunConfigLoader
from scattering.exceptions import ScatteringError
from scattering.networks import DEFAULT_HIDDEN, DEFAULT_MODES, DEFAULT_STEPS, ModelKind
from scattering.theories import DEFAULT_COUPLINGS, DEFAULT_MASSES, MomentumGrid, Theory
from scattering.training import TrainConfig

logger = logging.getLogger(__name__)

# CI-sized defaults; --protocol restores the full training protocol
SMOKE_DEFAULTS = {'epochs': 10, 'seeds': 1, 'n_p': 6}
PROTOCOL_DEFAULTS = {'epochs': 400, 'seeds': 5, 'n_p': 10}


class ScatteringCommand(BaseCommand):
    """
    Base for the scattering commands.

    Subclasses implement ``run``; library errors are turned into one
    ``error=<Name> message="..."`` line on stderr and exit status 2.
    """

    def add_common_arguments(self, parser, training: bool = True):
        parser.add_argument('--config', type=str, help='Run configuration TOML (default SCATTERING_CONFIG_FILE)')
        parser.add_argument('--theory', type=str, choices=[t.value for t in Theory], help='Field theory')
        parser.add_argument('--order', type=int, choices=(1, 2, 3), help='Perturbative order')
        parser.add_argument('--np', dest='n_p', type=int, help='Momentum grid points')
        parser.add_argument('--out', type=str, help='Output directory (default SCATTERING_OUTPUT_DIR)')
        if training:
            parser.add_argument('--model', type=str, choices=[k.value for k in ModelKind], help='Model kind')
            parser.add_argument('--epochs', type=int, help='Training epochs')
            parser.add_argument('--seeds', type=int, help='Number of seeds')
            parser.add_argument(
                '--protocol',
                action='store_true',
                help='Use the full protocol defaults (400 epochs, 5 seeds, 10 grid points)',
            )

    def handle(self, *args, **options):
        try:
            return self.run(**options)
        except (ScatteringError, ValueError) as e:
            logger.error(f"{self.__module__.rsplit('.', 1)[-1]} failed: {type(e).__name__}: {e}")
            message = str(e).replace('"', "'")
            self.stderr.write(f'error={type(e).__name__} message="{message}"')
            raise CommandError(str(e), returncode=2)

    def run(self, **options):
        raise NotImplementedError('subclasses of ScatteringCommand must provide a run() method')

    # option resolution: flag, then configuration file, then defaults

    def loader(self, options) -> RunConfigLoader:
        if not hasattr(self, '_loader'):
            self._loader = RunConfigLoader(options.get('config'))
        return self._loader

    def _default(self, options, key):
        table = PROTOCOL_DEFAULTS if options.get('protocol') else SMOKE_DEFAULTS
        return table[key]

    def output_dir(self, options) -> Path:
        out = Path(options.get('out') or settings.SCATTERING_OUTPUT_DIR)
        out.mkdir(parents=True, exist_ok=True)
        return out

    def theory(self, options) -> Theory:
        return Theory.parse(self.loader(options).resolve('data', 'theory', options.get('theory'), Theory.PHI4.value))

    def order(self, options) -> int:
        return int(self.loader(options).resolve('data', 'order', options.get('order'), 1))

    def model_kind(self, options) -> ModelKind:
        return ModelKind.parse(self.loader(options).resolve('model', 'kind', options.get('model'), ModelKind.FNDE.value))

    def grid(self, options, n_p: Optional[int] = None) -> MomentumGrid:
        loader = self.loader(options)
        if n_p is None:
            n_p = loader.resolve('data', 'n_p', options.get('n_p'), self._default(options, 'n_p'))
        return MomentumGrid(
            n_p=int(n_p),
            p_min=float(loader.resolve('data', 'p_min', None, 0.0)),
            p_max=float(loader.resolve('data', 'p_max', None, 2.0)),
        )

    def conditions(self, options) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
        loader = self.loader(options)
        couplings = tuple(float(c) for c in loader.resolve('data', 'couplings', None, DEFAULT_COUPLINGS))
        masses = tuple(float(m) for m in loader.resolve('data', 'masses', None, DEFAULT_MASSES))
        return couplings, masses

    def model_options(self, options) -> dict:
        loader = self.loader(options)
        return {
            'modes': int(loader.resolve('model', 'modes', None, DEFAULT_MODES)),
            'hidden': int(loader.resolve('model', 'hidden', None, DEFAULT_HIDDEN)),
        }

    def train_config(self, options) -> TrainConfig:
        loader = self.loader(options)
        couplings, masses = self.conditions(options)
        return TrainConfig.for_epochs(
            int(loader.resolve('training', 'epochs', options.get('epochs'), self._default(options, 'epochs'))),
            lr_drops=tuple(loader.resolve('training', 'lr_drops', None, (100, 250))),
            lr0=float(loader.resolve('training', 'lr0', None, 0.02)),
            steps=int(loader.resolve('training', 'steps', None, DEFAULT_STEPS)),
            seeds=int(loader.resolve('training', 'seeds', options.get('seeds'), self._default(options, 'seeds'))),
            batch=len(couplings) * len(masses),
        )
