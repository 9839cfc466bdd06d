import logging
from pathlib import Path
from typing import Any, Dict, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

SECTIONS = ('data', 'model', 'training', 'experiment')


class RunConfigLoader:
    """Loads run settings from a TOML configuration file."""

    def __init__(self, config_file_path: Optional[str] = None):
        """
        Initialize the loader with an optional custom configuration file path.

        Args:
            config_file_path: Path to the TOML file. If None, uses SCATTERING_CONFIG_FILE.
        """
        if config_file_path:
            self.config_file_path = Path(config_file_path)
        else:
            try:
                from django.conf import settings
                self.config_file_path = Path(settings.SCATTERING_CONFIG_FILE)
            except (ImportError, RuntimeError, AttributeError):
                # Fallback for non-Django environments
                self.config_file_path = Path.cwd() / 'scattering.toml'

        self._config_cache = None
        self._last_modified = None

    def load_config_from_toml(self) -> Dict[str, Dict[str, Any]]:
        """
        Load the run configuration.

        Expected TOML format (every table optional):

        [data]
        theory = "phi4"
        order = 1
        n_p = 10
        p_min = 0.0
        p_max = 2.0
        couplings = [0.1, 0.2, 0.3, 0.4]
        masses = [0.5, 1.0, 1.5, 2.0]

        [model]
        kind = "fnde"
        modes = 32
        hidden = 100

        [training]
        epochs = 400
        lr0 = 0.02
        lr_drops = [100, 250]
        steps = 10
        seeds = 5

        [experiment]
        models = ["fnde", "fnde_mod", "fno", "node"]
        theories = ["phi4", "scalar_yukawa", "scalar_qed"]
        orders = [1, 2, 3]
        ratio_max = 2.0
        discretizations = [10, 20, 50]

        A missing file is an empty configuration.
        """
        if not self.config_file_path.exists():
            logger.debug(f"No run configuration at {self.config_file_path}")
            return {}

        modified = self.config_file_path.stat().st_mtime
        if self._config_cache is not None and self._last_modified == modified:
            return self._config_cache

        try:
            with self.config_file_path.open('rb') as handle:
                loaded = tomllib.load(handle)
        except tomllib.TOMLDecodeError as e:
            raise ConfigurationError(f"invalid TOML in {self.config_file_path}: {e}") from e
        except OSError as e:
            raise ConfigurationError(f"could not read {self.config_file_path}: {e}") from e

        unknown = sorted(set(loaded) - set(SECTIONS))
        if unknown:
            raise ConfigurationError(f"unknown section(s) in {self.config_file_path}: {', '.join(unknown)}")
        for name, section in loaded.items():
            if not isinstance(section, dict):
                raise ConfigurationError(f"section '{name}' in {self.config_file_path} must be a table")

        self._config_cache = loaded
        self._last_modified = modified
        logger.info(f"Loaded run configuration from {self.config_file_path}")
        return loaded

    def get_section(self, name: str) -> Dict[str, Any]:
        return dict(self.load_config_from_toml().get(name, {}))

    def resolve(self, section: str, key: str, flag_value: Any = None, default: Any = None) -> Any:
        """Flag value if given, else the file value, else ``default``."""
        if flag_value is not None:
            return flag_value
        return self.get_section(section).get(key, default)
