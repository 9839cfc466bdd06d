import logging

from django.apps import AppConfig
from django.conf import settings

logger = logging.getLogger(__name__)


class ScatteringConfig(AppConfig):
    name = 'scattering'
    verbose_name = 'Neural differential equations for scattering matrices'

    def ready(self):
        import torch

        threads = getattr(settings, 'SCATTERING_TORCH_THREADS', 1)
        torch.set_num_threads(threads)
        logger.debug(f"torch configured with {threads} intra-op thread(s)")
