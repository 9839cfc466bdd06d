"""
Parameter checkpoints.

A checkpoint is a single YAML document:

    format: nde-scattering-params
    version: 1
    kind: fnde            # node | fnde | fnde_mod | fno
    n_p: 10
    modes: 10
    hidden: 100
    channels: 4
    p_scale: 2.0
    tensors:
      mixing: {shape: [4, 4, 2], data: [...]}     # flat, row-major
      spectral: {shape: [4, 4, 10, 10, 2], data: [...]}

Complex parameters keep their real and imaginary parts in the trailing axis
of size two.
"""

import logging
from pathlib import Path

import torch
import yaml

from .exceptions import CheckpointFormatError
from .linalg import REAL
from .networks import CHANNELS, ModelKind, ModelParams

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'nde-scattering-params'
CHECKPOINT_VERSION = 1

_Dumper = getattr(yaml, 'CSafeDumper', yaml.SafeDumper)
_Loader = getattr(yaml, 'CSafeLoader', yaml.SafeLoader)


def save_params(params: ModelParams, path) -> Path:
    path = Path(path)
    document = {
        'format': CHECKPOINT_FORMAT,
        'version': CHECKPOINT_VERSION,
        'kind': params.kind.value,
        'n_p': params.n_p,
        'modes': params.modes,
        'hidden': params.hidden,
        'channels': params.channels,
        'p_scale': float(params.p_scale),
        'tensors': {
            name: {'shape': list(t.shape), 'data': t.detach().reshape(-1).tolist()}
            for name, t in params.tensors.items()
        },
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('w') as handle:
            yaml.dump(document, handle, Dumper=_Dumper, default_flow_style=None, sort_keys=False)
    except OSError as e:
        raise CheckpointFormatError(f"could not write checkpoint {path}: {e}") from e
    logger.info(f"Saved {params.kind.value} checkpoint to {path}")
    return path


def load_params(path) -> ModelParams:
    path = Path(path)
    try:
        with path.open() as handle:
            document = yaml.load(handle, Loader=_Loader)
    except OSError as e:
        raise CheckpointFormatError(f"could not read checkpoint {path}: {e}") from e
    except yaml.YAMLError as e:
        raise CheckpointFormatError(f"checkpoint {path} is not valid YAML: {e}") from e

    if not isinstance(document, dict) or document.get('format') != CHECKPOINT_FORMAT:
        raise CheckpointFormatError(f"{path} is not a {CHECKPOINT_FORMAT} document")
    if document.get('version') != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"{path} has unsupported checkpoint version {document.get('version')}")
    try:
        tensors = {}
        for name, entry in document['tensors'].items():
            tensor = torch.tensor(entry['data'], dtype=REAL)
            tensors[name] = tensor.reshape(entry['shape'])
        return ModelParams(
            kind=ModelKind.parse(document['kind']),
            n_p=int(document['n_p']),
            modes=int(document['modes']),
            hidden=int(document['hidden']),
            p_scale=float(document['p_scale']),
            tensors=tensors,
            channels=int(document.get('channels', CHANNELS)),
        )
    except (KeyError, TypeError, ValueError, RuntimeError) as e:
        raise CheckpointFormatError(f"malformed checkpoint {path}: {e}") from e
