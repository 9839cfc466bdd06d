import csv
import logging
from pathlib import Path
from typing import Dict, List, Tuple

import tomli_w
import torch

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .exceptions import ScatteringError
from .linalg import COMPLEX
from .theories import Dataset, MomentumGrid, Sample, TheoryConfig, default_cutoff, target_digest

logger = logging.getLogger(__name__)

DATASET_COLUMNS = ('theory', 'order', 'lambda', 'mass', 'n_p', 'p_min', 'p_max', 'row', 'col', 're', 'im')


def sidecar_path(path: Path) -> Path:
    return Path(path).with_suffix('.toml')


def write_dataset(dataset: Dataset, path) -> Path:
    """One CSV line per matrix entry plus a TOML provenance sidecar."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(DATASET_COLUMNS)
            for sample in dataset.samples:
                c, g = sample.config, sample.grid
                target = sample.target
                for row in range(g.n_p):
                    for col in range(g.n_p):
                        value = complex(target[row, col].item())
                        writer.writerow([
                            c.theory.value, c.order, repr(c.coupling), repr(c.mass),
                            g.n_p, repr(g.p_min), repr(g.p_max),
                            row, col, repr(value.real), repr(value.imag),
                        ])
        with sidecar_path(path).open('wb') as handle:
            tomli_w.dump(dict(sorted(dataset.provenance.items())), handle)
    except OSError as e:
        raise ScatteringError(f"could not write dataset to {path}: {e}") from e
    logger.info(f"Wrote {len(dataset)} samples to {path}")
    return path


def read_dataset(path) -> Dataset:
    """Rebuild a Dataset from its CSV; the sidecar, when present, restores the provenance record."""
    path = Path(path)
    entries: Dict[Tuple, List] = {}
    order_of_keys: List[Tuple] = []
    try:
        with path.open(newline='') as handle:
            reader = csv.DictReader(handle)
            if tuple(reader.fieldnames or ()) != DATASET_COLUMNS:
                raise ScatteringError(f"{path} does not carry the dataset header {','.join(DATASET_COLUMNS)}")
            for line in reader:
                key = (line['theory'], int(line['order']), float(line['lambda']), float(line['mass']),
                       int(line['n_p']), float(line['p_min']), float(line['p_max']))
                if key not in entries:
                    entries[key] = []
                    order_of_keys.append(key)
                entries[key].append((int(line['row']), int(line['col']), float(line['re']), float(line['im'])))
        provenance = {}
        if sidecar_path(path).exists():
            with sidecar_path(path).open('rb') as handle:
                provenance = tomllib.load(handle)
    except OSError as e:
        raise ScatteringError(f"could not read dataset from {path}: {e}") from e
    except (KeyError, ValueError) as e:
        # TOMLDecodeError is a ValueError
        raise ScatteringError(f"malformed dataset file {path}: {e}") from e

    offset = float(provenance.get('grid', {}).get('offset', 0.0))
    samples = []
    for key in order_of_keys:
        theory, order, coupling, mass, n_p, p_min, p_max = key
        target = torch.zeros(n_p, n_p, dtype=COMPLEX)
        for row, col, re, im in entries[key]:
            target[row, col] = complex(re, im)
        samples.append(Sample(
            config=TheoryConfig(theory=theory, coupling=coupling, mass=mass, order=order),
            grid=MomentumGrid(n_p=n_p, p_min=p_min, p_max=p_max, offset=offset),
            target=target,
        ))
    if not provenance and samples:
        first = samples[0]
        provenance = {
            'theory': first.config.theory.value,
            'order': first.config.order,
            'grid': first.grid.as_dict(),
            'cutoff': default_cutoff(first.grid),
            'couplings': sorted({s.config.coupling for s in samples}),
            'masses': sorted({s.config.mass for s in samples}),
            'count': len(samples),
            'sha256': target_digest(samples),
        }
    logger.info(f"Read {len(samples)} samples from {path}")
    return Dataset(samples=samples, provenance=provenance)
