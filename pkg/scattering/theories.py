"""
Synthetic perturbative S-matrices for three scalar field theories.

The amplitudes are a regulated stand-in family that keeps the power structure
of the perturbative series: for phi^4 the order-k term carries lambda^k, for
scalar Yukawa and scalar QED every order carries an extra lambda^2. Loop
bubbles are cut off at ten times the largest grid momentum and propagators are
shifted off the real axis by eps = 0.1 m^2, so every entry is finite. The
cutoff belongs to the dataset: grids derived from a training grid (validation
and stretched extrapolation grids) reuse the training cutoff, which is kept in
the provenance record.

Kinematics are 1+1 dimensional in the centre-of-mass frame.
"""

import enum
import hashlib
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import torch

from .linalg import COMPLEX, REAL

logger = logging.getLogger(__name__)

DEFAULT_COUPLINGS = (0.1, 0.2, 0.3, 0.4)
DEFAULT_MASSES = (0.5, 1.0, 1.5, 2.0)
CUTOFF_RATIO = 10.0
PROPAGATOR_SHIFT = 0.1
# max |S_fi| over the default coupling/mass box, every theory and order, n_p <= 50, p in [0, 2]
S_MAGNITUDE_BOUND = 50.0


class Theory(str, enum.Enum):
    PHI4 = 'phi4'
    SCALAR_YUKAWA = 'scalar_yukawa'
    SCALAR_QED = 'scalar_qed'

    @classmethod
    def parse(cls, value) -> 'Theory':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace('-', '_'))
        except ValueError:
            choices = ', '.join(t.value for t in cls)
            raise ValueError(f"unknown theory '{value}' (choose from {choices})")


@dataclass(frozen=True)
class MomentumGrid:
    """
    n_p momenta p_k = p_min + (k + offset) * (p_max - p_min) / (n_p - 1), clamped to p_max.

    ``offset`` is a fraction of one grid spacing; training grids use 0.
    """
    n_p: int = 10
    p_min: float = 0.0
    p_max: float = 2.0
    offset: float = 0.0

    def __post_init__(self):
        if self.n_p < 2:
            raise ValueError(f"momentum grid needs n_p >= 2, got {self.n_p}")
        if not (self.p_max > self.p_min >= 0):
            raise ValueError(f"momentum grid needs p_max > p_min >= 0, got [{self.p_min}, {self.p_max}]")

    @property
    def spacing(self) -> float:
        return (self.p_max - self.p_min) / (self.n_p - 1)

    def points(self) -> torch.Tensor:
        k = torch.arange(self.n_p, dtype=REAL)
        return torch.clamp(self.p_min + (k + self.offset) * self.spacing, max=self.p_max)

    def as_dict(self) -> Dict[str, float]:
        return {'n_p': self.n_p, 'p_min': self.p_min, 'p_max': self.p_max, 'offset': self.offset}


DEFAULT_GRID = MomentumGrid()


@dataclass(frozen=True)
class TheoryConfig:
    theory: Theory
    coupling: float
    mass: float
    order: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'theory', Theory.parse(self.theory))
        if self.coupling < 0:
            raise ValueError(f"coupling must be non-negative, got {self.coupling}")
        if self.mass <= 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if self.order not in (1, 2, 3):
            raise ValueError(f"perturbative order must be 1, 2 or 3, got {self.order}")


@dataclass(frozen=True)
class Sample:
    config: TheoryConfig
    grid: MomentumGrid
    target: torch.Tensor


@dataclass
class Dataset:
    samples: List[Sample]
    provenance: Dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)

    def targets(self) -> torch.Tensor:
        return torch.stack([s.target for s in self.samples])

    @property
    def grid(self) -> MomentumGrid:
        return self.samples[0].grid

    @property
    def provenance_hash(self) -> str:
        return self.provenance.get('sha256') or target_digest(self.samples)


def target_digest(samples: Sequence[Sample]) -> str:
    """SHA-256 over the conditions and target bytes of every sample, in order."""
    digest = hashlib.sha256()
    for sample in samples:
        c = sample.config
        digest.update(f"{c.theory.value},{c.order},{c.coupling!r},{c.mass!r};".encode())
        digest.update(sample.target.contiguous().numpy().tobytes())
    return digest.hexdigest()


def mandelstam(p_i, p_f, m):
    """
    1+1 dimensional centre-of-mass Mandelstam variables:
    s = 4(p_i^2 + m^2), t = -(p_f - p_i)^2, u = -(p_f + p_i)^2.
    """
    s = 4 * (p_i ** 2 + m ** 2)
    t = -(p_f - p_i) ** 2
    u = -(p_f + p_i) ** 2
    return s, t, u


def bubble(q, mass: float, cutoff: float):
    """Regulated one-loop bubble (1/16 pi^2) ln((cutoff^2 + |q|) / (m^2 + |q|))."""
    q = torch.as_tensor(q, dtype=REAL).abs()
    return torch.log((cutoff ** 2 + q) / (mass ** 2 + q)) / (16 * math.pi ** 2)


def coupling_power(theory, order: int) -> int:
    """Power of lambda carried by the isolated order-``order`` term."""
    return order if Theory.parse(theory) is Theory.PHI4 else 2 * order


def _propagator(x, mass: float) -> torch.Tensor:
    eps = PROPAGATOR_SHIFT * mass ** 2
    return 1 / torch.complex(x - mass ** 2, torch.full_like(x, -eps))


def order_terms(config: TheoryConfig, p_f, p_i, cutoff: float) -> List[torch.Tensor]:
    """Per-order amplitude contributions [M_1, ..., M_order] (complex tensors)."""
    p_f = torch.as_tensor(p_f, dtype=REAL)
    p_i = torch.as_tensor(p_i, dtype=REAL)
    p_f, p_i = torch.broadcast_tensors(p_f, p_i)
    lam, m = config.coupling, config.mass
    s, t, u = mandelstam(p_i, p_f, m)

    if config.theory is Theory.PHI4:
        b_s, b_t, b_u = (bubble(x, m, cutoff) for x in (s, t, u))
        terms = [
            torch.full_like(s, -lam),
            lam ** 2 * (b_s + b_t + b_u),
            lam ** 3 * (b_s ** 2 + b_t ** 2 + b_u ** 2),
        ]
        return [term.to(COMPLEX) for term in terms[:config.order]]

    if config.theory is Theory.SCALAR_YUKAWA:
        base = lam ** 2 * (_propagator(t, m) + _propagator(u, m))
    else:
        base = lam ** 2 * ((s - u) * _propagator(t, m) + (s - t) * _propagator(u, m) + 2)
    loop = (lam ** 2 * bubble(s, m, cutoff)).to(COMPLEX)
    return [base * loop ** k for k in range(config.order)]


def default_cutoff(grid: MomentumGrid = DEFAULT_GRID) -> float:
    """Bubble cutoff of a training grid, ten times its largest momentum."""
    return CUTOFF_RATIO * grid.p_max


def amplitude(config: TheoryConfig, p_f, p_i, cutoff: Optional[float] = None):
    """Sum of the per-order contributions up to ``config.order`` (cutoff of the default grid unless given)."""
    return sum(order_terms(config, p_f, p_i, default_cutoff() if cutoff is None else cutoff))


def s_matrix_from_points(config: TheoryConfig, points: torch.Tensor, cutoff: float) -> torch.Tensor:
    """S_fi = delta_fi + i M(p_f, p_i); rows index p_f, columns p_i."""
    points = torch.as_tensor(points, dtype=REAL)
    m = amplitude(config, points[:, None], points[None, :], cutoff)
    return torch.eye(points.numel(), dtype=COMPLEX) + 1j * m


def s_matrix(config: TheoryConfig, grid: MomentumGrid, cutoff: Optional[float] = None) -> torch.Tensor:
    return s_matrix_from_points(config, grid.points(), default_cutoff(grid) if cutoff is None else cutoff)


def order_contribution(config: TheoryConfig, grid: MomentumGrid, cutoff: Optional[float] = None) -> torch.Tensor:
    """The isolated i*M_k term of order ``config.order`` on ``grid``."""
    points = grid.points()
    cutoff = default_cutoff(grid) if cutoff is None else cutoff
    terms = order_terms(config, points[:, None], points[None, :], cutoff)
    return 1j * terms[-1]


def generate_dataset(
    theory,
    order: int = 1,
    grid: MomentumGrid = DEFAULT_GRID,
    couplings: Sequence[float] = DEFAULT_COUPLINGS,
    masses: Sequence[float] = DEFAULT_MASSES,
    cutoff: Optional[float] = None,
) -> Dataset:
    """
    Cartesian product of couplings and masses, coupling-major.

    ``cutoff`` defaults to the one of ``grid``; pass the training cutoff when
    ``grid`` is a validation or stretched grid.
    """
    theory = Theory.parse(theory)
    cutoff = default_cutoff(grid) if cutoff is None else float(cutoff)
    samples = []
    for coupling in couplings:
        for mass in masses:
            config = TheoryConfig(theory=theory, coupling=float(coupling), mass=float(mass), order=order)
            samples.append(Sample(config=config, grid=grid, target=s_matrix(config, grid, cutoff)))
    provenance = {
        'theory': theory.value,
        'order': order,
        'grid': grid.as_dict(),
        'cutoff': cutoff,
        'couplings': [float(c) for c in couplings],
        'masses': [float(m) for m in masses],
        'count': len(samples),
        'sha256': target_digest(samples),
    }
    logger.debug(f"Generated {len(samples)} {theory.value} order-{order} samples on n_p={grid.n_p}")
    return Dataset(samples=samples, provenance=provenance)


def regenerate(dataset: Dataset, grid: MomentumGrid) -> Dataset:
    """Analytic targets for the same theory, order, conditions and cutoff on another grid."""
    p = dataset.provenance
    return generate_dataset(p['theory'], p['order'], grid, p['couplings'], p['masses'],
                            cutoff=p.get('cutoff', default_cutoff(dataset.grid)))


def validation_grid(grid: MomentumGrid) -> MomentumGrid:
    """Same range with points moved half a spacing up (the last one clamped to p_max)."""
    return replace(grid, offset=grid.offset + 0.5)


def scaled_grid(grid: MomentumGrid, ratio: float) -> MomentumGrid:
    """Grid whose p_max is stretched by ``ratio``; p_min and n_p are kept."""
    if ratio < 1:
        raise ValueError(f"extrapolation ratio must be >= 1, got {ratio}")
    return replace(grid, p_max=grid.p_max * ratio)


def extrapolation_ratios(ratio_max: float = 2.0, step: float = 0.1) -> Tuple[float, ...]:
    count = int(round((ratio_max - 1.0) / step))
    return tuple(round(1.0 + k * step, 10) for k in range(count + 1))
