"""
Recover physics from trained parameters.

NODE:     dS/dt = (1/i) H S, so H(T) = i R(z(T), T)|_S  S(T)^-1 where R|_S is
          the S-channel block of the learned field at the final state.
FNDE_MOD: the S-channel multiplier on the real-FFT half-plane satisfies
          [W + kappa]_fi = exp(-i(pi/2 + p.x)) Hbar_fi, with H_I the
          doubly-block circulant form of Hbar. The density kernel has shape
          n_p x (n_p // 2 + 1).
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import torch

from .exceptions import ShapeError
from .integrator import TimeSpan, integrate
from .linalg import (CIRCULANT_TOLERANCE, COMPLEX, REAL, as_complex, circulant_extract, dft2, hermitian_extend,
                     idft2, mat_inverse, relative_error)
from .networks import (ModelKind, ModelParams, conditions_of, init_params, initial_state, mod_multiplier,
                       node_field)
from .theories import MomentumGrid, Sample

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HamiltonianMatrix:
    matrix: torch.Tensor
    time: float
    coupling: float
    mass: float
    s_matrix: Optional[torch.Tensor] = None
    field_output: Optional[torch.Tensor] = None


@dataclass(frozen=True)
class DensityKernel:
    kernel: torch.Tensor
    positions: torch.Tensor
    operator: torch.Tensor


def density_shape(n_p: int):
    return n_p, n_p // 2 + 1


def hamiltonian_from_field(field_output: torch.Tensor, s: torch.Tensor) -> torch.Tensor:
    """H = i R S^-1, the inverse of R = (1/i) H S."""
    return 1j * (as_complex(field_output) @ mat_inverse(s))


def extract_hamiltonian(params: ModelParams, sample: Sample, time: float = 1.0, steps: int = 10) -> HamiltonianMatrix:
    """Integrate a NODE to ``time`` and read H off the field at the final state."""
    if params.kind is not ModelKind.NODE:
        raise ShapeError(f"Hamiltonian extraction needs a node model, got {params.kind.value}")
    if time <= 0:
        raise ValueError(f"extraction time must be positive, got {time}")
    points, couplings, masses = conditions_of(sample)
    if points.numel() != params.n_p:
        raise ShapeError(f"sample grid has {points.numel()} points, model was built for {params.n_p}")
    tensors = params.tensors
    with torch.no_grad():
        z0 = initial_state(points, couplings, masses, params.p_scale)
        z_final = integrate(lambda z, t: node_field(z, t, tensors), z0, TimeSpan(0.0, time, steps))
        field_output = node_field(z_final, time, tensors)[0, 0]
        s = z_final[0, 0]
        matrix = hamiltonian_from_field(field_output, s)
    logger.debug(f"Extracted H at T={time} for lambda={couplings[0].item()}, m={masses[0].item()}: "
                 f"|H|_F={torch.linalg.vector_norm(matrix).item():.3e}")
    return HamiltonianMatrix(
        matrix=matrix, time=time, coupling=couplings[0].item(), mass=masses[0].item(),
        s_matrix=s, field_output=field_output,
    )


def self_consistency(h: Union[HamiltonianMatrix, torch.Tensor], s: torch.Tensor, field_output: torch.Tensor) -> float:
    """||R - (1/i) H S||_F / ||R||_F."""
    matrix = h.matrix if isinstance(h, HamiltonianMatrix) else as_complex(h)
    return relative_error(-1j * (matrix @ as_complex(s)), as_complex(field_output))


def position_grid(grid: MomentumGrid) -> torch.Tensor:
    """DFT-conjugate positions x_j = 2 pi j / (n_p dp)."""
    j = torch.arange(grid.n_p, dtype=REAL)
    return 2 * math.pi * j / (grid.n_p * grid.spacing)


def phase_factor(grid: MomentumGrid, sign: int = 1) -> torch.Tensor:
    """exp(sign * i (pi/2 + p_f x_f + p_i x_i)) over the (f, i) entries of the grid."""
    px = grid.points() * position_grid(grid)
    angle = math.pi / 2 + px[:, None] + px[None, :]
    return torch.polar(torch.ones_like(angle), sign * angle)


def s_channel_operator(params: ModelParams, n: int) -> torch.Tensor:
    """
    The (n^2 x n^2) matrix of the learned S-channel block of a modified FNDE,
    assembled column by column from its response to unit inputs.
    """
    multiplier = hermitian_extend(mod_multiplier(params.tensors, (n, n))[0, 0], n)
    basis = torch.eye(n * n, dtype=COMPLEX).reshape(n * n, n, n)
    responses = idft2(multiplier * dft2(basis))
    return responses.reshape(n * n, n * n).T


def extract_density(params: ModelParams, grid: MomentumGrid, tolerance: float = CIRCULANT_TOLERANCE) -> DensityKernel:
    """
    Density kernel of a modified FNDE.

    The learned S-channel operator is reduced to its generating convolution
    kernel (CirculantStructureError when it is not doubly-block circulant).
    The kernel's spectrum on the n_p x (n_p // 2 + 1) half-plane is the
    multiplier W_00 + kappa_00; phase-correcting it entrywise gives Hbar.
    """
    if params.kind is not ModelKind.FNDE_MOD:
        raise ShapeError(f"density extraction needs a fnde_mod model, got {params.kind.value}")
    n = grid.n_p
    if n != params.n_p:
        raise ShapeError(f"grid has {n} points, model was built for {params.n_p}")
    h = density_shape(n)[1]
    with torch.no_grad():
        operator = s_channel_operator(params, n)
        convolution = circulant_extract(operator, (n, n), grid=(n, n), tolerance=tolerance)
        kernel = dft2(convolution)[:, :h] * phase_factor(grid, +1)[:, :h]
    logger.debug(f"Extracted density kernel of shape {tuple(kernel.shape)} on n_p={n}")
    return DensityKernel(kernel=kernel, positions=position_grid(grid), operator=operator)


def density_params(
    kernel: torch.Tensor,
    grid: MomentumGrid,
    mixing_share: complex = 0.0,
    base: Optional[ModelParams] = None,
) -> ModelParams:
    """
    FNDE_MOD parameters whose S-channel multiplier reproduces ``kernel`` exactly.

    ``mixing_share`` is carried by W_00 and the remainder by the kappa spectrum;
    the other channel blocks are copied from ``base`` when given.
    """
    n = grid.n_p
    shape = density_shape(n)
    if tuple(kernel.shape) != shape:
        raise ShapeError(f"density kernel must have shape {shape}, got {tuple(kernel.shape)}")
    if base is None:
        base = init_params(ModelKind.FNDE_MOD, n, modes=n, p_scale=grid.p_max)
    if base.kind is not ModelKind.FNDE_MOD or tuple(base.tensors['spectral'].shape[2:4]) != shape:
        raise ShapeError("planting a density kernel needs fnde_mod parameters with every mode retained")
    multiplier = as_complex(kernel) * phase_factor(grid, -1)[:, :shape[1]]

    mixing = torch.view_as_complex(base.tensors['mixing'].clone().contiguous())
    spectral = torch.view_as_complex(base.tensors['spectral'].clone().contiguous())
    mixing[0, 0] = complex(mixing_share)
    spectral[0, 0] = multiplier - complex(mixing_share)
    return base.with_tensors({
        'mixing': torch.view_as_real(mixing).clone(),
        'spectral': torch.view_as_real(spectral).clone(),
    })
