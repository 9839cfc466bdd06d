"""
Neural differential equation models of the scattering matrix.

Four model kinds map an initial hidden state to a predicted S-matrix:

* NODE      three dense affine maps over the flattened real state (tanh between)
* FNDE      sigma{W z + F^-1[kappa . F(z)]} - z, integrated in time
* FNDE_MOD  F^-1[(W + kappa) . F(z)], integrated in time, linear in z; the
            multiplier is held on the real-FFT half-plane and extended by
            Hermitian symmetry
* FNO       sigma{W z + F^-1[kappa . F(z)]}, applied once

Hidden states are complex tensors of shape (..., C, n_p, n_p). Channel 0 is the
evolving S-matrix; channels 1-3 hold the conditioning fields. Parameters are
stored as real float64 tensors; complex parameters keep their real and
imaginary parts in a trailing axis of size two.
"""

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Mapping, Tuple

import torch

from .exceptions import ShapeError
from .integrator import TimeSpan, integrate
from .linalg import (COMPLEX, REAL, dft2, embed_half_modes, embed_modes, half_columns, hermitian_extend,
                     idft2)

logger = logging.getLogger(__name__)

CHANNELS = 4
DEFAULT_HIDDEN = 100
DEFAULT_MODES = 32
DEFAULT_STEPS = 10


class ModelKind(str, enum.Enum):
    NODE = 'node'
    FNDE = 'fnde'
    FNDE_MOD = 'fnde_mod'
    FNO = 'fno'

    @property
    def integrated(self) -> bool:
        return self is not ModelKind.FNO

    @classmethod
    def parse(cls, value) -> 'ModelKind':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace('-', '_'))
        except ValueError:
            choices = ', '.join(k.value for k in cls)
            raise ValueError(f"unknown model kind '{value}' (choose from {choices})")


@dataclass(frozen=True)
class ModelParams:
    """Named parameter store of one model, with the shape metadata it was built for."""
    kind: ModelKind
    n_p: int
    modes: int
    hidden: int
    p_scale: float
    tensors: Dict[str, torch.Tensor] = field(default_factory=dict)
    channels: int = CHANNELS

    def with_tensors(self, tensors: Mapping[str, torch.Tensor]) -> 'ModelParams':
        return replace(self, tensors=dict(tensors))

    def detached(self) -> 'ModelParams':
        return self.with_tensors({name: t.detach().clone() for name, t in self.tensors.items()})

    def parameter_count(self) -> int:
        """Number of real parameter components."""
        return sum(t.numel() for t in self.tensors.values())

    def complex_tensor(self, name: str) -> torch.Tensor:
        return torch.view_as_complex(self.tensors[name].contiguous())


def _state_dim(n_p: int, channels: int = CHANNELS) -> int:
    return 2 * channels * n_p * n_p


def layer_shapes(params: ModelParams) -> Tuple[Tuple[int, int], ...]:
    """(fan_in, fan_out) of each dense layer of a NODE model."""
    if params.kind is not ModelKind.NODE:
        raise ShapeError(f"{params.kind.value} models have no dense layers")
    return tuple(
        (params.tensors[f'layer{i}.weight'].shape[1], params.tensors[f'layer{i}.weight'].shape[0])
        for i in (1, 2, 3)
    )


def init_params(
    kind,
    n_p: int,
    modes: int = DEFAULT_MODES,
    seed: int = 0,
    hidden: int = DEFAULT_HIDDEN,
    p_scale: float = 1.0,
) -> ModelParams:
    """
    Deterministic pseudo-random parameters.

    Dense layers are uniform in +-1/sqrt(fan_in); spectral weights are complex
    uniform scaled by 1/(C*m^2); the channel-mixing operator W starts at zero.
    The mode cutoff is clamped to n_p. FNDE_MOD keeps min(m, n_p // 2 + 1)
    half-plane columns of kappa.
    """
    kind = ModelKind.parse(kind)
    if n_p < 2:
        raise ShapeError(f"momentum grid needs n_p >= 2, got {n_p}")
    if modes < 1:
        raise ShapeError(f"mode cutoff must be at least 1, got {modes}")
    generator = torch.Generator().manual_seed(seed)
    m = min(modes, n_p)
    tensors: Dict[str, torch.Tensor] = {}

    def uniform(shape, bound):
        return (2 * torch.rand(shape, generator=generator, dtype=REAL) - 1) * bound

    if kind is ModelKind.NODE:
        dim = _state_dim(n_p)
        widths = [(dim, hidden), (hidden, hidden), (hidden, dim)]
        for index, (fan_in, fan_out) in enumerate(widths, start=1):
            bound = 1 / math.sqrt(fan_in)
            tensors[f'layer{index}.weight'] = uniform((fan_out, fan_in), bound)
            tensors[f'layer{index}.bias'] = uniform((fan_out,), bound)
            if index == 1:
                tensors['layer1.time_weight'] = uniform((fan_out,), bound)
    else:
        scale = 1 / (CHANNELS * m * m)
        tensors['mixing'] = torch.zeros(CHANNELS, CHANNELS, 2, dtype=REAL)
        columns = min(m, half_columns(n_p)) if kind is ModelKind.FNDE_MOD else m
        tensors['spectral'] = scale * torch.rand(CHANNELS, CHANNELS, m, columns, 2, generator=generator, dtype=REAL)

    params = ModelParams(kind=kind, n_p=n_p, modes=m, hidden=hidden, p_scale=float(p_scale), tensors=tensors)
    logger.debug(f"Initialised {kind.value} parameters (n_p={n_p}, modes={m}, seed={seed}): "
                 f"{params.parameter_count()} real components")
    return params


def zero_params(kind, n_p: int, modes: int = DEFAULT_MODES, hidden: int = DEFAULT_HIDDEN,
                p_scale: float = 1.0) -> ModelParams:
    params = init_params(kind, n_p, modes=modes, hidden=hidden, p_scale=p_scale)
    return params.with_tensors({name: torch.zeros_like(t) for name, t in params.tensors.items()})


def initial_state(points: torch.Tensor, couplings: torch.Tensor, masses: torch.Tensor,
                  p_scale: float) -> torch.Tensor:
    """
    z(0) for a batch of conditions, shape (B, C, n_p, n_p).

    Channel 0 is the identity (free-theory S), channel 1 holds p_f/p_scale
    (constant along each row), channel 2 holds p_i/p_scale (constant along each
    column) and channel 3 the constant field lambda + i*m.
    """
    points = torch.as_tensor(points, dtype=REAL)
    couplings = torch.as_tensor(couplings, dtype=REAL).reshape(-1)
    masses = torch.as_tensor(masses, dtype=REAL).reshape(-1)
    n = points.numel()
    batch = couplings.numel()
    scaled = points / p_scale
    z = torch.zeros(batch, CHANNELS, n, n, dtype=COMPLEX)
    z[:, 0] = torch.eye(n, dtype=COMPLEX)
    z[:, 1] = scaled[:, None].expand(n, n).to(COMPLEX)
    z[:, 2] = scaled[None, :].expand(n, n).to(COMPLEX)
    z[:, 3] = torch.complex(couplings, masses)[:, None, None].expand(batch, n, n)
    return z


def complex_tanh(x: torch.Tensor) -> torch.Tensor:
    """tanh applied independently to the real and imaginary parts."""
    return torch.complex(torch.tanh(x.real), torch.tanh(x.imag))


def _require(tensors: Mapping[str, torch.Tensor], names, kind: str) -> None:
    missing = [name for name in names if name not in tensors]
    if missing:
        raise ShapeError(f"parameters are not of kind {kind}: missing {', '.join(missing)}")


def node_field(z: torch.Tensor, t: float, tensors: Mapping[str, torch.Tensor]) -> torch.Tensor:
    """affine -> tanh -> affine -> tanh -> affine over the flattened real state; t enters the first map."""
    _require(tensors, ('layer1.weight', 'layer2.weight', 'layer3.weight'), 'node')
    batch_shape = z.shape[:-3]
    x = torch.view_as_real(z).reshape(*batch_shape, -1)
    if x.shape[-1] != tensors['layer1.weight'].shape[1]:
        raise ShapeError(f"state of {x.shape[-1]} real components does not match "
                         f"first layer fan-in {tensors['layer1.weight'].shape[1]}")
    hidden = torch.nn.functional.linear(x, tensors['layer1.weight'], tensors['layer1.bias'])
    hidden = torch.tanh(hidden + t * tensors['layer1.time_weight'])
    hidden = torch.tanh(torch.nn.functional.linear(hidden, tensors['layer2.weight'], tensors['layer2.bias']))
    out = torch.nn.functional.linear(hidden, tensors['layer3.weight'], tensors['layer3.bias'])
    return torch.view_as_complex(out.reshape(*z.shape, 2).contiguous())


def spectral_weights(tensors: Mapping[str, torch.Tensor], shape) -> Tuple[torch.Tensor, torch.Tensor]:
    """Channel mixing W (C, C) and the kappa spectrum zero-padded to (C, C, n_f, n_i)."""
    _require(tensors, ('mixing', 'spectral'), 'fourier')
    mixing = torch.view_as_complex(tensors['mixing'].contiguous())
    kappa = embed_modes(torch.view_as_complex(tensors['spectral'].contiguous()), shape)
    return mixing, kappa


def _channel_mix(weights: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
    return torch.einsum('oi,...ixy->...oxy', weights, z)


def _spectral_contract(kernel: torch.Tensor, spectrum: torch.Tensor) -> torch.Tensor:
    return torch.einsum('oixy,...ixy->...oxy', kernel, spectrum)


def _check_channels(z: torch.Tensor, mixing: torch.Tensor) -> None:
    if z.ndim < 3 or z.shape[-3] != mixing.shape[-1]:
        raise ShapeError(f"hidden state shape {tuple(z.shape)} does not carry {mixing.shape[-1]} channels")


def _fourier_layer(z: torch.Tensor, tensors: Mapping[str, torch.Tensor]) -> torch.Tensor:
    mixing, kappa = spectral_weights(tensors, z.shape[-2:])
    _check_channels(z, mixing)
    return complex_tanh(_channel_mix(mixing, z) + idft2(_spectral_contract(kappa, dft2(z))))


def fnde_field(z: torch.Tensor, t: float, tensors: Mapping[str, torch.Tensor]) -> torch.Tensor:
    """sigma{W z + F^-1[kappa . F(z)]} - z; autonomous in t."""
    return _fourier_layer(z, tensors) - z


def mod_multiplier(tensors: Mapping[str, torch.Tensor], shape) -> torch.Tensor:
    """
    Half-plane multiplier W + kappa of a modified FNDE, shape (C, C, n_f, n_i // 2 + 1).

    W is added to every half-plane mode.
    """
    _require(tensors, ('mixing', 'spectral'), 'fnde_mod')
    mixing = torch.view_as_complex(tensors['mixing'].contiguous())
    kappa = embed_half_modes(torch.view_as_complex(tensors['spectral'].contiguous()), shape)
    return mixing[:, :, None, None] + kappa


def fnde_mod_field(z: torch.Tensor, t: float, tensors: Mapping[str, torch.Tensor]) -> torch.Tensor:
    """F^-1[(W + kappa) . F(z)] with the half-plane multiplier extended by Hermitian symmetry; linear in z."""
    half = mod_multiplier(tensors, z.shape[-2:])
    _check_channels(z, half[..., 0, 0])
    multiplier = hermitian_extend(half, z.shape[-1])
    return idft2(_spectral_contract(multiplier, dft2(z)))


def fno_forward(z: torch.Tensor, tensors: Mapping[str, torch.Tensor]) -> torch.Tensor:
    """Single Fourier layer sigma{W z + F^-1[kappa . F(z)]}, no integration."""
    return _fourier_layer(z, tensors)


FIELDS: Dict[ModelKind, Callable] = {
    ModelKind.NODE: node_field,
    ModelKind.FNDE: fnde_field,
    ModelKind.FNDE_MOD: fnde_mod_field,
}


def field_for(kind) -> Callable:
    kind = ModelKind.parse(kind)
    if kind not in FIELDS:
        raise ShapeError(f"{kind.value} models are not integrated and have no field")
    return FIELDS[kind]


def conditions_of(sample) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(grid points, couplings, masses) of a Sample or a Dataset."""
    if hasattr(sample, 'samples'):
        samples = sample.samples
        if not samples:
            raise ShapeError("cannot evaluate a model on an empty dataset")
        points = samples[0].grid.points()
        couplings = [s.config.coupling for s in samples]
        masses = [s.config.mass for s in samples]
    else:
        points = sample.grid.points()
        couplings = [sample.config.coupling]
        masses = [sample.config.mass]
    return points, torch.tensor(couplings, dtype=REAL), torch.tensor(masses, dtype=REAL)


def evolve(kind, params: ModelParams, z0: torch.Tensor, steps: int = DEFAULT_STEPS) -> torch.Tensor:
    """Final hidden state: integrate over t in [0, 1] for NDE kinds, one layer for FNO."""
    kind = ModelKind.parse(kind)
    if kind is not params.kind:
        raise ShapeError(f"parameters of kind {params.kind.value} cannot drive a {kind.value} model")
    if kind is ModelKind.FNO:
        return fno_forward(z0, params.tensors)
    model_field = FIELDS[kind]
    tensors = params.tensors
    return integrate(lambda z, t: model_field(z, t, tensors), z0, TimeSpan(0.0, 1.0, steps))


def forward(kind, params: ModelParams, sample, steps: int = DEFAULT_STEPS) -> torch.Tensor:
    """
    Predicted S-matrix (channel 0 of the final state).

    ``sample`` is a Sample (result shape (n_p, n_p)) or a Dataset (result shape
    (B, n_p, n_p)).
    """
    points, couplings, masses = conditions_of(sample)
    if points.numel() != params.n_p:
        raise ShapeError(f"sample grid has {points.numel()} points, model was built for {params.n_p}")
    z0 = initial_state(points, couplings, masses, params.p_scale)
    predicted = evolve(kind, params, z0, steps)[:, 0]
    return predicted if hasattr(sample, 'samples') else predicted[0]
