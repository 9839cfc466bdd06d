"""
Fixed-step fourth-order Runge-Kutta integration with gradients taken through
the unrolled solver steps (discretize-then-optimize).
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import torch

from .exceptions import IntegrationError, ScatteringError

logger = logging.getLogger(__name__)

Field = Callable[[torch.Tensor, float], torch.Tensor]


@dataclass(frozen=True)
class TimeSpan:
    """Integration window [t0, t1] split into ``steps`` equal RK4 steps."""
    t0: float = 0.0
    t1: float = 1.0
    steps: int = 10

    def __post_init__(self):
        if not self.t1 > self.t0:
            raise ValueError(f"time span requires t1 > t0, got [{self.t0}, {self.t1}]")
        if self.steps < 1:
            raise ValueError(f"time span requires at least one step, got {self.steps}")

    @property
    def step_size(self) -> float:
        return (self.t1 - self.t0) / self.steps


def _check_finite(z: torch.Tensor, t: float) -> None:
    if not bool(torch.isfinite(torch.view_as_real(z) if z.is_complex() else z).all()):
        logger.error(f"Non-finite state encountered at t={t:.6g}")
        raise IntegrationError(f"non-finite state at t={t:.6g}")


def rk4_step(field: Field, z: torch.Tensor, t: float, h: float) -> torch.Tensor:
    """Classical RK4 update z + (h/6)(k1 + 2k2 + 2k3 + k4)."""
    if h <= 0:
        raise ValueError(f"step size must be positive, got {h}")
    k1 = field(z, t)
    k2 = field(z + (h / 2) * k1, t + h / 2)
    k3 = field(z + (h / 2) * k2, t + h / 2)
    k4 = field(z + h * k3, t + h)
    for k in (k1, k2, k3, k4):
        _check_finite(k, t)
    return z + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(
    field: Field,
    z0: torch.Tensor,
    span: TimeSpan = TimeSpan(),
    record: bool = False,
):
    """
    Integrate dz/dt = field(z, t) from span.t0 to span.t1.

    Returns z(t1), or (z(t1), trajectory) when ``record`` is set; the trajectory
    holds the state at every step boundary including z0.
    """
    h = span.step_size
    z = z0
    trajectory: List[torch.Tensor] = [z0] if record else []
    for step in range(span.steps):
        t = span.t0 + step * h
        z = rk4_step(field, z, t, h)
        _check_finite(z, t + h)
        if record:
            trajectory.append(z)
    if record:
        return z, trajectory
    return z


def backprop_through_integration(
    loss: Callable[[torch.Tensor], torch.Tensor],
    field: Callable[[torch.Tensor, float, Dict[str, torch.Tensor]], torch.Tensor],
    params: Dict[str, torch.Tensor],
    z0: torch.Tensor,
    span: TimeSpan = TimeSpan(),
) -> Tuple[Dict[str, torch.Tensor], torch.Tensor]:
    """
    Exact gradient of loss(integrate(field, z0, span)) with respect to every
    parameter tensor and to z0, computed by reverse-mode differentiation through
    the unrolled RK4 steps.

    Parameters are real tensors (complex values live in a trailing axis of two);
    a complex z0 receives the gradient d/dRe + i d/dIm.
    """
    names = list(params)
    leaves = [params[name].detach().requires_grad_(True) for name in names]
    z0_leaf = z0.detach().requires_grad_(True)
    bound = dict(zip(names, leaves))
    try:
        value = loss(integrate(lambda z, t: field(z, t, bound), z0_leaf, span))
        grads = torch.autograd.grad(value, leaves + [z0_leaf], allow_unused=True)
    except (RuntimeError, TypeError) as e:
        raise ScatteringError(f"could not differentiate through integration: {e}") from e
    param_grads = {
        name: torch.zeros_like(leaf) if grad is None else grad
        for name, leaf, grad in zip(names, leaves, grads[:-1])
    }
    z0_grad = torch.zeros_like(z0_leaf) if grads[-1] is None else grads[-1]
    return param_grads, z0_grad


def finite_diff_check(
    loss: Callable[[Dict[str, torch.Tensor]], torch.Tensor],
    params: Dict[str, torch.Tensor],
    epsilon: float = 1e-5,
    floor: float = 1e-12,
    analytic: Optional[Dict[str, torch.Tensor]] = None,
    noise: float = 0.0,
) -> float:
    """
    Compare reverse-mode gradients of ``loss(params)`` with central differences.

    Returns max over all real parameter components of
    |g_ad - g_fd| / (|g_fd| + floor). Components where both |g_ad| and |g_fd|
    are at most ``noise`` are below the resolution of the central difference
    and are left out of the maximum; the default compares every component.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if noise < 0:
        raise ValueError(f"noise floor must be non-negative, got {noise}")

    base = {name: p.detach().clone() for name, p in params.items()}
    if analytic is None:
        leaves = {name: p.clone().requires_grad_(True) for name, p in base.items()}
        value = loss(leaves)
        if value.requires_grad:
            grads = torch.autograd.grad(value, list(leaves.values()), allow_unused=True)
        else:
            grads = [None] * len(leaves)
        analytic = {
            name: torch.zeros_like(p) if g is None else g.detach()
            for (name, p), g in zip(base.items(), grads)
        }

    worst = 0.0
    skipped = 0
    with torch.no_grad():
        for name, tensor in base.items():
            flat = tensor.view(-1)
            expected = analytic[name].reshape(-1)
            for idx in range(flat.numel()):
                original = flat[idx].item()
                flat[idx] = original + epsilon
                upper = loss(base).item()
                flat[idx] = original - epsilon
                lower = loss(base).item()
                flat[idx] = original
                numeric = (upper - lower) / (2 * epsilon)
                computed = expected[idx].item()
                if abs(computed) <= noise and abs(numeric) <= noise:
                    skipped += 1
                    continue
                error = abs(computed - numeric) / (abs(numeric) + floor)
                worst = max(worst, error)
    logger.debug(f"Finite-difference check: max relative error {worst:.3e}, "
                 f"{skipped} components below noise {noise:.1e}")
    return worst
