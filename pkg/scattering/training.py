"""
Optimization harness: complex MSE loss, step-halving learning-rate schedule,
Adam on the real components of every parameter, and the full-batch training
loop repeated over seeds.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import torch

from .exceptions import ConfigurationError, NonFiniteGradientError, ShapeError, TrainingDivergedError
from .networks import (DEFAULT_HIDDEN, DEFAULT_MODES, ModelKind, ModelParams, conditions_of, evolve,
                       init_params, initial_state)
from .theories import Dataset

logger = logging.getLogger(__name__)

BETA1 = 0.9
BETA2 = 0.999
ADAM_EPSILON = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 400
    lr0: float = 0.02
    lr_drops: Tuple[int, ...] = (100, 250)
    lr_factor: float = 0.5
    batch: int = 16
    steps: int = 10
    seeds: int = 5

    def __post_init__(self):
        object.__setattr__(self, 'lr_drops', tuple(int(d) for d in self.lr_drops))
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be non-negative, got {self.epochs}")
        if self.lr0 <= 0:
            raise ConfigurationError(f"initial learning rate must be positive, got {self.lr0}")
        drops = self.lr_drops
        if any(b <= a for a, b in zip(drops, drops[1:])):
            raise ConfigurationError(f"learning-rate drops must be strictly increasing, got {list(drops)}")
        if drops and (drops[0] < 1 or drops[-1] >= self.epochs):
            raise ConfigurationError(f"learning-rate drops {list(drops)} must lie inside 1..{self.epochs - 1}")
        if self.steps < 1 or self.seeds < 1 or self.batch < 1:
            raise ConfigurationError("steps, seeds and batch must all be at least 1")

    @classmethod
    def for_epochs(cls, epochs: int, lr_drops: Sequence[int] = (100, 250), **kwargs) -> 'TrainConfig':
        """Config whose schedule keeps only the drops that fall inside ``epochs``."""
        return cls(epochs=epochs, lr_drops=tuple(d for d in lr_drops if 1 <= d < epochs), **kwargs)


@dataclass
class LossHistory:
    train: List[float] = field(default_factory=list)
    val: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train)


@dataclass
class AdamState:
    step: int = 0
    first: Dict[str, torch.Tensor] = field(default_factory=dict)
    second: Dict[str, torch.Tensor] = field(default_factory=dict)

    @classmethod
    def fresh(cls, params: Mapping[str, torch.Tensor]) -> 'AdamState':
        return cls(
            step=0,
            first={name: torch.zeros_like(p) for name, p in params.items()},
            second={name: torch.zeros_like(p) for name, p in params.items()},
        )


@dataclass
class Evaluation:
    mse: float
    fractional: float


@dataclass
class RepeatSummary:
    histories: Dict[int, LossHistory]
    mean: LossHistory
    low: LossHistory
    high: LossHistory


def _squared_modulus(x: torch.Tensor) -> torch.Tensor:
    if x.is_complex():
        return x.real ** 2 + x.imag ** 2
    return x ** 2


def mse_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean over every entry (batch included) of |pred - target|^2."""
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {tuple(pred.shape)} does not match target {tuple(target.shape)}")
    return _squared_modulus(pred - target).mean()


def fractional_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """MSE normalised by the mean squared target modulus."""
    return mse_loss(pred, target) / _squared_modulus(target).mean()


def lr_at(epoch: int, config: TrainConfig) -> float:
    if not 0 <= epoch < config.epochs:
        raise ValueError(f"epoch {epoch} outside 0..{config.epochs - 1}")
    drops = sum(1 for d in config.lr_drops if epoch >= d)
    return config.lr0 * config.lr_factor ** drops


def adam_update(
    params: Mapping[str, torch.Tensor],
    grads: Mapping[str, torch.Tensor],
    state: AdamState,
    lr: float,
) -> Tuple[Dict[str, torch.Tensor], AdamState]:
    """One bias-corrected Adam step; returns new parameter and state objects."""
    for name, g in grads.items():
        if not bool(torch.isfinite(g).all()):
            logger.error(f"Non-finite gradient for parameter '{name}'")
            raise NonFiniteGradientError(f"non-finite gradient for parameter '{name}'")
    step = state.step + 1
    bc1 = 1.0 - BETA1 ** step
    bc2 = 1.0 - BETA2 ** step
    new_params, first, second = {}, {}, {}
    with torch.no_grad():
        for name, p in params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ShapeError(f"gradient of '{name}' has shape {tuple(g.shape)}, expected {tuple(p.shape)}")
            m = BETA1 * state.first.get(name, torch.zeros_like(p)) + (1 - BETA1) * g
            v = BETA2 * state.second.get(name, torch.zeros_like(p)) + (1 - BETA2) * g * g
            new_params[name] = p.detach() - (lr / bc1) * m / (torch.sqrt(v / bc2) + ADAM_EPSILON)
            first[name], second[name] = m, v
    return new_params, AdamState(step=step, first=first, second=second)


def _state_and_targets(dataset: Dataset, p_scale: float) -> Tuple[torch.Tensor, torch.Tensor]:
    points, couplings, masses = conditions_of(dataset)
    return initial_state(points, couplings, masses, p_scale), dataset.targets()


def evaluate(kind, params: ModelParams, dataset: Dataset, steps: int = 10) -> Evaluation:
    """MSE and fractional loss of a model on every sample of ``dataset``."""
    z0, targets = _state_and_targets(dataset, params.p_scale)
    with torch.no_grad():
        pred = evolve(kind, params, z0, steps)[:, 0]
        return Evaluation(mse=mse_loss(pred, targets).item(), fractional=fractional_loss(pred, targets).item())


def train(
    kind,
    dataset: Dataset,
    val_dataset: Dataset,
    config: TrainConfig = TrainConfig(),
    seed: int = 0,
    modes: int = DEFAULT_MODES,
    hidden: int = DEFAULT_HIDDEN,
    initial: Optional[ModelParams] = None,
) -> Tuple[ModelParams, LossHistory]:
    """
    Full-batch training: one Adam step per epoch on the whole dataset.

    Training and validation losses are recorded for the parameters at the start
    of each epoch, before that epoch's update.
    """
    kind = ModelKind.parse(kind)
    if len(dataset) == 0 or len(val_dataset) == 0:
        raise ShapeError("training and validation datasets must be non-empty")
    if len(dataset) != config.batch:
        logger.warning(f"Dataset holds {len(dataset)} samples, configured batch is {config.batch}; "
                       f"training on the full dataset")
    params = initial or init_params(kind, dataset.grid.n_p, modes=modes, seed=seed, hidden=hidden,
                                    p_scale=dataset.grid.p_max)
    z0, targets = _state_and_targets(dataset, params.p_scale)
    val_z0, val_targets = _state_and_targets(val_dataset, params.p_scale)

    history = LossHistory()
    tensors = {name: t.detach() for name, t in params.tensors.items()}
    state = AdamState.fresh(tensors)
    started = time.time()
    for epoch in range(config.epochs):
        leaves = {name: t.clone().requires_grad_(True) for name, t in tensors.items()}
        pred = evolve(kind, params.with_tensors(leaves), z0, config.steps)[:, 0]
        loss = mse_loss(pred, targets)
        value = loss.item()
        if not math.isfinite(value):
            logger.error(f"{kind.value} training diverged at epoch {epoch} (seed {seed})")
            raise TrainingDivergedError(f"{kind.value} loss became {value} at epoch {epoch}", epoch=epoch)
        grads = torch.autograd.grad(loss, list(leaves.values()))
        with torch.no_grad():
            val_pred = evolve(kind, params.with_tensors(tensors), val_z0, config.steps)[:, 0]
            val_value = mse_loss(val_pred, val_targets).item()
        history.train.append(value)
        history.val.append(val_value)
        logger.debug(f"{kind.value} seed={seed} epoch={epoch} train={value:.6e} val={val_value:.6e}")
        tensors, state = adam_update(tensors, dict(zip(leaves, grads)), state, lr_at(epoch, config))

    if history.train:
        logger.info(f"Trained {kind.value} (seed {seed}) for {config.epochs} epochs in "
                    f"{time.time() - started:.1f}s: loss {history.train[0]:.3e} -> {history.train[-1]:.3e}")
    return params.with_tensors(tensors), history


def summarize_histories(histories: Sequence[LossHistory]) -> Tuple[LossHistory, LossHistory, LossHistory]:
    """Elementwise mean, minimum and maximum across histories of equal length."""
    if not histories:
        return LossHistory(), LossHistory(), LossHistory()
    summaries = []
    for reduce in (torch.mean, torch.amin, torch.amax):
        summary = LossHistory()
        for attr in ('train', 'val'):
            stacked = torch.tensor([getattr(h, attr) for h in histories], dtype=torch.float64)
            if stacked.numel():
                setattr(summary, attr, reduce(stacked, dim=0).tolist())
        summaries.append(summary)
    return tuple(summaries)


def repeat_runs(
    kind,
    datasets: Tuple[Dataset, Dataset],
    config: TrainConfig = TrainConfig(),
    base_seed: int = 0,
    **model_options,
) -> RepeatSummary:
    """Train once per seed and return the seed-mean history with its min/max envelope."""
    dataset, val_dataset = datasets
    histories = {}
    for seed in range(base_seed, base_seed + config.seeds):
        _, history = train(kind, dataset, val_dataset, config, seed=seed, **model_options)
        histories[seed] = history
    mean, low, high = summarize_histories(list(histories.values()))
    return RepeatSummary(histories=histories, mean=mean, low=low, high=high)
