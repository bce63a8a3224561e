"""SGD with momentum, L1 weight decay, variance-scaled init, stepped LR."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .tensor import F32, Prng, Tensor

Param = tuple[str, Tensor, Tensor]  # (name, value, grad); updated in place


@dataclass
class LrSchedule:
    """Step schedule: divide the rate by 10 every max_epoch/3 epochs, twice."""

    max_epoch: int
    base_lr: float = 0.001
    factor: float = 0.1

    def lr_at(self, epoch: int) -> float:
        return lr_at(self, epoch)


def lr_at(sched: LrSchedule, epoch: int) -> float:
    if not 0 <= epoch < sched.max_epoch:
        raise ValueError(f"epoch {epoch} outside [0, {sched.max_epoch})")
    drops = min(2, int(epoch / (sched.max_epoch / 3)))
    return sched.base_lr * sched.factor ** drops


@dataclass
class L1Penalty:
    """Lasso-style pull toward zero; lam = 0 disables it, biases are exempt."""

    lam: float = 1e-4


def apply_l1(grads: Tensor, weights: Tensor, lam: float) -> Tensor:
    """grad += lam * sign(weight), in place; sign(0) contributes nothing."""
    if grads.shape != weights.shape:
        raise ValueError(f"grad shape {grads.shape} != weight shape {weights.shape}")
    if lam != 0.0:
        grads += F32(lam) * np.sign(weights)
    return grads


class SgdMomentum:
    """Classical momentum: v <- momentum*v - lr*grad; w <- w + v."""

    def __init__(self, momentum: float = 0.9):
        self.momentum = float(momentum)
        self.velocity: dict[str, Tensor] = {}

    def step(self, params: Iterable[Param], lr: float) -> None:
        for name, value, grad in params:
            v = self.velocity.get(name)
            if v is None:
                v = np.zeros_like(value)
                self.velocity[name] = v
            v *= F32(self.momentum)
            v -= F32(lr) * grad
            value += v


def init_msra(shape: Sequence[int], fan_in: int, p: Prng) -> Tensor:
    """Zero-mean Gaussian with variance 2/fan_in (suits ReLU stacks)."""
    if fan_in <= 0:
        raise ValueError(f"fan_in must be positive, got {fan_in}")
    return p.normal(tuple(shape), std=math.sqrt(2.0 / fan_in))
