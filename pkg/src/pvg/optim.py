"""AdamW with decoupled weight decay and a warmup + cosine schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .tensor import Tensor


@dataclass
class AdamWState:
    """First/second moment accumulators, keyed like the parameter dict."""

    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def decay_mask(params: dict[str, Tensor]) -> dict[str, bool]:
    """Weight decay applies to matrices only; vectors and scalars (norm
    scale/shift, biases, LayerScale, activation relaxations) are exempt."""
    return {name: t.data.ndim >= 2 for name, t in params.items()}


def adamw_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: AdamWState,
    lr_t: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    weight_decay: float = 0.05,
    apply_decay: dict[str, bool] | None = None,
) -> None:
    """One in-place update. Decay is decoupled (applied to the raw weights,
    not folded into the gradient); moments are bias-corrected."""
    beta1, beta2 = betas
    state.step += 1
    t = state.step
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        if weight_decay and (apply_decay is None or apply_decay[name]):
            p.data *= 1.0 - lr_t * weight_decay
        p.data -= lr_t * (m / bc1) / (np.sqrt(v / bc2) + eps)


def cosine_lr(step: int, base_lr: float, warmup_steps: int, total_steps: int) -> float:
    """Linear warmup to ``base_lr`` over ``warmup_steps`` steps, then cosine
    decay reaching exactly zero at ``total_steps``."""
    if total_steps < warmup_steps:
        raise ConfigError("total_steps must be >= warmup_steps")
    if step < warmup_steps:
        return base_lr * (step + 1) / warmup_steps
    span = max(total_steps - warmup_steps, 1)
    progress = min(step - warmup_steps, span)
    return base_lr * 0.5 * (1.0 + float(np.cos(np.pi * progress / span)))
