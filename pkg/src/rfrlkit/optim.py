"""Adam with bias correction plus a reduce-on-plateau learning-rate rule.

One optimizer instance owns every parameter of a model. Parameter
tensors keep their identity across steps: the update swaps in a fresh
immutable array, so saved closures over old values stay valid and
gradient maps keyed by tensor identity keep working.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractError, NumericsError
from .tensor import GradMap, Tensor


def _assign(p: Tensor, new_data: np.ndarray) -> None:
    new_data = np.ascontiguousarray(new_data, dtype=p.data.dtype)
    new_data.setflags(write=False)
    p.data = new_data


class Adam:
    """Standard Adam: m <- b1 m + (1-b1) g, v <- b2 v + (1-b2) g^2,
    p <- p - lr * mhat / (sqrt(vhat) + eps), eps outside the root."""

    def __init__(self, named_params, lr: float = 1e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.named = [(name, p) for name, p in named_params]
        if not self.named:
            raise ContractError("optimizer needs at least one parameter")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = [np.zeros_like(p.data) for _, p in self.named]
        self.v = [np.zeros_like(p.data) for _, p in self.named]

    def step(self, grads: GradMap) -> None:
        """One update from a gradient map; missing entries count as zero.
        A non-finite gradient aborts before any state changes."""
        gs = []
        for name, p in self.named:
            g = grads.raw(p) if p in grads else np.zeros_like(p.data)
            if g.shape != p.data.shape:
                raise ContractError(
                    f"gradient shape {g.shape} != param '{name}' {p.data.shape}")
            if not np.isfinite(g).all():
                raise NumericsError(f"non-finite gradient for '{name}'")
            gs.append(g)
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for i, ((_, p), g) in enumerate(zip(self.named, gs)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[i] / c1
            v_hat = self.v[i] / c2
            _assign(p, p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))

    def state_arrays(self) -> list[tuple[str, np.ndarray]]:
        """Full state as named arrays for checkpointing, 'opt.'-prefixed."""
        out = [("opt.t", np.float64(self.t)),
               ("opt.lr", np.float64(self.lr))]
        for (name, _), m, v in zip(self.named, self.m, self.v):
            out.append((f"opt.m.{name}", m))
            out.append((f"opt.v.{name}", v))
        return [(k, np.asarray(a)) for k, a in out]

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        self.t = int(arrays["opt.t"])
        self.lr = float(arrays["opt.lr"])
        for i, (name, p) in enumerate(self.named):
            m = arrays[f"opt.m.{name}"]
            v = arrays[f"opt.v.{name}"]
            if m.shape != p.data.shape or v.shape != p.data.shape:
                raise ContractError(f"optimizer state shape mismatch at '{name}'")
            self.m[i] = m.astype(p.data.dtype, copy=True)
            self.v[i] = v.astype(p.data.dtype, copy=True)


@dataclass(frozen=True)
class PlateauState:
    best_val_loss: float = math.inf
    epochs_since_improve: int = 0
    patience: int = 6
    factor: float = 0.1
    min_lr: float = 1e-7


def plateau_update(state: PlateauState, val_loss: float,
                   lr: float) -> tuple[float, PlateauState]:
    """Strict improvement resets the counter; once the counter reaches
    the patience the lr is multiplied by the factor (floored at min_lr)
    and the counter restarts."""
    if not math.isfinite(val_loss):
        raise NumericsError(f"validation loss is not finite: {val_loss}")
    if val_loss < state.best_val_loss:
        return lr, replace(state, best_val_loss=val_loss,
                           epochs_since_improve=0)
    waited = state.epochs_since_improve + 1
    if waited >= state.patience:
        return (max(lr * state.factor, state.min_lr),
                replace(state, epochs_since_improve=0))
    return lr, replace(state, epochs_since_improve=waited)
