"""Adaptive-moment optimizer with per-parameter-group learning rates."""

from __future__ import annotations

import numpy as np

from ..errors import NonFiniteGradient
from .autodiff import Tensor


class Adam:
    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float = 1e-4,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        lr_overrides: dict[str, float] | None = None,
    ):
        """lr_overrides maps name prefixes to learning rates; the longest
        matching prefix wins."""
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.lr_overrides = dict(lr_overrides or {})
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def lr_for(self, name: str) -> float:
        best = None
        for prefix, lr in self.lr_overrides.items():
            if name.startswith(prefix) and (best is None or len(prefix) > len(best)):
                best = prefix
        return self.lr if best is None else self.lr_overrides[best]

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self, grad_scale: float = 1.0) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for name in sorted(self.params):
            p = self.params[name]
            if p.grad is None:
                continue
            g = p.grad * grad_scale
            if not np.isfinite(g).all():
                raise NonFiniteGradient(f"gradient of {name} is not finite")
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            mhat = self.m[name] / bias1
            vhat = self.v[name] / bias2
            p.data = p.data - self.lr_for(name) * mhat / (np.sqrt(vhat) + self.eps)

    def state_dict(self) -> dict:
        return {
            "t": self.t,
            "m": {k: v.copy() for k, v in self.m.items()},
            "v": {k: v.copy() for k, v in self.v.items()},
        }

    def load_state_dict(self, state: dict) -> None:
        self.t = int(state["t"])
        self.m = {k: np.asarray(v) for k, v in state["m"].items()}
        self.v = {k: np.asarray(v) for k, v in state["v"].items()}


def backward_and_step(loss: Tensor, opt: Adam, grad_scale: float = 1.0) -> None:
    """Convenience wrapper: backward pass, one optimizer step, grads cleared."""
    loss.backward()
    opt.step(grad_scale)
    opt.zero_grad()
