"""Adam optimizer, triangular cyclic learning-rate schedule and EMA shadow."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor


class Adam:
    """Standard Adam with bias correction. State is per-parameter (m, v)."""

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, lr=None):
        lr = self.lr if lr is None else lr
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g is None:
                continue
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def state_arrays(self, prefix):
        out = {f"{prefix}.t": np.array([float(self.t)])}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"{prefix}.m{i}"] = m.copy()
            out[f"{prefix}.v{i}"] = v.copy()
        return out

    def load_arrays(self, arrays, prefix):
        self.t = int(arrays[f"{prefix}.t"][0])
        for i in range(len(self.params)):
            self.m[i] = np.asarray(arrays[f"{prefix}.m{i}"], dtype=np.float64).reshape(
                self.params[i].data.shape
            )
            self.v[i] = np.asarray(arrays[f"{prefix}.v{i}"], dtype=np.float64).reshape(
                self.params[i].data.shape
            )


class CyclicLrSchedule:
    """Triangular cycle (gamma = 1, no decay) between base and max learning
    rate; momentum runs inversely between max and base momentum."""

    def __init__(self, base_lr=1e-4, max_lr=1.5e-4, half_period=100,
                 base_momentum=0.8, max_momentum=0.9):
        if half_period < 1:
            raise ValueError("half_period must be >= 1")
        self.base_lr = base_lr
        self.max_lr = max_lr
        self.half_period = half_period
        self.base_momentum = base_momentum
        self.max_momentum = max_momentum

    def at(self, step: int):
        """(lr, momentum) at an integer step >= 0."""
        if step < 0:
            raise ValueError("step must be >= 0")
        x = (step % (2 * self.half_period)) / self.half_period
        tri = 1.0 - abs(x - 1.0)
        lr = self.base_lr + (self.max_lr - self.base_lr) * tri
        momentum = self.max_momentum - (self.max_momentum - self.base_momentum) * tri
        return lr, momentum


def cyclic_lr(step: int, sched: CyclicLrSchedule):
    return sched.at(step)


class EmaState:
    """Shadow copy of a parameter list, updated by exponential moving average.

    The shadow never aliases live parameter storage; updates only flow
    through ``update``.
    """

    def __init__(self, params, decay=0.999):
        if not 0.0 <= decay < 1.0:
            raise ValueError(f"decay must be in [0, 1), got {decay}")
        self.decay = decay
        self.shadow = [p.data.copy() for p in params]

    def update(self, params):
        params = list(params)
        if len(params) != len(self.shadow):
            raise ValueError("parameter list length mismatch")
        d = self.decay
        for s, p in zip(self.shadow, params):
            if s.shape != p.data.shape:
                raise ValueError("parameter shape mismatch")
            s *= d
            s += (1.0 - d) * p.data

    def copy_into(self, net):
        """Load the shadow into a network with an index-aligned parameter list."""
        for s, p in zip(self.shadow, net.parameters()):
            p.data = s.copy()


def ema_update(ema: EmaState, params) -> EmaState:
    ema.update(params)
    return ema
