"""Minimal reverse-mode automatic differentiation over numpy arrays.

Tensors form a DAG; ``backward`` on a scalar walks it once in reverse
topological order and accumulates gradients into every reachable tensor
with ``requires_grad``. Values are float64 throughout; checkpoints own
any narrowing to float32.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class AutodiffError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if self.data.shape != ():
            raise AutodiffError("backward requires a scalar tensor")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self._accum(np.ones(()))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = _wrap(other)

        def bwd(g):
            self._grad_bcast(g)
            other._grad_bcast(g)

        return Tensor(self.data + other.data, parents=(self, other), backward=bwd)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-_wrap(other))

    def __rsub__(self, other):
        return _wrap(other) + (-self)

    def __neg__(self):
        def bwd(g):
            self._grad_bcast(-g)

        return Tensor(-self.data, parents=(self,), backward=bwd)

    def __mul__(self, other):
        other = _wrap(other)

        def bwd(g):
            self._grad_bcast(g * other.data)
            other._grad_bcast(g * self.data)

        return Tensor(self.data * other.data, parents=(self, other), backward=bwd)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _wrap(other)

        def bwd(g):
            self._grad_bcast(g / other.data)
            other._grad_bcast(-g * self.data / (other.data**2))

        return Tensor(self.data / other.data, parents=(self, other), backward=bwd)

    def _grad_bcast(self, g):
        """Accumulate g, summing broadcast dimensions back down."""
        if not self.requires_grad:
            return
        extra = g.ndim - self.data.ndim
        if extra > 0:
            g = g.sum(axis=tuple(range(extra)))
        axes = tuple(i for i, n in enumerate(self.data.shape) if n == 1 and g.shape[i] != 1)
        if axes:
            g = g.sum(axis=axes, keepdims=True)
        self._accum(g)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# -- elementwise ------------------------------------------------------------


def sqrt(x: Tensor) -> Tensor:
    out = np.sqrt(x.data)

    def bwd(g):
        x._grad_bcast(g * 0.5 / out)

    return Tensor(out, parents=(x,), backward=bwd)


def log(x: Tensor) -> Tensor:
    def bwd(g):
        x._grad_bcast(g / x.data)

    return Tensor(np.log(x.data), parents=(x,), backward=bwd)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def bwd(g):
        x._grad_bcast(g * (1.0 - out**2))

    return Tensor(out, parents=(x,), backward=bwd)


def sigmoid(x: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-x.data))

    def bwd(g):
        x._grad_bcast(g * out * (1.0 - out))

    return Tensor(out, parents=(x,), backward=bwd)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def bwd(g):
        x._grad_bcast(g * mask)

    return Tensor(x.data * mask, parents=(x,), backward=bwd)


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    scale = np.where(x.data > 0, 1.0, slope)

    def bwd(g):
        x._grad_bcast(g * scale)

    return Tensor(x.data * scale, parents=(x,), backward=bwd)


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clip values; gradient passes through only inside the open range."""
    mask = (x.data > lo) & (x.data < hi)

    def bwd(g):
        x._grad_bcast(g * mask)

    return Tensor(np.clip(x.data, lo, hi), parents=(x,), backward=bwd)


# -- reductions -------------------------------------------------------------


def tsum(x: Tensor) -> Tensor:
    def bwd(g):
        x._grad_bcast(np.broadcast_to(g, x.data.shape).copy())

    return Tensor(x.data.sum(), parents=(x,), backward=bwd)


def mean(x: Tensor) -> Tensor:
    n = x.data.size

    def bwd(g):
        x._grad_bcast(np.full(x.data.shape, float(g) / n))

    return Tensor(x.data.mean(), parents=(x,), backward=bwd)


# -- structural -------------------------------------------------------------


def concat(xs, axis: int = 1) -> Tensor:
    xs = tuple(xs)
    sizes = [x.data.shape[axis] for x in xs]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for x, a, b in zip(xs, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(a, b)
            x._grad_bcast(g[tuple(sl)])

    return Tensor(np.concatenate([x.data for x in xs], axis=axis), parents=xs, backward=bwd)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    sl = [slice(None)] * x.data.ndim
    sl[axis] = slice(start, start + length)
    sl = tuple(sl)

    def bwd(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            full[sl] = g
            x._accum(full)

    return Tensor(x.data[sl], parents=(x,), backward=bwd)


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """(N, C*r*r, H, W) -> (N, C, H*r, W*r), canonical periodic rearrangement."""
    n, c, h, w = x.data.shape
    if c % (r * r) != 0:
        raise AutodiffError(f"channels {c} not divisible by r^2={r * r}")
    co = c // (r * r)
    out = (
        x.data.reshape(n, co, r, r, h, w)
        .transpose(0, 1, 4, 2, 5, 3)
        .reshape(n, co, h * r, w * r)
    )

    def bwd(g):
        gi = (
            g.reshape(n, co, h, r, w, r)
            .transpose(0, 1, 3, 5, 2, 4)
            .reshape(n, c, h, w)
        )
        x._grad_bcast(gi)

    return Tensor(out, parents=(x,), backward=bwd)


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation, zero padding; x (N,C,H,W), w (O,C,K,K), b (O,)."""
    n, c, h, wd = x.data.shape
    o, cw, k, k2 = w.data.shape
    if cw != c or k != k2:
        raise AutodiffError(f"kernel {w.data.shape} does not match input {x.data.shape}")
    ho = (h + 2 * padding - k) // stride + 1
    wo = (wd + 2 * padding - k) // stride + 1
    if ho <= 0 or wo <= 0:
        raise AutodiffError("empty convolution output")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    out = np.zeros((n, o, ho, wo))
    for ki in range(k):
        for kj in range(k):
            xs = xp[:, :, ki : ki + stride * ho : stride, kj : kj + stride * wo : stride]
            out += np.einsum("oc,nchw->nohw", w.data[:, :, ki, kj], xs, optimize=True)
    if b is not None:
        out += b.data.reshape(1, -1, 1, 1)

    def bwd(g):
        if x.requires_grad:
            gxp = np.zeros_like(xp)
        for ki in range(k):
            for kj in range(k):
                xs = xp[:, :, ki : ki + stride * ho : stride, kj : kj + stride * wo : stride]
                if w.requires_grad:
                    w._accum_kernel(ki, kj, np.einsum("nohw,nchw->oc", g, xs, optimize=True))
                if x.requires_grad:
                    gxp[:, :, ki : ki + stride * ho : stride, kj : kj + stride * wo : stride] += (
                        np.einsum("oc,nohw->nchw", w.data[:, :, ki, kj], g, optimize=True)
                    )
        if x.requires_grad:
            if padding:
                x._accum(gxp[:, :, padding:-padding, padding:-padding])
            else:
                x._accum(gxp)
        if b is not None and b.requires_grad:
            b._accum(g.sum(axis=(0, 2, 3)))

    parents = (x, w) if b is None else (x, w, b)
    return Tensor(out, parents=parents, backward=bwd)


def _accum_kernel(self, ki, kj, g):
    if self.grad is None:
        self.grad = np.zeros_like(self.data)
    self.grad[:, :, ki, kj] += g


Tensor._accum_kernel = _accum_kernel


def channel_min(x: Tensor) -> Tensor:
    """Minimum over axis 1; gradient routes to the first (lowest-index) argmin."""
    idx = x.data.argmin(axis=1)
    out = np.take_along_axis(x.data, idx[:, None], axis=1)

    def bwd(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            np.put_along_axis(full, idx[:, None], g, axis=1)
            x._accum(full)

    return Tensor(out, parents=(x,), backward=bwd)


def replicate_pad(x: Tensor, pad: int) -> Tensor:
    """Edge-replicating spatial padding on (N, C, H, W)."""
    n, c, h, w = x.data.shape
    ri = np.clip(np.arange(-pad, h + pad), 0, h - 1)
    rj = np.clip(np.arange(-pad, w + pad), 0, w - 1)
    out = x.data[:, :, ri[:, None], rj[None, :]]

    def bwd(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            np.add.at(full, (slice(None), slice(None), ri[:, None], rj[None, :]), g)
            x._accum(full)

    return Tensor(out, parents=(x,), backward=bwd)


def window_min(x: Tensor, k: int) -> Tensor:
    """Valid k x k sliding minimum; gradient to the row-major-first argmin."""
    n, c, h, w = x.data.shape
    windows = sliding_window_view(x.data, (k, k), axis=(2, 3))
    flat = windows.reshape(n, c, h - k + 1, w - k + 1, k * k)
    idx = flat.argmin(axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]

    def bwd(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            ni, ci, ii, jj = np.indices(idx.shape)
            np.add.at(full, (ni, ci, ii + idx // k, jj + idx % k), g)
            x._accum(full)

    return Tensor(out, parents=(x,), backward=bwd)
