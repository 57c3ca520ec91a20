"""Minimal dense-tensor library with reverse-mode autodiff on a tape.

Everything here runs on numpy arrays. Gradients are accumulated by walking
an explicit tape of primitive applications in reverse; one backward pass
per tape. Training runs in float32, gradient-check suites in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

__all__ = [
    "Tensor",
    "Tape",
    "TensorError",
    "NonFiniteError",
    "AdamState",
    "adam_step",
    "glorot_uniform",
    "add",
    "sub",
    "mul",
    "neg",
    "mulc",
    "addc",
    "add_rowvec",
    "matmul",
    "sigmoid",
    "logsigmoid",
    "tanh",
    "gelu",
    "exp",
    "log",
    "tsum",
    "softmax",
    "log_softmax",
    "layer_norm",
    "concat",
    "slice_rows",
    "slice_cols",
    "pick",
    "reshape",
    "rows_gather",
    "dropout",
    "detach",
    "backward",
    "clip_grad_norm",
]


class TensorError(Exception):
    pass


class NonFiniteError(TensorError):
    """A forward primitive produced NaN/Inf; the step must be aborted."""


class Tensor:
    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(arr) if requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


@dataclass
class _Record:
    out: Tensor
    inputs: tuple
    vjp: object  # callable: g -> tuple of grad arrays (or None), aligned with inputs


class Tape:
    """Records primitive applications so `backward` can replay them in reverse.

    Use as a context manager around a forward construction. Running forward
    ops with no active tape skips recording entirely (eval mode).
    """

    _active = None

    def __init__(self):
        self.records: list[_Record] = []
        self.consumed = False
        self._outer = None

    def __enter__(self):
        self._outer = Tape._active
        Tape._active = self
        return self

    def __exit__(self, *exc):
        Tape._active = self._outer
        return False

    def backward(self, loss: Tensor):
        if self.consumed:
            raise TensorError("tape already consumed; re-record before backward")
        if loss.data.size != 1:
            raise TensorError(f"backward needs a scalar loss, got shape {loss.shape}")
        self.consumed = True
        if loss.grad is None:
            loss.grad = np.zeros_like(loss.data)
        loss.grad += 1.0
        for rec in reversed(self.records):
            g = rec.out.grad
            if g is None:
                continue
            grads = rec.vjp(g)
            for inp, gi in zip(rec.inputs, grads):
                if gi is None or not inp.requires_grad:
                    continue
                if inp.grad is None:
                    inp.grad = np.zeros_like(inp.data)
                inp.grad += gi.astype(inp.data.dtype, copy=False)


def _make(data: np.ndarray, inputs: tuple, vjp) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError("non-finite value in forward op")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = any(t.requires_grad for t in inputs)
    out.grad = None
    tape = Tape._active
    if tape is not None and out.requires_grad:
        out.grad = np.zeros_like(data)
        tape.records.append(_Record(out, inputs, vjp))
    return out


def _check_binary_shapes(a: Tensor, b: Tensor):
    # only equal-shape and scalar-with-tensor combinations are supported
    if a.data.shape == b.data.shape:
        return
    if a.data.size == 1 or b.data.size == 1:
        return
    raise TensorError(f"shape mismatch: {a.shape} vs {b.shape}")


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == tuple(shape):
        return g
    return np.sum(g).reshape(shape) if int(np.prod(shape)) == 1 else g.reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_binary_shapes(a, b)
    return _make(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_binary_shapes(a, b)
    return _make(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_binary_shapes(a, b)
    return _make(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,))


def mulc(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _make(a.data * c, (a,), lambda g: (g * c,))


def addc(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _make(a.data + c, (a,), lambda g: (g,))


def add_rowvec(m: Tensor, v: Tensor) -> Tensor:
    """Add a length-C vector to every row of an (R, C) matrix."""
    if m.data.ndim != 2 or v.data.ndim != 1 or m.data.shape[1] != v.data.shape[0]:
        raise TensorError(f"add_rowvec shapes {m.shape} and {v.shape}")
    return _make(m.data + v.data, (m, v), lambda g: (g, g.sum(axis=0)))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data
    if ad.ndim not in (1, 2) or bd.ndim not in (1, 2):
        raise TensorError("matmul supports 1-D and 2-D operands only")
    a2 = ad[None, :] if ad.ndim == 1 else ad
    b2 = bd[:, None] if bd.ndim == 1 else bd
    if a2.shape[1] != b2.shape[0]:
        raise TensorError(f"matmul inner dims {a.shape} vs {b.shape}")
    out = a2 @ b2
    if ad.ndim == 1:
        out = out[0]
    if bd.ndim == 1:
        out = out[..., 0]

    def vjp(g):
        g2 = g
        if ad.ndim == 1:
            g2 = g2[None, ...]
        if bd.ndim == 1:
            g2 = g2[..., None]
        ga = g2 @ b2.T
        gb = a2.T @ g2
        if ad.ndim == 1:
            ga = ga[0]
        if bd.ndim == 1:
            gb = gb[:, 0]
        return (ga, gb)

    return _make(out, (a, b), vjp)


def sigmoid(a: Tensor) -> Tensor:
    s = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(a.data))),
                 np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))
    s = s.astype(a.data.dtype, copy=False)
    return _make(s, (a,), lambda g: (g * s * (1.0 - s),))


def logsigmoid(a: Tensor) -> Tensor:
    # log(sigmoid(x)) = min(x, 0) - log1p(exp(-|x|)), stable for large |x|
    x = a.data
    out = np.minimum(x, 0.0) - np.log1p(np.exp(-np.abs(x)))

    def vjp(g):
        return (g * np.where(x >= 0, np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))),
                             1.0 / (1.0 + np.exp(x))),)

    return _make(out.astype(x.dtype, copy=False), (a,), vjp)


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    return _make(t, (a,), lambda g: (g * (1.0 - t * t),))


_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(a: Tensor) -> Tensor:
    # exact Gaussian-CDF form x * Phi(x), not the tanh approximation
    x = a.data
    phi = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    out = (x * phi).astype(x.dtype, copy=False)

    def vjp(g):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
        return (g * (phi + x * pdf),)

    return _make(out, (a,), vjp)


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):  # overflow becomes inf -> NonFiniteError
        e = np.exp(a.data)
    return _make(e, (a,), lambda g: (g * e,))


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise TensorError("log of non-positive value")
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def tsum(a: Tensor) -> Tensor:
    return _make(
        np.asarray(a.data.sum(), dtype=a.data.dtype).reshape(()),
        (a,),
        lambda g: (np.broadcast_to(g, a.data.shape).copy(),),
    )


def _softmax_data(x: np.ndarray) -> np.ndarray:
    z = x - x.max()
    e = np.exp(z)
    return e / e.sum()


def softmax(a: Tensor) -> Tensor:
    if a.data.ndim != 1 or a.data.size < 1:
        raise TensorError("softmax expects a non-empty 1-D input")
    s = _softmax_data(a.data)
    return _make(s, (a,), lambda g: (s * (g - np.dot(g, s)),))


def log_softmax(a: Tensor) -> Tensor:
    if a.data.ndim != 1 or a.data.size < 1:
        raise TensorError("log_softmax expects a non-empty 1-D input")
    z = a.data - a.data.max()
    lse = np.log(np.exp(z).sum())
    out = z - lse
    s = np.exp(out)
    return _make(out, (a,), lambda g: (g - s * g.sum(),))


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis with population variance: (x-mu)/sqrt(var+eps)*gamma+beta."""
    xd = x.data
    if xd.ndim not in (1, 2):
        raise TensorError("layer_norm expects 1-D or 2-D input")
    d = xd.shape[-1]
    if gamma.data.shape != (d,) or beta.data.shape != (d,):
        raise TensorError("layer_norm gamma/beta must match the last axis")
    mu = xd.mean(axis=-1, keepdims=True)
    var = xd.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mu) * inv
    out = (xhat * gamma.data + beta.data).astype(xd.dtype, copy=False)

    def vjp(g):
        gg = g * gamma.data
        dx = inv * (gg - gg.mean(axis=-1, keepdims=True)
                    - xhat * (gg * xhat).mean(axis=-1, keepdims=True))
        if xd.ndim == 2:
            dgamma = (g * xhat).sum(axis=0)
            dbeta = g.sum(axis=0)
        else:
            dgamma = g * xhat
            dbeta = g.copy()
        return (dx, dgamma, dbeta)

    return _make(out, (x, gamma, beta), vjp)


def concat(tensors: list, axis: int = 0) -> Tensor:
    if not tensors:
        raise TensorError("concat of empty list")
    datas = [t.data for t in tensors]
    out = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        sl = [slice(None)] * g.ndim
        grads = []
        for i in range(len(datas)):
            sl[axis] = slice(offsets[i], offsets[i + 1])
            grads.append(g[tuple(sl)])
        return tuple(grads)

    return _make(out, tuple(tensors), vjp)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    out = a.data[start:stop].copy()

    def vjp(g):
        ga = np.zeros_like(a.data)
        ga[start:stop] = g
        return (ga,)

    return _make(out, (a,), vjp)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if a.data.ndim != 2:
        raise TensorError("slice_cols expects a 2-D input")
    out = a.data[:, start:stop].copy()

    def vjp(g):
        ga = np.zeros_like(a.data)
        ga[:, start:stop] = g
        return (ga,)

    return _make(out, (a,), vjp)


def pick(a: Tensor, i: int) -> Tensor:
    """Select one entry of a 1-D tensor as a 0-D tensor."""
    if a.data.ndim != 1:
        raise TensorError("pick expects a 1-D input")
    out = np.asarray(a.data[i]).reshape(())

    def vjp(g):
        ga = np.zeros_like(a.data)
        ga[i] = g
        return (ga,)

    return _make(out, (a,), vjp)


def reshape(a: Tensor, shape) -> Tensor:
    out = a.data.reshape(shape).copy()
    return _make(out, (a,), lambda g: (g.reshape(a.data.shape),))


def rows_gather(table: Tensor, ids) -> Tensor:
    """Embedding-style row lookup: out[i] = table[ids[i]]; backward scatter-adds."""
    ids = np.asarray(ids, dtype=np.int64)
    if np.any(ids < 0) or np.any(ids >= table.data.shape[0]):
        raise TensorError("rows_gather index out of range")
    out = table.data[ids].copy()

    def vjp(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return _make(out, (table,), vjp)


def dropout(a: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    if rate <= 0.0:
        return a
    keep = (rng.random(a.data.shape) >= rate).astype(a.data.dtype)
    scale = 1.0 / (1.0 - rate)
    mask = keep * scale
    return _make(a.data * mask, (a,), lambda g: (g * mask,))


def detach(a: Tensor) -> Tensor:
    return Tensor(a.data.copy(), requires_grad=False)


def backward(loss: Tensor):
    """Run the active tape backward from `loss`."""
    tape = Tape._active
    if tape is None:
        raise TensorError("backward requires an active Tape")
    tape.backward(loss)


def glorot_uniform(shape, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    fan_in, fan_out = (shape[0], shape[1]) if len(shape) == 2 else (shape[0], shape[0])
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def clip_grad_norm(grads: list, max_norm: float) -> float:
    """Scale a list of gradient arrays in place so their global norm <= max_norm."""
    total = float(np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads)))
    if total > max_norm and total > 0:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params: list, grads: list, state: AdamState):
    """Standard bias-corrected Adam update, applied in place."""
    if len(params) != len(grads):
        raise TensorError("params/grads length mismatch")
    if not state.m:
        state.m = [np.zeros_like(p.data, dtype=np.float64) for p in params]
        state.v = [np.zeros_like(p.data, dtype=np.float64) for p in params]
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.data.shape != g.shape or m.shape != g.shape:
            raise TensorError("adam_step shape mismatch")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g64 = g.astype(np.float64)
        m *= state.beta1
        m += (1.0 - state.beta1) * g64
        v *= state.beta2
        v += (1.0 - state.beta2) * g64 * g64
        update = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        p.data -= update.astype(p.data.dtype)
