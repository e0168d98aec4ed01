"""Minimal reverse-mode differentiation over dense float64 arrays.

A :class:`Tape` records primitive operations in execution order; since
every operation's inputs precede it, the recording order is already a
topological order and :func:`backward` visits nodes exactly once in
reverse. Tensors are immutable value wrappers; only nodes reachable from
a trainable leaf are recorded, everything else is constant-folded.

Besides the usual dense primitives (matmul with batch broadcasting,
elementwise ops, reductions) the engine provides the graph-specific
primitives that make a potential-weighted Laplacian differentiable in the
potential: ``edge_weights`` (node vector -> per-edge endpoint averages,
whose adjoint scatters half the upstream gradient to both endpoints),
``node_sums`` (per-edge values -> weighted degrees), a symmetric scatter
into a dense matrix, and an edge-based sparse matvec.

Tapes are single-threaded and meant to live for one training step.
"""
from __future__ import annotations

import numpy as np

from .errors import NaNLoss

__all__ = [
    "Tape", "Tensor", "backward", "constant",
    "add", "sub", "mul", "div", "neg", "matmul", "transpose2", "reshape",
    "concat", "tsum", "tmean", "relu", "softplus", "texp", "ttanh", "tlog",
    "powc", "take_nodes", "edge_weights", "node_sums", "scatter_sym_dense",
    "spmv_edge_weights", "diag_embed",
    "AdamState", "adam_step", "check_finite",
]


class Tape:
    """Ordered record of differentiable operations for one backward pass."""

    def __init__(self):
        self._nodes: list[Tensor] = []
        self._leaves: list[Tensor] = []

    def leaf(self, data, name: str | None = None, trainable: bool = True) -> "Tensor":
        t = Tensor(np.asarray(data, dtype=np.float64), tape=self,
                   requires_grad=trainable, name=name)
        if trainable:
            self._leaves.append(t)
        return t

    def leaves(self) -> list["Tensor"]:
        return list(self._leaves)


class Tensor:
    """Immutable array value, optionally attached to a tape."""

    __slots__ = ("data", "tape", "parents", "vjp", "requires_grad", "name")

    def __init__(self, data, tape=None, parents=(), vjp=None,
                 requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.tape = tape
        self.parents = parents
        self.vjp = vjp
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    # operator sugar; all dispatch to the module-level primitives
    def __add__(self, o): return add(self, o)
    def __radd__(self, o): return add(o, self)
    def __sub__(self, o): return sub(self, o)
    def __rsub__(self, o): return sub(o, self)
    def __mul__(self, o): return mul(self, o)
    def __rmul__(self, o): return mul(o, self)
    def __truediv__(self, o): return div(self, o)
    def __matmul__(self, o): return matmul(self, o)
    def __neg__(self): return neg(self)


def constant(value) -> Tensor:
    """Wrap an array as a non-differentiable tensor (explicit stop-gradient)."""
    return Tensor(np.asarray(value, dtype=np.float64))


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else constant(x)


def _record(parents, data, vjp) -> Tensor:
    if not any(p.requires_grad for p in parents):
        return Tensor(data)  # constant folding: nothing upstream to reach
    tapes = {p.tape for p in parents if p.tape is not None}
    if len(tapes) > 1:
        raise ValueError("operands were recorded on different tapes")
    tape = tapes.pop()
    t = Tensor(data, tape=tape, parents=tuple(parents), vjp=vjp, requires_grad=True)
    tape._nodes.append(t)
    return t


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


# --- arithmetic ---

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _record((a, b), a.data + b.data,
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _record((a, b), a.data - b.data,
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _record((a, b), a.data * b.data,
                   lambda g: (_unbroadcast(g * b.data, a.shape),
                              _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _record((a, b), a.data / b.data,
                   lambda g: (_unbroadcast(g / b.data, a.shape),
                              _unbroadcast(-g * a.data / (b.data * b.data), b.shape)))


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _record((a,), -a.data, lambda g: (-g,))


def matmul(a, b) -> Tensor:
    """Matrix product with numpy batch broadcasting on leading axes."""
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data @ b.data

    def vjp(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _record((a, b), out, vjp)


def transpose2(a) -> Tensor:
    """Swap the last two axes."""
    a = _as_tensor(a)
    return _record((a,), np.swapaxes(a.data, -1, -2),
                   lambda g: (np.swapaxes(g, -1, -2),))


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    old = a.shape
    return _record((a,), a.data.reshape(shape), lambda g: (g.reshape(old),))


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return _record(tuple(tensors), np.concatenate([t.data for t in tensors], axis=axis), vjp)


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _record((a,), out, vjp)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


# --- elementwise nonlinearities ---

def relu(a) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0.0
    return _record((a,), np.where(mask, a.data, 0.0), lambda g: (g * mask,))


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(a) -> Tensor:
    a = _as_tensor(a)
    out = np.maximum(a.data, 0.0) + np.log1p(np.exp(-np.abs(a.data)))
    return _record((a,), out, lambda g: (g * _sigmoid(a.data),))


def texp(a) -> Tensor:
    a = _as_tensor(a)
    out = np.exp(a.data)
    return _record((a,), out, lambda g: (g * out,))


def ttanh(a) -> Tensor:
    a = _as_tensor(a)
    out = np.tanh(a.data)
    return _record((a,), out, lambda g: (g * (1.0 - out * out),))


def tlog(a) -> Tensor:
    a = _as_tensor(a)
    return _record((a,), np.log(a.data), lambda g: (g / a.data,))


def powc(a, p: float) -> Tensor:
    """Elementwise power with constant exponent (e.g. -0.5 for rsqrt)."""
    a = _as_tensor(a)
    return _record((a,), a.data ** p,
                   lambda g: (g * p * a.data ** (p - 1.0),))


# --- indexing ---

def take_nodes(a, idx) -> Tensor:
    """Select rows along axis -2 (node axis of a (..., n, c) signal)."""
    a = _as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    out = np.take(a.data, idx, axis=-2)

    def vjp(g):
        ga = np.zeros_like(a.data)
        gat = np.moveaxis(ga, -2, 0)
        np.add.at(gat, idx, np.moveaxis(g, -2, 0))
        return (ga,)

    return _record((a,), out, vjp)


# --- graph primitives ---

def edge_weights(mu, ei, ej) -> Tensor:
    """Per-edge endpoint averages w_e = (mu_i + mu_j) / 2 on the last axis.

    The adjoint scatters half of each edge gradient back to both endpoint
    nodes; this is what routes loss gradients into the potential.
    """
    mu = _as_tensor(mu)
    ei = np.asarray(ei, dtype=np.int64)
    ej = np.asarray(ej, dtype=np.int64)
    out = 0.5 * (np.take(mu.data, ei, axis=-1) + np.take(mu.data, ej, axis=-1))

    def vjp(g):
        gm = np.zeros_like(mu.data)
        gmt = np.moveaxis(gm, -1, 0)
        gt = np.moveaxis(g, -1, 0)
        np.add.at(gmt, ei, 0.5 * gt)
        np.add.at(gmt, ej, 0.5 * gt)
        return (gm,)

    return _record((mu,), out, vjp)


def node_sums(w, ei, ej, n: int) -> Tensor:
    """Scatter per-edge values to both endpoints: d_i = sum_{e ni i} w_e."""
    w = _as_tensor(w)
    ei = np.asarray(ei, dtype=np.int64)
    ej = np.asarray(ej, dtype=np.int64)
    out = np.zeros(w.shape[:-1] + (n,))
    out_t = np.moveaxis(out, -1, 0)
    wt = np.moveaxis(w.data, -1, 0)
    np.add.at(out_t, ei, wt)
    np.add.at(out_t, ej, wt)

    def vjp(g):
        return (np.take(g, ei, axis=-1) + np.take(g, ej, axis=-1),)

    return _record((w,), out, vjp)


def scatter_sym_dense(w, ei, ej, n: int) -> Tensor:
    """Dense symmetric matrix with w_e at (i, j) and (j, i) per canonical edge."""
    w = _as_tensor(w)
    ei = np.asarray(ei, dtype=np.int64)
    ej = np.asarray(ej, dtype=np.int64)
    out = np.zeros(w.shape[:-1] + (n, n))
    out[..., ei, ej] = w.data
    out[..., ej, ei] = w.data

    def vjp(g):
        return (g[..., ei, ej] + g[..., ej, ei],)

    return _record((w,), out, vjp)


def spmv_edge_weights(w, x, ei, ej) -> Tensor:
    """Apply the edge-weighted Laplacian without materializing it.

    y_i = (sum_{e ni i} w_e) x_i - sum_{(i,j)=e} w_e x_j, acting on
    x of shape (..., n, c) with weights (..., m). Differentiable in both
    arguments; the weight adjoint is (g_i - g_j) . (x_i - x_j) per edge.
    """
    w = _as_tensor(w)
    x = _as_tensor(x)
    ei = np.asarray(ei, dtype=np.int64)
    ej = np.asarray(ej, dtype=np.int64)
    n = x.shape[-2]

    def apply_lw(wd, xd):
        deg = np.zeros(wd.shape[:-1] + (n,))
        deg_t = np.moveaxis(deg, -1, 0)
        wt = np.moveaxis(wd, -1, 0)
        np.add.at(deg_t, ei, wt)
        np.add.at(deg_t, ej, wt)
        y = deg[..., None] * xd
        yt = np.moveaxis(y, -2, 0)
        we = wd[..., None]
        np.add.at(yt, ei, np.moveaxis(-we * np.take(xd, ej, axis=-2), -2, 0))
        np.add.at(yt, ej, np.moveaxis(-we * np.take(xd, ei, axis=-2), -2, 0))
        return y

    out = apply_lw(w.data, x.data)

    def vjp(g):
        gx = apply_lw(w.data, g)  # the operator is symmetric in x
        dg = np.take(g, ei, axis=-2) - np.take(g, ej, axis=-2)
        dx = np.take(x.data, ei, axis=-2) - np.take(x.data, ej, axis=-2)
        gw = _unbroadcast((dg * dx).sum(axis=-1), w.shape)
        return gw, _unbroadcast(gx, x.shape)

    return _record((w, x), out, vjp)


def diag_embed(d) -> Tensor:
    """(..., n) -> (..., n, n) diagonal matrices."""
    d = _as_tensor(d)
    n = d.shape[-1]
    out = np.zeros(d.shape + (n,))
    r = np.arange(n)
    out[..., r, r] = d.data

    def vjp(g):
        return (g[..., r, r],)

    return _record((d,), out, vjp)


# --- backward pass ---

def backward(tape: Tape, loss: Tensor) -> dict:
    """Reverse sweep from a scalar loss; returns {trainable leaf: gradient}.

    Leaves the loss never touched get an explicit zero gradient.
    """
    if not isinstance(loss, Tensor):
        raise ValueError("loss must be a Tensor")
    if loss.data.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.shape}")
    if loss.tape is not tape:
        raise ValueError("loss was not recorded on this tape")
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape._nodes):
        g = grads.pop(id(node), None)
        if g is None or node.vjp is None:
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    return {leaf: grads.get(id(leaf), np.zeros_like(leaf.data))
            for leaf in tape._leaves}


# --- optimizer ---

class AdamState:
    """First/second moment accumulators keyed like the parameter dict."""

    def __init__(self, params: dict):
        self.step = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              weight_decay: float = 0.0) -> None:
    """One in-place Adam update with decoupled L2 on the gradient."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for k, p in params.items():
        g = grads[k]
        if weight_decay:
            g = g + weight_decay * p
        state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g
        state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * (g * g)
        p -= lr * (state.m[k] / bc1) / (np.sqrt(state.v[k] / bc2) + eps)


def check_finite(params: dict, context: str = "training step") -> None:
    """NaN guard run after each update; raises :class:`NaNLoss`."""
    for k, v in params.items():
        if not np.isfinite(v).all():
            raise NaNLoss(f"non-finite values in {k!r} after {context}")
