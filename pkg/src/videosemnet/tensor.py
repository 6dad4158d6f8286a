"""Minimal dense-tensor engine with reverse-mode automatic differentiation.

Every array the model touches lives in a :class:`Tensor`. Data is a row-major
numpy buffer (float64 for tests and gradient audits, float32 for training);
non-leaf tensors carry a backward closure and parent references forming an
acyclic graph. Only the operations the model actually needs are implemented;
broadcasting is supported where those operations require it and nowhere else.
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import (
    BatchSizeError,
    ConfigError,
    ContractError,
    DegenerateInputError,
    DimensionError,
    NumericDomainError,
)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self.op: str = "leaf"

    # -- introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self.op}, grad={self.requires_grad})"

    # -- graph plumbing ------------------------------------------------

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def detach(self) -> "Tensor":
        """Copy of the value with no graph history (still trainable-grad off)."""
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        if self.data.size != 1:
            raise ContractError("backward() requires a scalar output")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar ------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(as_tensor(other), -1.0))

    def __rsub__(self, other):
        return add(as_tensor(other), mul(self, -1.0))

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def _needs_grad(*tensors: Tensor) -> bool:
    return any(t.requires_grad or t._backward is not None for t in tensors)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward, op: str) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = False
    if any(p.requires_grad or p._backward is not None for p in parents):
        out._parents = tuple(parents)
        out._backward = backward
        out.op = op
    else:
        out._parents = ()
        out._backward = None
        out.op = op
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- elementwise arithmetic -------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def backward(g):
        if a.requires_grad or a._backward is not None:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad or b._backward is not None:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backward, "add")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def backward(g):
        if a.requires_grad or a._backward is not None:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad or b._backward is not None:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), backward, "mul")


# -- linear algebra ---------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2):
        raise DimensionError(f"matmul supports rank 1/2, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[0]:
        raise DimensionError(f"matmul inner dims disagree: {a.data.shape} @ {b.data.shape}")
    data = a.data @ b.data

    def backward(g):
        an, bn = a.data.ndim, b.data.ndim
        if a.requires_grad or a._backward is not None:
            if an == 2 and bn == 2:
                ga = g @ b.data.T
            elif an == 2 and bn == 1:
                ga = np.outer(g, b.data)
            elif an == 1 and bn == 2:
                ga = b.data @ g
            else:
                ga = g * b.data
            a._accumulate(ga)
        if b.requires_grad or b._backward is not None:
            if an == 2 and bn == 2:
                gb = a.data.T @ g
            elif an == 2 and bn == 1:
                gb = a.data.T @ g
            elif an == 1 and bn == 2:
                gb = np.outer(a.data, g)
            else:
                gb = g * a.data
            b._accumulate(gb)

    return _make(data, (a, b), backward, "matmul")


def transpose(a) -> Tensor:
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise DimensionError("transpose expects a rank-2 tensor")
    data = a.data.T.copy()

    def backward(g):
        a._accumulate(g.T)

    return _make(data, (a,), backward, "transpose")


# -- reductions & reshaping -------------------------------------------


def tsum(a, axis: Optional[int] = None) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=axis)

    def backward(g):
        if axis is None:
            a._accumulate(np.full_like(a.data, g))
        else:
            a._accumulate(np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy())

    return _make(np.asarray(data), (a,), backward, "sum")


def tmean(a, axis: Optional[int] = None) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis), 1.0 / n)


def concat(parts: Iterable) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise DimensionError("concat of zero tensors")
    for p in parts:
        if p.data.ndim != 1:
            raise DimensionError("concat expects rank-1 tensors")
    data = np.concatenate([p.data for p in parts])

    def backward(g):
        off = 0
        for p in parts:
            n = p.data.shape[0]
            if p.requires_grad or p._backward is not None:
                p._accumulate(g[off : off + n])
            off += n

    return _make(data, tuple(parts), backward, "concat")


def stack_rows(rows: Sequence) -> Tensor:
    rows = [as_tensor(r) for r in rows]
    if not rows:
        raise DimensionError("stack of zero rows")
    data = np.stack([r.data for r in rows])

    def backward(g):
        for i, r in enumerate(rows):
            if r.requires_grad or r._backward is not None:
                r._accumulate(g[i])

    return _make(data, tuple(rows), backward, "stack")


def rows_slice(m, start: int, stop: int) -> Tensor:
    m = as_tensor(m)
    if m.data.ndim != 2:
        raise DimensionError("rows_slice expects a rank-2 tensor")
    data = m.data[start:stop].copy()

    def backward(g):
        gm = np.zeros_like(m.data)
        gm[start:stop] = g
        m._accumulate(gm)

    return _make(data, (m,), backward, "rows_slice")


def row(m, i: int) -> Tensor:
    m = as_tensor(m)
    if m.data.ndim != 2:
        raise DimensionError("row() expects a rank-2 tensor")
    data = m.data[i].copy()

    def backward(g):
        gm = np.zeros_like(m.data)
        gm[i] = g
        m._accumulate(gm)

    return _make(data, (m,), backward, "row")


def set_row(m, i: int, v) -> Tensor:
    m, v = as_tensor(m), as_tensor(v)
    if m.data.shape[1:] != v.data.shape:
        raise DimensionError(f"row shape {v.data.shape} does not fit {m.data.shape}")
    data = m.data.copy()
    data[i] = v.data

    def backward(g):
        if m.requires_grad or m._backward is not None:
            gm = g.copy()
            gm[i] = 0.0
            m._accumulate(gm)
        if v.requires_grad or v._backward is not None:
            v._accumulate(g[i])

    return _make(data, (m, v), backward, "set_row")


def gather_rows(table, ids: Sequence[int]) -> Tensor:
    table = as_tensor(table)
    idx = np.asarray(ids, dtype=np.int64)
    data = table.data[idx].copy()

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx, g)
        table._accumulate(gt)

    return _make(data, (table,), backward, "gather_rows")


# -- nonlinearities ---------------------------------------------------


def tanh(a) -> Tensor:
    a = as_tensor(a)
    data = np.tanh(a.data)

    def backward(g):
        a._accumulate(g * (1.0 - data * data))

    return _make(data, (a,), backward, "tanh")


def relu(a) -> Tensor:
    a = as_tensor(a)
    data = np.maximum(a.data, 0.0)

    def backward(g):
        a._accumulate(g * (a.data > 0.0))

    return _make(data, (a,), backward, "relu")


def activation(a, kind: str) -> Tensor:
    if kind == "tanh":
        return tanh(a)
    if kind == "relu":
        return relu(a)
    raise ConfigError(f"unknown activation {kind!r}")


def softmax(x) -> Tensor:
    x = as_tensor(x)
    if x.data.ndim != 1 or x.data.size < 1:
        raise DimensionError("softmax expects a non-empty rank-1 tensor")
    if not np.all(np.isfinite(x.data)):
        raise NumericDomainError("softmax input contains NaN/Inf")
    shifted = x.data - x.data.max()
    e = np.exp(shifted)
    data = e / e.sum()

    def backward(g):
        x._accumulate(data * (g - float(g @ data)))

    return _make(data, (x,), backward, "softmax")


def cosine_similarity(a, b, eps: float = 0.0) -> Tensor:
    """Cosine of two rank-1 tensors.

    With eps == 0 a zero-norm operand raises; training passes a small eps so
    the guard clamps the denominator instead.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 1 or b.data.ndim != 1 or a.data.shape != b.data.shape:
        raise DimensionError(f"cosine expects matching rank-1 shapes, got {a.data.shape}, {b.data.shape}")
    na = float(np.linalg.norm(a.data))
    nb = float(np.linalg.norm(b.data))
    if eps <= 0.0 and (na == 0.0 or nb == 0.0):
        raise DegenerateInputError("cosine of a zero-norm vector")
    na = max(na, eps)
    nb = max(nb, eps)
    dot = float(a.data @ b.data)
    c = dot / (na * nb)
    data = np.asarray(c, dtype=a.data.dtype)

    def backward(g):
        gs = float(g)
        if a.requires_grad or a._backward is not None:
            a._accumulate(gs * (b.data / (na * nb) - c * a.data / (na * na)))
        if b.requires_grad or b._backward is not None:
            b._accumulate(gs * (a.data / (na * nb) - c * b.data / (nb * nb)))

    return _make(data, (a, b), backward, "cosine")


# -- temporal ops -----------------------------------------------------


def conv1d(x, filters, bias) -> Tensor:
    """"Same"-padded temporal cross-correlation.

    x: (T, c_in); filters: (k, c_in, c_out) with k odd; bias: (c_out,).
    """
    x, filters, bias = as_tensor(x), as_tensor(filters), as_tensor(bias)
    if filters.data.ndim != 3:
        raise DimensionError("filters must be (k, c_in, c_out)")
    k, cin, cout = filters.data.shape
    if k % 2 == 0:
        raise ConfigError(f"kernel size must be odd, got {k}")
    if x.data.ndim != 2 or x.data.shape[1] != cin:
        raise DimensionError(f"input channels {x.data.shape} do not match filters {filters.data.shape}")
    if bias.data.shape != (cout,):
        raise DimensionError(f"bias shape {bias.data.shape} != ({cout},)")

    dt = np.result_type(x.data.dtype, filters.data.dtype, bias.data.dtype)
    xd = np.ascontiguousarray(x.data, dtype=dt)
    wd = np.ascontiguousarray(filters.data, dtype=dt)
    bd = np.ascontiguousarray(bias.data, dtype=dt)
    data = _kernels.conv1d_forward(xd, wd, bd)

    def backward(g):
        gx, gw, gb = _kernels.conv1d_backward(xd, wd, np.ascontiguousarray(g, dtype=dt))
        if x.requires_grad or x._backward is not None:
            x._accumulate(gx.astype(x.data.dtype, copy=False))
        if filters.requires_grad or filters._backward is not None:
            filters._accumulate(gw.astype(filters.data.dtype, copy=False))
        if bias.requires_grad or bias._backward is not None:
            bias._accumulate(gb.astype(bias.data.dtype, copy=False))

    return _make(data, (x, filters, bias), backward, "conv1d")


def maxpool1d(x, window: int = 2) -> Tensor:
    """Non-overlapping max over time; a trailing odd element is dropped."""
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise DimensionError("maxpool1d expects (T, c)")
    T, c = x.data.shape
    if T < window:
        raise DimensionError(f"maxpool1d needs T >= {window}, got {T}")
    out_t = T // window
    view = x.data[: out_t * window].reshape(out_t, window, c)
    arg = view.argmax(axis=1)
    data = np.take_along_axis(view, arg[:, None, :], axis=1)[:, 0, :]

    def backward(g):
        gx = np.zeros_like(x.data)
        gview = gx[: out_t * window].reshape(out_t, window, c)
        np.put_along_axis(gview, arg[:, None, :], g[:, None, :], axis=1)
        x._accumulate(gx)

    return _make(data, (x,), backward, "maxpool1d")


class BatchNormState:
    """Running statistics for one batchnorm site (not trainable)."""

    def __init__(self, num_features: int, dtype=np.float64):
        self.mean = np.zeros(num_features, dtype=dtype)
        self.var = np.ones(num_features, dtype=dtype)
        self.momentum = 0.9
        self.eps = 1e-5


def batchnorm(x, gamma, beta, state: BatchNormState, training: bool) -> Tensor:
    """Per-feature standardization over the batch axis of a (B, F) tensor."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.data.ndim != 2:
        raise DimensionError("batchnorm expects (B, F)")
    B, F = x.data.shape
    if gamma.data.shape != (F,) or beta.data.shape != (F,):
        raise DimensionError("gamma/beta must have one entry per feature")
    eps = state.eps
    if training:
        if B < 2:
            raise BatchSizeError(f"train-mode batchnorm needs B >= 2, got {B}")
        mu = x.data.mean(axis=0)
        var = x.data.var(axis=0)  # population variance
        state.mean = state.momentum * state.mean + (1 - state.momentum) * mu
        state.var = state.momentum * state.var + (1 - state.momentum) * var
    else:
        mu = state.mean.astype(x.data.dtype, copy=False)
        var = state.var.astype(x.data.dtype, copy=False)
    std = np.sqrt(var + eps)
    xhat = (x.data - mu) / std
    data = gamma.data * xhat + beta.data

    def backward(g):
        if gamma.requires_grad or gamma._backward is not None:
            gamma._accumulate((g * xhat).sum(axis=0))
        if beta.requires_grad or beta._backward is not None:
            beta._accumulate(g.sum(axis=0))
        if x.requires_grad or x._backward is not None:
            dxhat = g * gamma.data
            if training:
                gx = (dxhat - dxhat.mean(axis=0) - xhat * (dxhat * xhat).mean(axis=0)) / std
            else:
                gx = dxhat / std
            x._accumulate(gx)

    return _make(data, (x, gamma, beta), backward, "batchnorm")


# -- parameters -------------------------------------------------------


class ParameterStore:
    """Named tensors plus the initializer descriptor each was created with."""

    def __init__(self):
        self._entries: dict[str, Tensor] = {}
        self._init: dict[str, str] = {}
        self._trainable: dict[str, bool] = {}

    def add(self, name: str, tensor: Tensor, init: str = "external", trainable: bool = True) -> Tensor:
        if name in self._entries:
            raise ConfigError(f"parameter {name!r} registered twice")
        tensor.requires_grad = trainable
        self._entries[name] = tensor
        self._init[name] = init
        self._trainable[name] = trainable
        return tensor

    def create(
        self,
        name: str,
        shape: Sequence[int],
        rng: np.random.Generator,
        scale: float = 0.1,
        dtype=np.float64,
        trainable: bool = True,
    ) -> Tensor:
        data = (rng.standard_normal(tuple(shape)) * scale).astype(dtype)
        return self.add(name, Tensor(data, requires_grad=trainable), init=f"normal(scale={scale})", trainable=trainable)

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def trainable_items(self):
        return [(n, t) for n, t in self._entries.items() if self._trainable[n]]

    def zero_grads(self) -> None:
        for t in self._entries.values():
            t.grad = None

    def init_descriptor(self, name: str) -> str:
        return self._init[name]

    def is_trainable(self, name: str) -> bool:
        return self._trainable[name]

    def astype(self, dtype) -> None:
        for t in self._entries.values():
            t.data = t.data.astype(dtype)
            t.grad = None


# -- gradient audit ---------------------------------------------------


def grad_check(
    f: Callable[[], Tensor],
    store: ParameterStore,
    h: float = 1e-4,
    param_names: Optional[Sequence[str]] = None,
    max_entries_per_param: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    f re-runs the scalar computation against the store's current values.
    Meaningful only in float64; callers are expected to build the store that
    way. Entries can be subsampled for quick smoke checks; the acceptance
    audit passes max_entries_per_param=None and touches every entry.
    """
    store.zero_grads()
    out = f()
    if out.data.size != 1:
        raise ContractError("grad_check target must be scalar-valued")
    out.backward()

    names = list(param_names) if param_names is not None else [n for n, _ in store.trainable_items()]
    analytic = {}
    for n in names:
        t = store[n]
        analytic[n] = np.zeros_like(t.data) if t.grad is None else t.grad.copy()

    worst = 0.0
    for n in names:
        t = store[n]
        flat = t.data.reshape(-1)
        size = flat.size
        if max_entries_per_param is not None and size > max_entries_per_param:
            picker = rng if rng is not None else np.random.default_rng(0)
            idxs = picker.choice(size, size=max_entries_per_param, replace=False)
        else:
            idxs = range(size)
        an = analytic[n].reshape(-1)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + h
            fp = float(f().data)
            flat[i] = orig - h
            fm = float(f().data)
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * h)
            denom = max(abs(an[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(an[i] - numeric) / denom)
    return worst
