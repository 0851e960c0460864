"""Dense tensors with a define-by-run reverse-mode differentiation tape.

A Tensor wraps an immutable, C-contiguous float32/float64 numpy array.
Operations build the computation graph as they run: each result carries a
Node pointing at its inputs together with a vector-Jacobian closure. The
tape for a given scalar is recovered by topologically ordering that graph,
and `backward` walks it once in reverse, summing gradients for every
tensor that requires them.

Two broadcasting cases are supported: exact shape match and rank-0
(scalar) against anything. Any op that produces a non-finite value raises
NumericsError on the spot.
"""

from __future__ import annotations

import contextlib
import contextvars
from typing import Callable, Iterable

import numpy as np

from .errors import ContractError, NumericsError, ShapeError

DTYPES = {"f32": np.float32, "f64": np.float64}

_grad_enabled: contextvars.ContextVar[bool] = contextvars.ContextVar(
    "rfrlkit_grad_enabled", default=True
)


def grad_enabled() -> bool:
    return _grad_enabled.get()


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (forward values only)."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


class Node:
    """One recorded primitive: inputs and the backward closure of the op."""

    __slots__ = ("op", "inputs", "vjp")

    def __init__(self, op: str, inputs: tuple["Tensor", ...], vjp: Callable):
        self.op = op
        self.inputs = inputs
        self.vjp = vjp


class Tensor:
    __slots__ = ("data", "requires_grad", "node")

    def __init__(self, data: np.ndarray, requires_grad: bool = False,
                 node: Node | None = None):
        if data.dtype not in (np.float32, np.float64):
            raise ContractError(f"unsupported dtype {data.dtype}")
        if not data.flags.c_contiguous:
            # note: ascontiguousarray would promote rank-0 to (1,), so it
            # only runs when a copy is actually needed
            data = np.ascontiguousarray(data)
        data.setflags(write=False)
        self.data = data
        self.requires_grad = requires_grad
        self.node = node

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def __repr__(self) -> str:
        return (f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, "
                f"requires_grad={self.requires_grad})")

    # arithmetic sugar; scalars are python numbers or rank-0 tensors
    def __add__(self, other):
        return ewise("add", self, other)

    def __radd__(self, other):
        return ewise("add", self, other)

    def __sub__(self, other):
        return ewise("sub", self, other)

    def __mul__(self, other):
        return ewise("mul", self, other)

    def __rmul__(self, other):
        return ewise("mul", self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return ewise("mul", self, -1.0)

    def sum(self) -> "Tensor":
        return tsum(self)

    def mean(self) -> "Tensor":
        return tmean(self)

    def log(self) -> "Tensor":
        return tlog(self)

    def sqrt(self) -> "Tensor":
        return tsqrt(self)

    def abs(self) -> "Tensor":
        return tabs(self)

    def clip(self, lo: float, hi: float) -> "Tensor":
        return tclip(self, lo, hi)


def tensor(values, dtype="f32", requires_grad: bool = False) -> Tensor:
    """Build a leaf tensor from array-like values."""
    np_dtype = DTYPES.get(dtype, dtype)
    return Tensor(np.asarray(values, dtype=np_dtype), requires_grad=requires_grad)


def zeros(shape, dtype="f32", requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape, DTYPES.get(dtype, dtype)), requires_grad)


def ones(shape, dtype="f32", requires_grad: bool = False) -> Tensor:
    return Tensor(np.ones(shape, DTYPES.get(dtype, dtype)), requires_grad)


def op_result(data: np.ndarray, op: str, inputs: tuple[Tensor, ...],
              vjp: Callable) -> Tensor:
    """Wrap an op output, validate finiteness, and record the tape node."""
    if not np.isfinite(data).all():
        raise NumericsError(f"op '{op}' produced non-finite values")
    needs = grad_enabled() and any(t.requires_grad for t in inputs)
    node = Node(op, inputs, vjp) if needs else None
    return Tensor(data, requires_grad=needs, node=node)


def _as_operand(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        if x.dtype != like.dtype:
            raise ContractError(
                f"mixed dtypes {x.data.dtype.name} vs {like.data.dtype.name}")
        return x
    return Tensor(np.asarray(x, dtype=like.dtype))


def _reduce_to(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    # only rank-0 broadcast is allowed, so the reduction is a full sum
    if shape == grad.shape:
        return grad
    return np.asarray(grad.sum(), dtype=grad.dtype).reshape(shape)


def ewise(kind: str, a: Tensor, b) -> Tensor:
    """Element-wise add/sub/mul on equal shapes (or scalar against tensor)."""
    if not isinstance(a, Tensor):
        a = _as_operand(a, b)
    b = _as_operand(b, a)
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise ShapeError(f"ewise {kind}: shapes {a.shape} vs {b.shape}")
    ad, bd = a.data, b.data
    if kind == "add":
        out = ad + bd

        def vjp(g):
            return _reduce_to(g, ad.shape), _reduce_to(g, bd.shape)
    elif kind == "sub":
        out = ad - bd

        def vjp(g):
            return _reduce_to(g, ad.shape), _reduce_to(-g, bd.shape)
    elif kind == "mul":
        out = ad * bd

        def vjp(g):
            return _reduce_to(g * bd, ad.shape), _reduce_to(g * ad, bd.shape)
    else:
        raise ContractError(f"unknown ewise kind '{kind}'")
    return op_result(out, kind, (a, b), vjp)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Strict 2-D matrix product."""
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dims disagree: {a.shape} @ {b.shape}")
    b = _as_operand(b, a)
    ad, bd = a.data, b.data

    def vjp(g):
        return g @ bd.T, ad.T @ g

    return op_result(ad @ bd, "matmul", (a, b), vjp)


def tsum(x: Tensor) -> Tensor:
    xd = x.data

    def vjp(g):
        return (np.full(xd.shape, g, dtype=xd.dtype),)

    return op_result(np.asarray(xd.sum(), dtype=xd.dtype), "sum", (x,), vjp)


def tmean(x: Tensor) -> Tensor:
    xd = x.data
    n = xd.size

    def vjp(g):
        return (np.full(xd.shape, g / n, dtype=xd.dtype),)

    return op_result(np.asarray(xd.mean(), dtype=xd.dtype), "mean", (x,), vjp)


def tlog(x: Tensor) -> Tensor:
    xd = x.data

    def vjp(g):
        return (g / xd,)

    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(xd)
    return op_result(out, "log", (x,), vjp)


def tsqrt(x: Tensor) -> Tensor:
    with np.errstate(invalid="ignore"):
        out = np.sqrt(x.data)

    def vjp(g):
        return (g * (0.5 / out),)

    return op_result(out, "sqrt", (x,), vjp)


def tabs(x: Tensor) -> Tensor:
    xd = x.data

    def vjp(g):
        return (g * np.sign(xd),)

    return op_result(np.abs(xd), "abs", (x,), vjp)


def tclip(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient passes only strictly inside the range."""
    xd = x.data
    mask = (xd > lo) & (xd < hi)

    def vjp(g):
        return (g * mask,)

    return op_result(np.clip(xd, lo, hi), "clip", (x,), vjp)


class ComputationTape:
    """Topologically ordered record of the ops below one output tensor."""

    def __init__(self, order: list[Tensor]):
        self._order = order

    @classmethod
    def trace(cls, root: Tensor) -> "ComputationTape":
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            t, expanded = stack.pop()
            if expanded:
                order.append(t)
                continue
            if id(t) in seen or t.node is None:
                continue
            seen.add(id(t))
            stack.append((t, True))
            for inp in t.node.inputs:
                stack.append((inp, False))
        return cls(order)

    def __len__(self) -> int:
        return len(self._order)

    def records(self) -> list[tuple[str, tuple[int, ...], int]]:
        """(op kind, input ids, output id) per node, in execution order."""
        return [(t.node.op, tuple(id(i) for i in t.node.inputs), id(t))
                for t in self._order]

    def tensors(self) -> list[Tensor]:
        return list(self._order)


class GradMap:
    """Gradients keyed by tensor identity; absent means detached/unreached."""

    def __init__(self, grads: dict[int, np.ndarray], holder: dict[int, Tensor]):
        self._grads = grads
        self._holder = holder

    def __contains__(self, t: Tensor) -> bool:
        return id(t) in self._grads

    def __getitem__(self, t: Tensor) -> Tensor:
        try:
            return Tensor(self._grads[id(t)])
        except KeyError:
            raise KeyError(f"no gradient recorded for {t!r}") from None

    def get(self, t: Tensor, default=None):
        return self[t] if t in self else default

    def raw(self, t: Tensor) -> np.ndarray:
        return self._grads[id(t)]

    def __len__(self) -> int:
        return len(self._grads)


def backward(loss: Tensor, tape: ComputationTape | None = None) -> GradMap:
    """Reverse sweep from a scalar loss; returns grads for every tensor
    that requires them (parameters, inputs, and intermediate features)."""
    if loss.shape != ():
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if tape is None:
        tape = ComputationTape.trace(loss)
    grads: dict[int, np.ndarray] = {}
    holder: dict[int, Tensor] = {}
    if loss.requires_grad:
        grads[id(loss)] = np.ones((), dtype=loss.dtype)
        holder[id(loss)] = loss
    for t in reversed(tape.tensors()):
        g = grads.get(id(t))
        if g is None:
            continue
        for inp, gi in zip(t.node.inputs, t.node.vjp(g)):
            if gi is None or not inp.requires_grad:
                continue
            prev = grads.get(id(inp))
            grads[id(inp)] = gi if prev is None else prev + gi
            holder[id(inp)] = inp
    return GradMap(grads, holder)


def stack_batch(tensors: Iterable[Tensor]) -> Tensor:
    """Stack equal-shape constant tensors along a new leading batch axis."""
    arrs = [t.data for t in tensors]
    return Tensor(np.stack(arrs, axis=0))
