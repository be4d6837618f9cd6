"""Tensors and the recording tape for reverse-mode differentiation."""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np


class ShapeError(ValueError):
    def __init__(self, op: str, *shapes):
        shown = " and ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {shown}")


class TapeError(RuntimeError):
    pass


class Tensor:
    """A dense array plus, when recorded, the rule to push gradients back."""

    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn", "name", "op")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self.parents: tuple[Tensor, ...] = ()
        self.backward_fn = None
        self.name = name
        self.op = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        label = self.name or self.op
        return f"Tensor({label}, shape={self.shape}, dtype={self.dtype})"

    # operator sugar
    def __add__(self, other):
        from .ops import add
        return add(self, other)

    def __mul__(self, other):
        from .ops import mul
        return mul(self, other)

    def __matmul__(self, other):
        from .ops import matmul
        return matmul(self, other)

    def __neg__(self):
        from .ops import neg
        return neg(self)


def parameter(data, name: str) -> Tensor:
    return Tensor(np.array(data), requires_grad=True, name=name)


def constant(data, dtype=None) -> Tensor:
    return Tensor(np.asarray(data, dtype=dtype))


class Tape:
    """Append-only record of the operations of one forward pass."""

    def __init__(self):
        self.nodes: list[Tensor] = []
        self.consumed = False

    def __enter__(self):
        _STACK.append(self)
        return self

    def __exit__(self, *exc):
        _STACK.remove(self)
        return False

    def __len__(self) -> int:
        return len(self.nodes)


_STACK: list[Tape] = []


def active_tape() -> Tape | None:
    return _STACK[-1] if _STACK else None


@contextmanager
def no_tape():
    saved = _STACK[:]
    _STACK.clear()
    try:
        yield
    finally:
        _STACK[:] = saved


def record(value: np.ndarray, op: str, parents: tuple, backward_fn) -> Tensor:
    """Wrap an op result, recording it when a tape is active and any parent
    needs a gradient. ``backward_fn(g)`` returns one gradient (or None) per
    parent."""
    out = Tensor(value)
    out.op = op
    tape = active_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = parents
        out.backward_fn = backward_fn
        tape.nodes.append(out)
    return out


def backward(tape: Tape, loss: Tensor, params=()) -> list[np.ndarray]:
    """Propagate d(loss) back through ``tape``.

    Every tensor in ``params`` gets a fresh ``.grad`` (zeros when the loss
    does not reach it); the same arrays are returned in order. A tape can be
    differentiated once.
    """
    if tape.consumed:
        raise TapeError("tape already differentiated; record a new forward pass")
    if loss.data.size != 1:
        raise ShapeError("backward (loss must be scalar)", loss.shape)
    tape.consumed = True
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node), None)
        node.grad = g
        if g is None:
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    out = []
    for p in params:
        g = grads.get(id(p))
        p.grad = np.zeros_like(p.data) if g is None else g.astype(p.data.dtype, copy=False)
        out.append(p.grad)
    return out
