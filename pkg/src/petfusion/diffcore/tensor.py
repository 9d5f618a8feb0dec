"""Dense float32 tensors with define-by-run reverse-mode autodiff.

The graph is rebuilt on every forward pass: each Tensor produced by an
operation keeps its parents and a backward closure. backward() walks the
graph once in reverse topological order and accumulates gradients into a
GradTape (and mirrors them onto .grad of every requires_grad tensor).
"""

from __future__ import annotations

import threading

import numpy as np

from ..errors import ContractError, ShapeError

_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


class no_grad:
    """Context manager: ops run inside record no graph."""

    def __enter__(self):
        self._prev = grad_enabled()
        _state.grad_enabled = False
        return self

    def __exit__(self, *exc):
        _state.grad_enabled = self._prev
        return False


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_bw")

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data, dtype=np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._bw = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar; the real implementations live in ops.py
    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops

        return ops.sub(other, self)

    def __neg__(self):
        from . import ops

        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)


def as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float32))


def make_result(data, parents, bw) -> Tensor:
    """Wrap an op output; records the graph edge only when grads can flow."""
    out = Tensor(data)
    if grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._bw = bw
    return out


class GradTape:
    """Per-backward-pass gradient accumulators keyed by tensor identity."""

    def __init__(self):
        self._grads: dict[int, np.ndarray] = {}
        self._order: list[Tensor] = []

    def accumulate(self, t: Tensor, g: np.ndarray):
        if g.shape != t.data.shape:
            raise ShapeError(f"gradient shape {g.shape} != tensor shape {t.data.shape}")
        key = id(t)
        if key in self._grads:
            self._grads[key] += g
        else:
            self._grads[key] = g.astype(np.float32, copy=True)

    def gradient(self, t: Tensor) -> np.ndarray:
        """Accumulated gradient; zeros for tensors unreachable from the loss."""
        g = self._grads.get(id(t))
        if g is None:
            return np.zeros_like(t.data)
        return g

    def visited(self) -> int:
        return len(self._order)


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> GradTape:
    """Reverse-mode pass from a scalar loss.

    Fills the returned tape and overwrites .grad on every requires_grad
    tensor reached (zero-filled access for unreached ones goes through
    tape.gradient).
    """
    if loss.data.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}")
    topo = _toposort(loss)
    tape = GradTape()
    tape._grads[id(loss)] = np.ones_like(loss.data)
    for node in reversed(topo):
        g = tape._grads.get(id(node))
        if g is None:
            continue
        tape._order.append(node)
        if node.requires_grad:
            node.grad = g.copy()
        if node._bw is not None:
            for parent, pg in node._bw(g):
                if pg is None:
                    continue
                tape.accumulate(parent, pg)
    return tape


def check_finite(t: Tensor, what: str = "tensor") -> Tensor:
    """NaN/Inf is an error state after any forward op; callers opt in."""
    if not np.isfinite(t.data).all():
        raise ContractError(f"{what} contains NaN/Inf values")
    return t
