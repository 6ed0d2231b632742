"""Minimal float64 tensor type with reverse-mode autodiff on an explicit tape.

All values are row-major numpy float64 arrays. Primitive operations (see
``pcsw.nn.ops``) record themselves on the currently active :class:`Tape`;
``Tape.backward`` replays the record in reverse execution order, which is a
valid reverse topological order of the computation graph, and accumulates
gradients into every tensor that requires them. Without an active tape the
primitives are plain numpy computations (inference mode).
"""

from __future__ import annotations

import numpy as np


class TapeError(RuntimeError):
    """Raised when a tape is reused after backward or is otherwise unusable."""


class Tensor:
    """A float64 array plus an optional gradient slot of identical shape."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Thin operator sugar; the actual primitives live in pcsw.nn.ops and are
    # bound here at import time to avoid a circular import.
    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    def __neg__(self):
        from . import ops

        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)

    def sum(self, axis=None):
        from . import ops

        return ops.sum_(self, axis=axis)

    def mean(self, axis=None):
        from . import ops

        return ops.mean_(self, axis=axis)

    def reshape(self, shape):
        from . import ops

        return ops.reshape(self, shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


_TAPE_STACK: list["Tape"] = []


def active_tape() -> "Tape | None":
    return _TAPE_STACK[-1] if _TAPE_STACK else None


class Tape:
    """Ordered record of primitive operations from one forward pass.

    Usable as a context manager; entering pushes the tape so primitives
    record onto it. ``backward`` may be called exactly once, after which the
    tape is consumed and a fresh forward pass is required.
    """

    def __init__(self):
        self._nodes: list[tuple[Tensor, object]] = []  # (output, backward_fn)
        self._consumed = False

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        _TAPE_STACK.remove(self)
        return False

    def __len__(self) -> int:
        return len(self._nodes)

    def record(self, output: Tensor, backward_fn) -> None:
        if self._consumed:
            raise TapeError("cannot record on a consumed tape")
        self._nodes.append((output, backward_fn))

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(t) into t.grad for every recorded tensor t."""
        if self._consumed:
            raise TapeError("tape already consumed; run a new forward pass")
        if loss.data.size != 1:
            raise ValueError(f"loss must be a scalar tensor, got shape {loss.shape}")
        if not self._nodes:
            raise TapeError("empty tape: nothing was recorded")
        self._consumed = True
        loss.grad = np.ones_like(loss.data)
        for output, backward_fn in reversed(self._nodes):
            if output.grad is not None:
                backward_fn(output.grad)
        self._nodes.clear()


def accumulate_grad(t: Tensor, grad: np.ndarray) -> None:
    """Add ``grad`` into ``t.grad``, reducing over broadcast axes first."""
    if not t.requires_grad:
        return
    grad = unbroadcast(grad, t.data.shape)
    if t.grad is None:
        t.grad = grad.copy()
    else:
        t.grad += grad


def unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (the adjoint of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad
